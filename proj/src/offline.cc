#include "streamguard/offline.h"

#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace streamguard {

RunMeta load_run_meta(const std::filesystem::path& dir) {
  RunMeta m;
  std::ifstream in(dir / "summary.json");
  if (!in) return m;
  const auto j = nlohmann::json::parse(in);
  m.core_delay_ms = j.value("core_delay_ms", m.core_delay_ms);
  m.qoe_start_ms = j.value("qoe_start_ms", m.qoe_start_ms);
  if (j.contains("duration_s")) m.duration_s = j.at("duration_s").get<double>();
  if (j.contains("receiver")) {
    const auto& r = j.at("receiver");
    m.receiver.playout_offset_ms = r.value("playout_offset_ms", 0.0);
    m.receiver.frame_hold_ms = r.value("frame_hold_ms", 0.0);
  }
  return m;
}

std::vector<OfflineFlow> load_run_dir(const std::filesystem::path& dir,
                                      double core_delay_ms) {
  std::ifstream gt(dir / "ground_truth.csv");
  if (!gt) throw std::runtime_error("missing " + (dir / "ground_truth.csv").string());
  std::ifstream tr(dir / "trace.csv");
  if (!tr) throw std::runtime_error("missing " + (dir / "trace.csv").string());

  std::map<uint32_t, OfflineFlow> flows;
  for (auto& row : read_ground_truth_csv(gt)) {
    auto& f = flows[row.flow];
    f.flow = row.flow;
    f.truth.frames.push_back(row.frame);
  }
  std::map<uint32_t, std::map<uint64_t, uint32_t>> video_got;
  for (const auto& rec : read_trace_csv(tr)) {
    const SimPacket& p = rec.packet;
    auto it = flows.find(p.flow);
    if (it == flows.end()) continue;
    OfflineFlow& f = it->second;
    f.ue = p.ue;
    f.direction = p.direction;
    if (rec.fate != PacketFate::Delivered || !p.rtp || !p.stamps.phy_deliver_ms) continue;
    if (p.kind != SubflowKind::Audio && !is_video(p.kind)) continue;
    ReceivedPacket rp;
    rp.kind = p.kind;
    rp.frame_id = p.rtp->frame_id;
    rp.rtp_timestamp = p.rtp->timestamp;
    rp.emit_ms = p.stamps.app_emit_ms.value_or(*p.stamps.phy_deliver_ms);
    rp.recv_ms = *p.stamps.phy_deliver_ms +
                 (p.direction == Direction::Uplink ? core_delay_ms : 0.0);
    f.received.push_back(rp);
    if (is_video(p.kind)) ++video_got[p.flow][rp.frame_id];
  }
  std::vector<OfflineFlow> out;
  for (auto& [id, f] : flows) {
    for (const auto& fr : f.truth.frames) {
      if (!fr.emitted) continue;
      const auto& got = video_got[id];
      auto g = got.find(fr.frame_id);
      f.frame_fully_delivered[fr.frame_id] = g != got.end() && g->second >= fr.packets;
    }
    out.push_back(std::move(f));
  }
  return out;
}

AlignmentInput alignment_input_for(const OfflineFlow& f, const ReceiverConfig& receiver,
                                   double video_rate_hz) {
  AlignmentInput in;
  std::map<uint64_t, size_t> index_of;  // frame id -> camera index
  for (const auto& fr : f.truth.frames) {
    index_of[fr.frame_id] = in.cam_pts.size();
    in.cam_pts.push_back(fr.camera_pts_ms);
  }
  RtpUnwrapper unwrap;
  std::optional<int64_t> first;
  for (const auto& fr : f.truth.frames) {
    if (!fr.emitted) continue;
    const int64_t ts = unwrap.unwrap(fr.rtp_timestamp);
    if (!first) first = ts;
    in.rtp_points.push_back(rtp_ts_to_ms(static_cast<double>(ts - *first), video_rate_hz));
  }
  std::vector<uint64_t> rendered;
  render_timeline(f.received, f.truth, receiver, nullptr, &rendered);
  for (uint64_t id : rendered)
    if (auto it = index_of.find(id); it != index_of.end()) in.rx_rendered.insert(it->second);
  return in;
}

}  // namespace streamguard
