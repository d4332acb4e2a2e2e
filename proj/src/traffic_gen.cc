#include "streamguard/traffic_gen.h"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "streamguard/csv_util.h"
#include "streamguard/dpi.h"

namespace streamguard {

PiecewiseLinear::PiecewiseLinear(std::vector<std::pair<double, double>> knots)
    : knots_(std::move(knots)) {
  if (knots_.empty()) throw std::invalid_argument("piecewise map needs knots");
  for (size_t i = 1; i < knots_.size(); ++i)
    if (!(knots_[i].first > knots_[i - 1].first))
      throw std::invalid_argument("piecewise map knots must increase in x");
}

double PiecewiseLinear::operator()(double x) const {
  if (knots_.empty()) return 1.0;
  if (x <= knots_.front().first) return knots_.front().second;
  if (x >= knots_.back().first) return knots_.back().second;
  auto hi = std::upper_bound(
      knots_.begin(), knots_.end(), x,
      [](double v, const std::pair<double, double>& k) { return v < k.first; });
  auto lo = hi - 1;
  const double w = (x - lo->first) / (hi->first - lo->first);
  return lo->second + w * (hi->second - lo->second);
}

bool PiecewiseLinear::non_decreasing() const {
  for (size_t i = 1; i < knots_.size(); ++i)
    if (knots_[i].second < knots_[i - 1].second) return false;
  return true;
}

bool PiecewiseLinear::non_increasing() const {
  for (size_t i = 1; i < knots_.size(); ++i)
    if (knots_[i].second > knots_[i - 1].second) return false;
  return true;
}

int resolution_for_multiplier(double m) {
  if (m >= 0.8) return 640;
  if (m >= 0.5) return 480;
  return 320;
}

// ---------------------------------------------------------------- Zoom

ZoomSource::ZoomSource(ZoomSourceConfig cfg, uint32_t flow, uint32_t ue,
                       Direction dir, uint16_t client_port, uint64_t seed)
    : cfg_(std::move(cfg)),
      flow_(flow),
      ue_(ue),
      dir_(dir),
      client_port_(client_port),
      rng_(seed) {
  if (!cfg_.rate_curve.non_decreasing())
    throw std::invalid_argument("rate_curve must be non-decreasing");
  if (cfg_.frame_interval_ms <= 0 || cfg_.audio_interval_ms <= 0)
    throw std::invalid_argument("media intervals must be positive");
  audio_ts_base_ = static_cast<uint32_t>(rng_());
  video_ts_base_ = static_cast<uint32_t>(rng_());
  seq_audio_ = static_cast<uint16_t>(rng_());
  seq_base_ = static_cast<uint16_t>(rng_());
  seq_enh_ = static_cast<uint16_t>(rng_());
  next_control_ms_ = cfg_.start_ms + cfg_.control_interval_ms / 2;
  next_sample_ms_ = cfg_.start_ms + 100.0;
}

uint32_t ZoomSource::jittered(const PacketSizing& s) {
  if (s.jitter_bytes == 0) return s.bytes;
  std::uniform_int_distribution<int> d(-static_cast<int>(s.jitter_bytes),
                                       static_cast<int>(s.jitter_bytes));
  return static_cast<uint32_t>(
      std::max<int>(static_cast<int>(kIpUdpHeaderBytes) + 16,
                    static_cast<int>(s.bytes) + d(rng_)));
}

SimPacket ZoomSource::make_packet(double now_ms, SubflowKind kind,
                                  uint32_t size) const {
  SimPacket p;
  p.ue = ue_;
  p.flow = flow_;
  p.direction = dir_;
  p.size_bytes = size;
  p.kind = kind;
  p.l7_type = canonical_l7_type(kind);
  if (dir_ == Direction::Downlink) {
    p.transport.src_port = kZoomMediaPort;
    p.transport.dst_port = client_port_;
  } else {
    p.transport.src_port = client_port_;
    p.transport.dst_port = kZoomMediaPort;
  }
  p.transport.is_large_data = size >= 1000;
  p.stamps.app_emit_ms = now_ms;
  return p;
}

void ZoomSource::emit_frame(double tick_ms, SubflowKind layer,
                            std::vector<SimPacket>& out) {
  const uint64_t frame_id = next_tick_idx_;
  const auto ts = static_cast<uint32_t>(
      video_ts_base_ +
      static_cast<uint32_t>(std::llround((tick_ms - cfg_.start_ms) *
                                         cfg_.video_sample_rate_hz / 1000.0)));
  const bool is_base = layer == SubflowKind::Base;
  const PacketSizing& sizing = is_base ? cfg_.base : cfg_.enh;
  uint16_t& seq = is_base ? seq_base_ : seq_enh_;
  for (uint32_t i = 0; i < sizing.packets; ++i) {
    SimPacket p = make_packet(tick_ms, layer, jittered(sizing));
    RtpHeader h;
    h.timestamp = ts;
    h.sequence = seq++;
    h.frame_id = frame_id;
    h.last_of_frame = (i + 1 == sizing.packets);
    h.extension_data = canonical_extension(layer);
    p.rtp = h;
    out.push_back(p);
  }
  FrameTruth& ft = truth_.frames.back();
  ft.emitted = true;
  ft.rtp_timestamp = ts;
  ft.layer = layer;
  ft.resolution = resolution_;
  ft.packets = sizing.packets;
  ft.emit_ms = tick_ms;
  if (!is_base) ft.ref_base_frame = last_base_frame_;
  if (is_base) last_base_frame_ = frame_id;
}

std::vector<SimPacket> ZoomSource::zoom_step(double now_ms,
                                             const ZoomFeedback& fb) {
  std::vector<SimPacket> out;
  if (now_ms < cfg_.start_ms) return out;

  const double ratio = std::clamp(fb.probe_delivery_ratio, 0.0, 1.0);
  multiplier_ = std::clamp(
      cfg_.rate_curve(ratio) * cfg_.congestion_backoff(fb.recent_delay_ms),
      0.0, 1.0);
  resolution_ = resolution_for_multiplier(multiplier_);

  // Audio: one packet per sample interval.
  while (cfg_.start_ms + next_audio_idx_ * cfg_.audio_interval_ms <=
         now_ms + 1e-9) {
    SimPacket p = make_packet(now_ms, SubflowKind::Audio, cfg_.audio_pkt_bytes);
    RtpHeader h;
    h.timestamp = static_cast<uint32_t>(
        audio_ts_base_ +
        static_cast<uint32_t>(std::llround(next_audio_idx_ * cfg_.audio_interval_ms *
                                           cfg_.audio_sample_rate_hz / 1000.0)));
    h.sequence = seq_audio_++;
    h.frame_id = next_audio_idx_;
    h.last_of_frame = true;
    p.rtp = h;
    out.push_back(p);
    ++next_audio_idx_;
  }

  // Video on the frame clock. Whole enhancement frames go before base fps.
  const double total_target = cfg_.base_fps_target + cfg_.enh_fps_target;
  const double total_fps = total_target * multiplier_;
  const double base_fps = std::min(cfg_.base_fps_target, total_fps);
  const double enh_fps = std::clamp(total_fps - cfg_.base_fps_target, 0.0,
                                    cfg_.enh_fps_target);
  while (true) {
    const double tick_ms = cfg_.start_ms + next_tick_idx_ * cfg_.frame_interval_ms;
    if (tick_ms > now_ms + 1e-9) break;
    FrameTruth ft;
    ft.frame_id = next_tick_idx_;
    ft.camera_pts_ms = tick_ms - cfg_.capture_lag_ms;
    truth_.frames.push_back(ft);

    const double dt_s = cfg_.frame_interval_ms / 1000.0;
    base_credit_ = std::min(base_credit_ + base_fps * dt_s, 2.0);
    enh_credit_ = std::min(enh_credit_ + enh_fps * dt_s, 2.0);
    if (base_credit_ >= 1.0) {
      base_credit_ -= 1.0;
      emit_frame(tick_ms, SubflowKind::Base, out);
    } else if (enh_credit_ >= 1.0 && last_base_frame_) {
      enh_credit_ -= 1.0;
      emit_frame(tick_ms, cfg_.enh_kind, out);
    }
    ++next_tick_idx_;
  }

  // Probing: dense during the initial probe phase, sparse afterwards.
  {
    const bool initial = now_ms - cfg_.start_ms < cfg_.probe_duration_ms;
    const double pps = initial ? cfg_.probe_rate_pps : cfg_.probe_steady_rate_pps;
    const double dt = last_step_ms_ ? now_ms - *last_step_ms_ : 1.0;
    probe_credit_ += pps * dt / 1000.0;
    while (probe_credit_ >= 1.0) {
      probe_credit_ -= 1.0;
      out.push_back(make_packet(now_ms, SubflowKind::Probe, cfg_.probe_pkt_bytes));
    }
  }

  while (now_ms >= next_control_ms_) {
    out.push_back(make_packet(now_ms, SubflowKind::Control, cfg_.control_pkt_bytes));
    next_control_ms_ += cfg_.control_interval_ms;
  }

  last_step_ms_ = now_ms;
  for (const auto& p : out) {
    bytes_sent_ += p.size_bytes;
    bytes_in_sample_ += p.size_bytes;
  }
  while (now_ms >= next_sample_ms_) {
    truth_.rates.push_back(
        {next_sample_ms_, multiplier_, bytes_in_sample_ * 8.0 / 0.1});
    bytes_in_sample_ = 0;
    next_sample_ms_ += 100.0;
  }
  return out;
}

void write_ground_truth_csv(std::ostream& os, uint32_t flow,
                            const GroundTruthLog& log, bool header) {
  if (header)
    os << "flow,frame_id,camera_pts_ms,emitted,rtp_timestamp,layer,resolution,"
          "ref_base_frame,packets,emit_ms\n";
  for (const auto& f : log.frames) {
    os << flow << ',' << f.frame_id << ',' << csv::fmt(f.camera_pts_ms) << ','
       << (f.emitted ? 1 : 0) << ',' << f.rtp_timestamp << ','
       << (f.emitted ? to_string(f.layer) : std::string_view("none")) << ','
       << f.resolution << ',';
    if (f.ref_base_frame) os << *f.ref_base_frame;
    os << ',' << f.packets << ',' << csv::fmt(f.emit_ms) << '\n';
  }
}

void write_rate_series_csv(std::ostream& os, uint32_t flow,
                           const GroundTruthLog& log, bool header) {
  if (header) os << "flow,t_ms,multiplier,send_rate_bps\n";
  for (const auto& r : log.rates)
    os << flow << ',' << csv::fmt(r.t_ms) << ',' << csv::fmt(r.multiplier, 4)
       << ',' << csv::fmt(r.send_rate_bps, 1) << '\n';
}

std::vector<GroundTruthRow> read_ground_truth_csv(std::istream& is) {
  csv::Reader r(is);
  std::vector<GroundTruthRow> out;
  while (r.next()) {
    GroundTruthRow row;
    row.flow = static_cast<uint32_t>(r.integer("flow"));
    FrameTruth& f = row.frame;
    f.frame_id = static_cast<uint64_t>(r.integer("frame_id"));
    f.camera_pts_ms = r.num("camera_pts_ms");
    f.emitted = r.integer("emitted") != 0;
    f.rtp_timestamp = static_cast<uint32_t>(r.integer("rtp_timestamp"));
    if (f.emitted) f.layer = parse_subflow_kind(r.get("layer"));
    f.resolution = static_cast<int>(r.integer("resolution"));
    if (!r.get("ref_base_frame").empty())
      f.ref_base_frame = static_cast<uint64_t>(r.integer("ref_base_frame"));
    f.packets = static_cast<uint32_t>(r.integer("packets"));
    f.emit_ms = r.num("emit_ms");
    out.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------- background

BackgroundSource::BackgroundSource(BackgroundSourceConfig cfg, uint32_t flow,
                                   uint32_t ue, Direction dir,
                                   uint16_t client_port, uint64_t seed)
    : cfg_(std::move(cfg)),
      flow_(flow),
      ue_(ue),
      dir_(dir),
      port_(client_port),
      rng_(seed),
      cwnd_(cfg_.initial_window),
      next_burst_ms_(cfg_.start_ms),
      burst_port_(client_port) {
  if (cfg_.pkt_bytes == 0) throw std::invalid_argument("packet size must be > 0");
  if (cfg_.burst_min_pkts > cfg_.burst_max_pkts)
    throw std::invalid_argument("burst_min_pkts > burst_max_pkts");
}

SimPacket BackgroundSource::make_packet(double now_ms, bool syn) {
  SimPacket p;
  p.ue = ue_;
  p.flow = flow_;
  p.direction = dir_;
  p.size_bytes = cfg_.pkt_bytes;
  p.kind = SubflowKind::Background;
  const uint16_t client =
      cfg_.model == BackgroundModel::LightWeb ? burst_port_ : port_;
  if (dir_ == Direction::Downlink) {
    p.transport.src_port = 443;
    p.transport.dst_port = client;
  } else {
    p.transport.src_port = client;
    p.transport.dst_port = 443;
  }
  p.transport.is_syn = syn;
  p.transport.is_large_data = cfg_.pkt_bytes >= 1000;
  p.stamps.app_emit_ms = now_ms;
  bytes_sent_ += p.size_bytes;
  return p;
}

void BackgroundSource::on_feedback(double now_ms, const BackgroundFeedback& fb) {
  if (fb.rtt_sample_ms) srtt_ms_ = 0.875 * srtt_ms_ + 0.125 * *fb.rtt_sample_ms;

  const uint64_t total = fb.acked_bytes + ack_byte_remainder_;
  const uint64_t acked = total / cfg_.pkt_bytes;
  ack_byte_remainder_ = total % cfg_.pkt_bytes;
  in_flight_ -= std::min<uint64_t>(acked, in_flight_);
  in_flight_ -= std::min<uint64_t>(fb.loss_events, in_flight_);

  if (fb.loss_events > 0 && now_ms >= recovery_until_ms_) {
    cwnd_ = std::max(cfg_.min_window, cwnd_ * cfg_.decrease_factor);
    acked_in_window_ = 0;
    recovery_until_ms_ = now_ms + srtt_ms_;
    return;
  }
  acked_in_window_ += acked;
  // One additive step per full window of acknowledgements.
  while (true) {
    const auto w = static_cast<uint64_t>(std::max(1.0, std::floor(cwnd_)));
    if (acked_in_window_ < w) break;
    acked_in_window_ -= w;
    cwnd_ += cfg_.additive_increase;
  }
}

std::vector<SimPacket> BackgroundSource::background_step(
    double now_ms, const BackgroundFeedback& fb) {
  std::vector<SimPacket> out;
  if (now_ms < cfg_.start_ms) return out;

  if (cfg_.model == BackgroundModel::BulkAimd) {
    on_feedback(now_ms, fb);
    while (static_cast<double>(in_flight_) < std::floor(cwnd_)) {
      out.push_back(make_packet(now_ms, !connected_));
      connected_ = true;
      ++in_flight_;
    }
    return out;
  }

  // LightWeb: a short connection per burst, far below elephant volume.
  if (now_ms >= next_burst_ms_) {
    std::uniform_int_distribution<uint32_t> n(cfg_.burst_min_pkts,
                                              cfg_.burst_max_pkts);
    std::uniform_real_distribution<double> gap(cfg_.burst_gap_min_ms,
                                               cfg_.burst_gap_max_ms);
    const uint32_t count = n(rng_);
    ++burst_port_;
    for (uint32_t i = 0; i < count; ++i) out.push_back(make_packet(now_ms, i == 0));
    next_burst_ms_ = now_ms + gap(rng_);
  }
  return out;
}

}  // namespace streamguard
