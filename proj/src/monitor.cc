#include "streamguard/monitor.h"

#include <algorithm>
#include <limits>
#include <ostream>

#include "streamguard/csv_util.h"

namespace streamguard {

double Ewma::update(double raw) {
  value_ = value_ ? weight_ * raw + (1.0 - weight_) * *value_ : raw;
  return *value_;
}

void WindowSum::add(double t_ms, double v) {
  items_.emplace_back(t_ms, v);
  sum_ += v;
}

void WindowSum::evict(double now_ms) {
  while (!items_.empty() && items_.front().first <= now_ms - window_ms_) {
    sum_ -= items_.front().second;
    items_.pop_front();
  }
  if (items_.empty()) sum_ = 0.0;  // drop accumulated rounding
}

double WindowSum::sum(double now_ms) {
  evict(now_ms);
  return sum_;
}

size_t WindowSum::count(double now_ms) {
  evict(now_ms);
  return items_.size();
}

double UlDelayBaseline::observe(double arrival_ms, double rtp_ms) {
  const double offset = arrival_ms - rtp_ms;
  if (!baseline_ || offset < *baseline_) baseline_ = offset;
  return offset - *baseline_;
}

double BsrLoadEstimator::on_bsr(double t_ms, uint64_t reported_bytes) {
  const double a = static_cast<double>(reported_bytes) -
                   static_cast<double>(last_report_) +
                   static_cast<double>(transmitted_since_bsr_);
  last_report_ = reported_bytes;
  transmitted_since_bsr_ = 0;
  cumulative_ += a;
  window_.add(t_ms, a);
  return a;
}

double BsrLoadEstimator::load_bps(double now_ms) {
  return window_.sum(now_ms) * 8.0;  // bytes per 1 s window
}

// ----------------------------------------------------------- elephants

void BwHungryDetector::observe(const ConnectionKey& key, Direction dir,
                               uint32_t size_bytes, bool is_syn, double now_ms) {
  auto it = conns_.find(key);
  if (it == conns_.end()) {
    // Without a SYN the connection predates observation; age from now.
    it = conns_.emplace(key, Conn{}).first;
    it->second.born_ms = now_ms;
  } else if (is_syn && !it->second.hungry) {
    it->second = Conn{};
    it->second.born_ms = now_ms;
  }
  Conn& c = it->second;
  if (size_bytes >= p_.large_bytes) {
    auto& q = c.large[dir == Direction::Downlink ? 0 : 1];
    q.push_back(now_ms);
    while (!q.empty() && q.front() <= now_ms - p_.window_ms) q.pop_front();
    if (!c.burst_seen && q.size() >= p_.min_large_pkts) {
      c.burst_seen = true;
      c.burst_dir = dir;
    }
  }
  refresh(c, now_ms);
}

void BwHungryDetector::refresh(Conn& c, double now_ms) {
  if (!c.hungry && c.burst_seen && now_ms - c.born_ms >= p_.min_age_ms)
    c.hungry = true;
}

bool BwHungryDetector::is_hungry(const ConnectionKey& key, double now_ms) {
  auto it = conns_.find(key);
  if (it == conns_.end()) return false;
  refresh(it->second, now_ms);
  return it->second.hungry;
}

bool BwHungryDetector::ue_hungry(uint32_t ue, Direction dir, double now_ms) {
  bool any = false;
  for (auto it = conns_.lower_bound({ue, 0, 0});
       it != conns_.end() && it->first.ue == ue; ++it) {
    refresh(it->second, now_ms);
    any = any || (it->second.hungry && it->second.burst_dir == dir);
  }
  return any;
}

// ------------------------------------------------------------- monitor

double dl_frame_delay(std::span<const SimPacket> frame, uint32_t k1_slots,
                      double slot_ms) {
  double delivered = -std::numeric_limits<double>::infinity();
  double ingress = std::numeric_limits<double>::infinity();
  for (const auto& p : frame) {
    delivered = std::max(delivered, p.stamps.ack_ms.value() - k1_slots * slot_ms);
    ingress = std::min(ingress, p.stamps.sdap_ingress_ms.value());
  }
  return delivered - ingress;
}

namespace {

int load_slot(SubflowKind k) {
  switch (k) {
    case SubflowKind::Base:
    case SubflowKind::SmallWindowVideo: return 0;
    case SubflowKind::HighFpsEnhancement:
    case SubflowKind::LowFpsEnhancement: return 1;
    case SubflowKind::Audio: return 2;
    case SubflowKind::Probe: return 3;
    case SubflowKind::Control: return 4;
    case SubflowKind::Background: return 5;
  }
  return 5;
}

int media_layer(SubflowKind k) {
  if (k == SubflowKind::Base || k == SubflowKind::SmallWindowVideo) return 0;
  if (is_enhancement(k)) return 1;
  if (k == SubflowKind::Audio) return 2;
  return -1;
}

size_t dir_index(Direction d) { return d == Direction::Downlink ? 0 : 1; }

SubflowLoads to_loads(const std::array<double, 6>& v) {
  return {v[0], v[1], v[2], v[3], v[4], v[5]};
}

}  // namespace

Monitor::Monitor(MonitorConfig cfg, const DpiPlugin& dpi, size_t num_ues)
    : cfg_(cfg), dpi_(dpi), ues_(num_ues), bsr_(num_ues), hungry_(cfg.bw_hungry) {
  for (auto& u : ues_)
    for (auto& dir : u.smooth)
      for (auto& e : dir) e = Ewma(cfg_.ewma_weight);
}

Monitor::FlowTrack& Monitor::flow_track(const SimPacket& pkt, double now_ms) {
  auto [it, inserted] = flows_.try_emplace(pkt.flow);
  if (inserted) {
    it->second.ue = pkt.ue;
    it->second.dir = pkt.direction;
    it->second.first_seen_ms = now_ms;
    for (auto& e : it->second.smooth) e = Ewma(cfg_.ewma_weight);
  }
  return it->second;
}

void Monitor::account_load(const SimPacket& pkt, SubflowKind kind, double now_ms) {
  const int slot = load_slot(kind);
  ues_.at(pkt.ue).bytes[dir_index(pkt.direction)][slot].add(now_ms, pkt.size_bytes);
  if (kind != SubflowKind::Background)
    flow_track(pkt, now_ms).bytes[slot].add(now_ms, pkt.size_bytes);
}

void Monitor::on_dl_ingress(const SimPacket& pkt, double now_ms) {
  const SubflowKind kind = dpi_.classify(pkt);
  account_load(pkt, kind, now_ms);
  if (kind == SubflowKind::Background)
    hungry_.observe({pkt.ue, pkt.transport.dst_port, pkt.transport.src_port},
                    pkt.direction, pkt.size_bytes, pkt.transport.is_syn, now_ms);
}

void Monitor::on_ul_shim(const SimPacket& pkt, double now_ms) {
  const SubflowKind kind = dpi_.classify(pkt);
  // Non-Zoom uplink demand comes from the BSR path instead.
  if (kind != SubflowKind::Background) account_load(pkt, kind, now_ms);
}

void Monitor::add_media_packet(const SimPacket& pkt, SubflowKind kind, double) {
  const int layer = media_layer(kind);
  if (layer < 0 || !pkt.rtp) return;
  const StreamKey key{pkt.flow, pkt.direction, static_cast<uint8_t>(layer)};
  Stream& s = streams_[key];
  const int64_t ts = s.unwrap.unwrap(pkt.rtp->timestamp);
  auto& pf = s.pending[ts];
  pf.pkts.push_back(pkt);
  if (pkt.rtp->last_of_frame) pf.have_last = true;
  complete_frames(key, s);
  while (s.pending.size() > 64) s.pending.erase(s.pending.begin());
}

void Monitor::complete_frames(const StreamKey& key, Stream& s) {
  for (auto it = s.pending.begin(); it != s.pending.end();) {
    const PendingFrame& pf = it->second;
    bool complete = false;
    if (pf.have_last) {
      uint16_t marker = 0;
      for (const auto& p : pf.pkts)
        if (p.rtp->last_of_frame) marker = p.rtp->sequence;
      // Complete when every sequence number from the first seen up to the
      // marker is present.
      const size_t n = pf.pkts.size();
      std::vector<bool> seen(n, false);
      complete = true;
      for (const auto& p : pf.pkts) {
        const auto back = static_cast<uint16_t>(marker - p.rtp->sequence);
        if (back >= n || seen[back]) {
          complete = false;
          break;
        }
        seen[back] = true;
      }
    }
    if (!complete) {
      ++it;
      continue;
    }
    FrameSample fs;
    if (key.dir == Direction::Downlink) {
      fs.delay_ms = dl_frame_delay(pf.pkts, cfg_.k1_slots, cfg_.slot_ms);
      double t = 0.0;
      for (const auto& p : pf.pkts) t = std::max(t, *p.stamps.ack_ms);
      fs.t_ms = t;
    } else {
      double arrival = 0.0;
      for (const auto& p : pf.pkts) arrival = std::max(arrival, *p.stamps.phy_deliver_ms);
      const double rate = key.layer == 2 ? cfg_.audio_rate_hz : cfg_.video_rate_hz;
      const double rtp_ms = rtp_ts_to_ms(static_cast<double>(it->first), rate);
      fs.delay_ms = s.baseline.observe(arrival, rtp_ms);
      fs.t_ms = arrival;
    }
    s.samples.push_back(fs);
    it = s.pending.erase(it);
  }
}

void Monitor::on_dl_ack(const SimPacket& pkt) {
  add_media_packet(pkt, dpi_.classify(pkt), *pkt.stamps.ack_ms);
}

void Monitor::on_ul_arrival(const SimPacket& pkt, double now_ms) {
  const SubflowKind kind = dpi_.classify(pkt);
  if (kind == SubflowKind::Background) {
    hungry_.observe({pkt.ue, pkt.transport.src_port, pkt.transport.dst_port},
                    pkt.direction, pkt.size_bytes, pkt.transport.is_syn, now_ms);
    return;
  }
  add_media_packet(pkt, kind, now_ms);
}

void Monitor::on_bsr(uint32_t ue, const Bsr& bsr) {
  for (size_t g = 0; g < kNumClasses; ++g)
    bsr_.at(ue)[g].on_bsr(bsr.t_ms, bsr.queued_bytes[g]);
}

void Monitor::on_slot(const SlotResult& r, const Cell& cell) {
  for (const auto& u : r.per_ue)
    for (size_t g = 0; g < kNumClasses; ++g)
      if (u.bytes_ul[g] > 0) bsr_.at(u.ue)[g].on_transmitted(u.bytes_ul[g]);
  for (uint32_t i = 0; i < ues_.size() && i < cell.num_ues(); ++i) {
    const auto& st = cell.ue(i);
    auto& t = ues_[i];
    t.snr_sum += st.snr_db;
    t.cqi_sum += st.link.cqi;
    t.mcs_sum += st.link.mcs;
    t.bpp_sum += st.link.bits_per_prb;
    ++t.ran_samples;
  }
}

MonitorReport Monitor::snapshot(double now_ms) {
  MonitorReport rep;
  rep.interval = interval_++;
  rep.t_ms = now_ms;
  const double window_s = cfg_.media_window_ms / 1000.0;

  for (uint32_t i = 0; i < ues_.size(); ++i) {
    UeTrack& t = ues_[i];
    UeReport u = t.last;
    u.ue = i;
    if (t.ran_samples > 0) {
      u.snr_db = t.snr_sum / t.ran_samples;
      u.cqi = t.cqi_sum / t.ran_samples;
      u.mcs = t.mcs_sum / t.ran_samples;
      u.bits_per_prb = t.bpp_sum / t.ran_samples;
    }
    t.snr_sum = t.cqi_sum = t.mcs_sum = t.bpp_sum = 0.0;
    t.ran_samples = 0;

    double bsr_raw = 0.0;
    for (auto& est : bsr_[i]) bsr_raw += est.load_bps(now_ms) / window_s;
    for (size_t d = 0; d < 2; ++d) {
      std::array<double, 6> raw{};
      for (size_t k = 0; k < 6; ++k) raw[k] = t.bytes[d][k].sum(now_ms) * 8.0 / window_s;
      if (d == 1) {
        // Uplink background is whatever the BSRs show beyond the shim's Zoom bytes.
        const double zoom = raw[0] + raw[1] + raw[2] + raw[3] + raw[4];
        raw[5] = std::max(0.0, bsr_raw - zoom);
      }
      std::array<double, 6> sm{};
      for (size_t k = 0; k < 6; ++k) sm[k] = std::max(0.0, t.smooth[d][k].update(raw[k]));
      u.loads[d] = to_loads(sm);
    }
    u.ul_bsr_load_bps = std::max(0.0, bsr_raw);
    rep.ues.push_back(u);
    t.last = u;
  }
  for (auto& u : rep.ues) {
    u.bw_hungry[0] = hungry_.ue_hungry(u.ue, Direction::Downlink, now_ms);
    u.bw_hungry[1] = hungry_.ue_hungry(u.ue, Direction::Uplink, now_ms);
  }

  for (auto& [flow, ft] : flows_) {
    FlowReport fr;
    fr.flow = flow;
    fr.ue = ft.ue;
    fr.direction = ft.dir;
    fr.first_seen_ms = ft.first_seen_ms;
    std::array<double, 5> sm{};
    for (size_t k = 0; k < 5; ++k)
      sm[k] = std::max(0.0, ft.smooth[k].update(ft.bytes[k].sum(now_ms) * 8.0 / window_s));
    fr.loads = {sm[0], sm[1], sm[2], sm[3], sm[4], 0.0};

    double fps[3] = {0, 0, 0};
    double delay[3] = {0, 0, 0};
    for (uint8_t layer = 0; layer < 3; ++layer) {
      auto it = streams_.find({flow, ft.dir, layer});
      if (it == streams_.end()) continue;
      auto& samples = it->second.samples;
      // Keep the newest sample so an idle window reuses the last delay.
      while (samples.size() > 1 && samples.front().t_ms <= now_ms - cfg_.media_window_ms)
        samples.pop_front();
      size_t n = 0;
      double sum = 0.0;
      for (const auto& s : samples) {
        if (s.t_ms <= now_ms - cfg_.media_window_ms || s.t_ms > now_ms) continue;
        ++n;
        sum += s.delay_ms;
      }
      fps[layer] = n / window_s;
      if (n > 0) {
        delay[layer] = sum / n;
      } else if (!samples.empty()) {
        delay[layer] = std::max(samples.back().delay_ms, now_ms - samples.back().t_ms);
      }
    }
    fr.state = {fps[0], fps[1], delay[0], delay[1], delay[2]};
    rep.flows.push_back(fr);
  }
  return rep;
}

void write_monitor_csv_header(std::ostream& os) {
  os << "interval,t_ms,ue,flow,direction,base_fps,enh_fps,base_delay_ms,"
        "enh_delay_ms,audio_delay_ms,base_bps,enh_bps,audio_bps,probe_bps,"
        "ue_cqi,ue_mcs,ue_snr_db,ue_dl_bps,ue_ul_bps,ue_bw_hungry\n";
}

void write_monitor_csv_rows(std::ostream& os, const MonitorReport& r) {
  for (const auto& f : r.flows) {
    const UeReport* u = nullptr;
    for (const auto& x : r.ues)
      if (x.ue == f.ue) u = &x;
    const size_t d = dir_index(f.direction);
    os << r.interval << ',' << csv::fmt(r.t_ms) << ',' << f.ue << ',' << f.flow
       << ',' << to_string(f.direction) << ',' << csv::fmt(f.state.base_fps, 2)
       << ',' << csv::fmt(f.state.enh_fps, 2) << ','
       << csv::fmt(f.state.base_delay_ms, 2) << ','
       << csv::fmt(f.state.enh_delay_ms, 2) << ','
       << csv::fmt(f.state.audio_delay_ms, 2) << ',' << csv::fmt(f.loads.base, 0)
       << ',' << csv::fmt(f.loads.enh, 0) << ',' << csv::fmt(f.loads.audio, 0)
       << ',' << csv::fmt(f.loads.probe, 0) << ',';
    if (u) {
      os << csv::fmt(u->cqi, 2) << ',' << csv::fmt(u->mcs, 2) << ','
         << csv::fmt(u->snr_db, 2) << ',' << csv::fmt(u->loads[0].total(), 0)
         << ',' << csv::fmt(u->loads[1].total(), 0) << ','
         << (u->bw_hungry[d] ? 1 : 0);
    } else {
      os << ",,,,,";
    }
    os << '\n';
  }
}

}  // namespace streamguard
