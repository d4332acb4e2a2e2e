#include "streamguard/ran_sim.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace streamguard {

std::vector<McsRow> default_mcs_table() {
  // CQI spectral efficiency (bits per RE) and the SNR at which each CQI
  // becomes usable. 168 REs per PRB per slot.
  static constexpr double kEff[15] = {0.1523, 0.2344, 0.3770, 0.6016, 0.8770,
                                      1.1758, 1.4766, 1.9141, 2.4063, 2.7305,
                                      3.3223, 3.9023, 4.5234, 5.1152, 5.5547};
  static constexpr double kSnr[15] = {-6.7, -4.7, -2.3, 0.2,  2.4,
                                      4.3,  5.9,  8.1,  10.3, 11.7,
                                      14.1, 16.3, 18.7, 21.0, 22.7};
  std::vector<McsRow> t;
  for (int i = 0; i < 15; ++i) {
    McsRow r;
    r.min_snr_db = kSnr[i];
    r.cqi = i + 1;
    r.mcs = std::min(28, 2 * i);
    r.bits_per_prb = static_cast<uint32_t>(std::lround(kEff[i] * 168.0));
    t.push_back(r);
  }
  return t;
}

void validate_mcs_table(std::span<const McsRow> table) {
  if (table.empty()) throw std::invalid_argument("mcs table is empty");
  for (size_t i = 1; i < table.size(); ++i) {
    if (!(table[i].min_snr_db > table[i - 1].min_snr_db))
      throw std::invalid_argument("mcs table: min_snr_db must strictly increase");
    if (!(table[i].bits_per_prb > table[i - 1].bits_per_prb))
      throw std::invalid_argument("mcs table: bits_per_prb must strictly increase");
  }
  if (table.front().bits_per_prb == 0)
    throw std::invalid_argument("mcs table: bits_per_prb must be positive");
}

LinkState snr_to_link(std::span<const McsRow> table, double snr_db) {
  if (table.empty()) throw std::invalid_argument("snr_to_link: empty mcs table");
  if (!std::isfinite(snr_db)) throw std::invalid_argument("snr_to_link: non-finite snr");
  const McsRow* row = &table.front();
  for (const auto& r : table)
    if (r.min_snr_db <= snr_db) row = &r;
  return {row->cqi, row->mcs, row->bits_per_prb};
}

uint64_t cap_bsr(uint64_t backlog, uint64_t cap) { return std::min(backlog, cap); }

uint64_t prbs_for_bytes(uint64_t bytes, uint32_t bits_per_prb) {
  if (bits_per_prb == 0) return 0;
  return (bytes * 8 + bits_per_prb - 1) / bits_per_prb;
}

std::vector<uint32_t> allocate_round_robin(std::span<const uint64_t> demand,
                                           uint32_t capacity, size_t start) {
  std::vector<uint32_t> out(demand.size(), 0);
  const size_t n = demand.size();
  uint32_t left = capacity;
  // Water-filling: equal shares among UEs still wanting PRBs; the indivisible
  // remainder goes one PRB each in rotation order from `start`.
  while (left > 0) {
    std::vector<size_t> active;
    for (size_t k = 0; k < n; ++k) {
      const size_t i = (start + k) % n;
      if (demand[i] > out[i]) active.push_back(i);
    }
    if (active.empty()) break;
    const uint32_t share = left / static_cast<uint32_t>(active.size());
    if (share == 0) {
      for (size_t i : active) {
        if (left == 0) break;
        ++out[i];
        --left;
      }
      break;
    }
    for (size_t i : active) {
      const auto give = static_cast<uint32_t>(std::min<uint64_t>(demand[i] - out[i], share));
      out[i] += give;
      left -= give;
    }
  }
  return out;
}

std::vector<uint64_t> simulate_interval_allocation(
    std::span<const uint64_t> demand_prbs, uint32_t prbs_per_slot,
    uint32_t slots) {
  const size_t n = demand_prbs.size();
  std::vector<uint64_t> left(demand_prbs.begin(), demand_prbs.end());
  std::vector<uint64_t> total(n, 0);
  if (n == 0) return total;
  for (uint32_t s = 0; s < slots; ++s) {
    const auto alloc = allocate_round_robin(left, prbs_per_slot, s % n);
    bool any = false;
    for (size_t i = 0; i < n; ++i) {
      if (alloc[i] == 0) continue;
      any = true;
      total[i] += alloc[i];
      if (left[i] != kUnboundedDemand) left[i] -= alloc[i];
    }
    if (!any) break;
  }
  return total;
}

std::vector<uint32_t> allocate_by_metric(std::span<const uint64_t> demand,
                                         std::span<const double> metric,
                                         uint32_t capacity) {
  std::vector<size_t> order(demand.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return metric[a] > metric[b]; });
  std::vector<uint32_t> out(demand.size(), 0);
  uint32_t left = capacity;
  for (size_t i : order) {
    if (left == 0) break;
    const auto give = static_cast<uint32_t>(std::min<uint64_t>(demand[i], left));
    out[i] = give;
    left -= give;
  }
  return out;
}

Cell::Cell(CellConfig cfg, uint64_t seed) : cfg_(std::move(cfg)), rng_(seed) {
  validate_mcs_table(cfg_.mcs_table);
  if (cfg_.prbs_per_slot == 0) throw std::invalid_argument("prbs_per_slot must be > 0");
  if (!(cfg_.slot_ms > 0)) throw std::invalid_argument("slot_ms must be > 0");
  if (cfg_.bsr_period_slots == 0) throw std::invalid_argument("bsr period must be > 0");
}

uint32_t Cell::add_ue(double snr_db) {
  UeRadioState s;
  s.snr_db = snr_db;
  s.link = snr_to_link(cfg_.mcs_table, snr_db);
  ues_.push_back(std::move(s));
  return static_cast<uint32_t>(ues_.size() - 1);
}

void Cell::set_snr(uint32_t ue, double snr_db) {
  auto& s = ues_.at(ue);
  s.snr_db = snr_db;
  s.link = snr_to_link(cfg_.mcs_table, snr_db);
}

EnqueueOutcome Cell::enqueue(std::array<ClassQueue, kNumClasses>& q,
                             SimPacket pkt, const PriorityClass& pc,
                             double now_ms) {
  pkt.stamps.sdap_ingress_ms = now_ms;
  pkt.priority = pc;
  ++counters_.enqueued;
  bool drop = pc.drop == DropDirective::Drop;
  if (pc.drop == DropDirective::DropWithProbability && pc.drop_probability > 0.0) {
    std::bernoulli_distribution coin(std::min(1.0, pc.drop_probability));
    drop = coin(rng_);
  }
  if (drop) {
    ++counters_.dropped_directive;
    return {PacketFate::DroppedByDirective, std::move(pkt)};
  }
  auto& cq = q[class_index(pc.level)];
  if (cq.bytes + pkt.size_bytes > cfg_.queue_limit_bytes) {
    ++counters_.dropped_overflow;
    return {PacketFate::DroppedOverflow, std::move(pkt)};
  }
  cq.bytes += pkt.size_bytes;
  cq.fifo.push_back({pkt, pkt.size_bytes});
  return {PacketFate::Queued, std::move(pkt)};
}

EnqueueOutcome Cell::enqueue_downlink(SimPacket pkt, const PriorityClass& pc,
                                      double now_ms) {
  if (pkt.direction != Direction::Downlink)
    throw std::invalid_argument("enqueue_downlink: uplink packet");
  return enqueue(ues_.at(pkt.ue).dl, std::move(pkt), pc, now_ms);
}

EnqueueOutcome Cell::enqueue_uplink(SimPacket pkt, const PriorityClass& pc,
                                    double now_ms) {
  if (pkt.direction != Direction::Uplink)
    throw std::invalid_argument("enqueue_uplink: downlink packet");
  return enqueue(ues_.at(pkt.ue).ul, std::move(pkt), pc, now_ms);
}

Bsr Cell::emit_bsr(uint32_t ue, double now_ms) {
  auto& s = ues_.at(ue);
  Bsr b;
  b.slot = slot_;
  b.t_ms = now_ms;
  for (size_t c = 0; c < kNumClasses; ++c)
    b.queued_bytes[c] = cap_bsr(s.ul[c].bytes, cfg_.bsr_cap_bytes);
  s.last_bsr = b;
  s.ul_granted_since_bsr = {};
  return b;
}

std::vector<uint32_t> Cell::allocate(std::span<const uint64_t> demand,
                                     uint32_t capacity, Direction dir,
                                     size_t cls) {
  const size_t d = dir == Direction::Downlink ? 0 : 1;
  if (cfg_.policy == SchedulerPolicy::RoundRobin) {
    const size_t start = ues_.empty() ? 0 : rr_next_[d][cls] % ues_.size();
    return allocate_round_robin(demand, capacity, start);
  }
  std::vector<double> metric(ues_.size());
  for (size_t i = 0; i < ues_.size(); ++i)
    metric[i] = ues_[i].link.bits_per_prb / std::max(1e-9, ues_[i].pf_avg_bits[d]);
  return allocate_by_metric(demand, metric, capacity);
}

uint64_t Cell::serve(ClassQueue& q, uint64_t budget, double now_ms,
                     Direction dir, SlotResult& out) {
  uint64_t sent = 0;
  while (budget > 0 && !q.fifo.empty()) {
    auto& head = q.fifo.front();
    const uint64_t take = std::min<uint64_t>(head.remaining, budget);
    head.remaining -= static_cast<uint32_t>(take);
    budget -= take;
    sent += take;
    q.bytes -= take;
    if (head.remaining > 0) break;
    SimPacket p = std::move(head.pkt);
    q.fifo.pop_front();
    bool lost = false;
    if (cfg_.air_loss_probability > 0.0) {
      std::bernoulli_distribution coin(cfg_.air_loss_probability);
      lost = coin(rng_);
    }
    if (lost) {
      ++counters_.lost_on_air;
      out.lost.push_back(std::move(p));
      continue;
    }
    ++counters_.delivered;
    p.stamps.phy_deliver_ms = now_ms;
    if (dir == Direction::Downlink) {
      p.stamps.ack_ms = now_ms + cfg_.k1_slots * cfg_.slot_ms;
      out.dl_delivered.push_back(std::move(p));
    } else {
      out.ul_delivered.push_back(std::move(p));
    }
  }
  return sent;
}

SlotResult Cell::schedule_slot(double now_ms) {
  SlotResult out;
  out.slot = slot_;
  const size_t n = ues_.size();
  out.per_ue.resize(n);
  for (size_t i = 0; i < n; ++i) out.per_ue[i].ue = static_cast<uint32_t>(i);

  // Downlink: strict priority across classes, policy within a class.
  {
    uint32_t left = cfg_.prbs_per_slot;
    std::vector<uint64_t> served_bits(n, 0);
    for (size_t c = 0; c < kNumClasses; ++c) {
      std::vector<uint64_t> demand(n);
      for (size_t i = 0; i < n; ++i)
        demand[i] = prbs_for_bytes(ues_[i].dl[c].bytes, ues_[i].link.bits_per_prb);
      const auto alloc = allocate(demand, left, Direction::Downlink, c);
      bool any = false;
      for (size_t i = 0; i < n; ++i) {
        if (alloc[i] == 0) continue;
        any = true;
        const uint64_t budget = uint64_t{alloc[i]} * ues_[i].link.bits_per_prb / 8;
        const uint64_t sent = serve(ues_[i].dl[c], budget, now_ms,
                                    Direction::Downlink, out);
        out.per_ue[i].prbs_dl[c] = alloc[i];
        out.per_ue[i].bytes_dl[c] = sent;
        served_bits[i] += sent * 8;
        left -= alloc[i];
        out.prbs_used_dl += alloc[i];
      }
      if (any) ++rr_next_[0][c];
      if (c == 1 && any) out.low_served_dl = true;
    }
    for (size_t i = 0; i < n; ++i) {
      auto& avg = ues_[i].pf_avg_bits[0];
      avg = cfg_.pf_ewma_weight * avg + (1.0 - cfg_.pf_ewma_weight) * served_bits[i];
      if (ues_[i].dl[1].bytes > 0) out.low_backlog_dl = true;
    }
  }

  // Uplink: grants follow BSR-reported backlog; the UE fills each grant
  // from its High group first.
  {
    uint32_t left = cfg_.prbs_per_slot;
    std::vector<uint64_t> grant_bytes(n, 0);
    std::vector<std::array<uint32_t, kNumClasses>> prbs(n);
    for (size_t c = 0; c < kNumClasses; ++c) {
      std::vector<uint64_t> demand(n);
      for (size_t i = 0; i < n; ++i) {
        const auto& s = ues_[i];
        const uint64_t reported = s.last_bsr.queued_bytes[c];
        const uint64_t pending =
            reported > s.ul_granted_since_bsr[c] ? reported - s.ul_granted_since_bsr[c] : 0;
        demand[i] = prbs_for_bytes(pending, s.link.bits_per_prb);
      }
      const auto alloc = allocate(demand, left, Direction::Uplink, c);
      bool any = false;
      for (size_t i = 0; i < n; ++i) {
        if (alloc[i] == 0) continue;
        any = true;
        const uint64_t bytes = uint64_t{alloc[i]} * ues_[i].link.bits_per_prb / 8;
        ues_[i].ul_granted_since_bsr[c] += bytes;
        grant_bytes[i] += bytes;
        prbs[i][c] = alloc[i];
        left -= alloc[i];
        out.prbs_used_ul += alloc[i];
      }
      if (any) ++rr_next_[1][c];
    }
    for (size_t i = 0; i < n; ++i) {
      out.per_ue[i].prbs_ul = prbs[i];
      uint64_t budget = grant_bytes[i];
      for (size_t c = 0; c < kNumClasses && budget > 0; ++c) {
        const uint64_t sent = serve(ues_[i].ul[c], budget, now_ms, Direction::Uplink, out);
        out.per_ue[i].bytes_ul[c] = sent;
        budget -= sent;
      }
      auto& avg = ues_[i].pf_avg_bits[1];
      avg = cfg_.pf_ewma_weight * avg +
            (1.0 - cfg_.pf_ewma_weight) * (grant_bytes[i] - budget) * 8.0;
      if (ues_[i].ul[1].bytes > 0) out.low_backlog_ul = true;
    }
  }

  ++slot_;
  return out;
}

uint64_t Cell::queued_packets() const {
  uint64_t n = 0;
  for (const auto& s : ues_)
    for (size_t c = 0; c < kNumClasses; ++c) n += s.dl[c].fifo.size() + s.ul[c].fifo.size();
  return n;
}

uint64_t Cell::dl_backlog_bytes(uint32_t ue, Priority p) const {
  return ues_.at(ue).dl[class_index(p)].bytes;
}

uint64_t Cell::ul_backlog_bytes(uint32_t ue, Priority p) const {
  return ues_.at(ue).ul[class_index(p)].bytes;
}

void write_prb_log_header(std::ostream& os) {
  os << "slot,ue,dl_prbs_high,dl_prbs_low,ul_prbs_high,ul_prbs_low,"
        "dl_bytes_high,dl_bytes_low,ul_bytes_high,ul_bytes_low\n";
}

void write_prb_log_rows(std::ostream& os, const SlotResult& r) {
  for (const auto& u : r.per_ue) {
    if (u.prbs_dl[0] + u.prbs_dl[1] + u.prbs_ul[0] + u.prbs_ul[1] == 0) continue;
    os << r.slot << ',' << u.ue << ',' << u.prbs_dl[0] << ',' << u.prbs_dl[1]
       << ',' << u.prbs_ul[0] << ',' << u.prbs_ul[1] << ',' << u.bytes_dl[0]
       << ',' << u.bytes_dl[1] << ',' << u.bytes_ul[0] << ',' << u.bytes_ul[1]
       << '\n';
  }
}

}  // namespace streamguard
