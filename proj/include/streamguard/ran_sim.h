#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "streamguard/packet_model.h"

namespace streamguard {

struct McsRow {
  double min_snr_db = 0.0;
  int cqi = 0;
  int mcs = 0;
  uint32_t bits_per_prb = 0;
};

// 15 rows, CQI 1..15 spectral efficiencies over 12 subcarriers x 14 symbols.
std::vector<McsRow> default_mcs_table();

struct LinkState {
  int cqi = 0;
  int mcs = 0;
  uint32_t bits_per_prb = 0;
};

// Throws std::invalid_argument for an empty table or non-finite snr.
LinkState snr_to_link(std::span<const McsRow> table, double snr_db);
// Throws std::invalid_argument unless both columns are strictly increasing.
void validate_mcs_table(std::span<const McsRow> table);

enum class SchedulerPolicy : uint8_t { RoundRobin, ProportionalFair };

struct CellConfig {
  uint32_t prbs_per_slot = 79;
  double slot_ms = 1.0;
  uint32_t k1_slots = 4;
  std::vector<McsRow> mcs_table = default_mcs_table();
  SchedulerPolicy policy = SchedulerPolicy::RoundRobin;
  uint32_t bsr_period_slots = 5;
  uint64_t bsr_cap_bytes = 150000;
  uint64_t queue_limit_bytes = 300000;  // per UE, per class, per direction
  double air_loss_probability = 0.0;
  double pf_ewma_weight = 0.99;
};

inline constexpr size_t kNumClasses = 2;
inline size_t class_index(Priority p) { return p == Priority::High ? 0 : 1; }

// Per-group modem backlog as reported to the gNB.
struct Bsr {
  uint64_t slot = 0;
  double t_ms = 0.0;
  std::array<uint64_t, kNumClasses> queued_bytes{};
};

uint64_t cap_bsr(uint64_t backlog, uint64_t cap);

struct QueuedPacket {
  SimPacket pkt;
  uint32_t remaining = 0;
};

struct ClassQueue {
  std::deque<QueuedPacket> fifo;
  uint64_t bytes = 0;
};

struct UeRadioState {
  double snr_db = 0.0;
  LinkState link;
  std::array<ClassQueue, kNumClasses> dl;
  std::array<ClassQueue, kNumClasses> ul;  // modem logical-channel groups
  Bsr last_bsr;
  std::array<uint64_t, kNumClasses> ul_granted_since_bsr{};
  std::array<double, 2> pf_avg_bits{1.0, 1.0};  // per direction
};

// Round-robin PRB split: backlogged UEs get equal shares (capped at their
// demand); leftover single PRBs go out in index order from `start`.
std::vector<uint32_t> allocate_round_robin(std::span<const uint64_t> demand_prbs,
                                           uint32_t capacity, size_t start);
// Proportional-fair: visits UEs by descending metric (ties by index).
std::vector<uint32_t> allocate_by_metric(std::span<const uint64_t> demand_prbs,
                                         std::span<const double> metric,
                                         uint32_t capacity);

uint64_t prbs_for_bytes(uint64_t bytes, uint32_t bits_per_prb);

inline constexpr uint64_t kUnboundedDemand = UINT64_MAX;

// Side run of the default scheduler (single class, round-robin rotating per
// slot) over `slots` slots. Returns total PRBs granted per UE.
std::vector<uint64_t> simulate_interval_allocation(
    std::span<const uint64_t> demand_prbs, uint32_t prbs_per_slot,
    uint32_t slots);

struct EnqueueOutcome {
  PacketFate fate = PacketFate::Queued;
  SimPacket packet;  // stamped copy
};

struct UeSlotService {
  uint32_t ue = 0;
  std::array<uint32_t, kNumClasses> prbs_dl{};
  std::array<uint32_t, kNumClasses> prbs_ul{};
  std::array<uint64_t, kNumClasses> bytes_dl{};
  std::array<uint64_t, kNumClasses> bytes_ul{};
};

struct SlotResult {
  uint64_t slot = 0;
  std::vector<SimPacket> dl_delivered;
  std::vector<SimPacket> ul_delivered;
  std::vector<SimPacket> lost;  // lost on air
  std::vector<UeSlotService> per_ue;
  uint32_t prbs_used_dl = 0;
  uint32_t prbs_used_ul = 0;
  bool low_served_dl = false;
  bool low_backlog_dl = false;  // after service
  bool low_backlog_ul = false;
};

struct CellCounters {
  uint64_t enqueued = 0;
  uint64_t delivered = 0;
  uint64_t dropped_directive = 0;
  uint64_t dropped_overflow = 0;
  uint64_t lost_on_air = 0;
};

// Slot-driven single cell with two priority classes per UE and direction.
class Cell {
 public:
  Cell(CellConfig cfg, uint64_t seed);

  uint32_t add_ue(double snr_db);
  void set_snr(uint32_t ue, double snr_db);

  EnqueueOutcome enqueue_downlink(SimPacket pkt, const PriorityClass& pc,
                                  double now_ms);
  EnqueueOutcome enqueue_uplink(SimPacket pkt, const PriorityClass& pc,
                                double now_ms);
  Bsr emit_bsr(uint32_t ue, double now_ms);
  SlotResult schedule_slot(double now_ms);

  const CellConfig& config() const { return cfg_; }
  const UeRadioState& ue(uint32_t id) const { return ues_.at(id); }
  size_t num_ues() const { return ues_.size(); }
  uint64_t queued_packets() const;
  uint64_t dl_backlog_bytes(uint32_t ue, Priority p) const;
  uint64_t ul_backlog_bytes(uint32_t ue, Priority p) const;
  const CellCounters& counters() const { return counters_; }
  uint64_t slot() const { return slot_; }

 private:
  EnqueueOutcome enqueue(std::array<ClassQueue, kNumClasses>& q, SimPacket pkt,
                         const PriorityClass& pc, double now_ms);
  std::vector<uint32_t> allocate(std::span<const uint64_t> demand,
                                 uint32_t capacity, Direction dir, size_t cls);
  // Drains up to budget bytes from one queue; completed packets are appended.
  uint64_t serve(ClassQueue& q, uint64_t budget, double now_ms, Direction dir,
                 SlotResult& out);

  CellConfig cfg_;
  std::mt19937_64 rng_;
  std::vector<UeRadioState> ues_;
  std::array<std::array<size_t, kNumClasses>, 2> rr_next_{};
  uint64_t slot_ = 0;
  CellCounters counters_;
};

void write_prb_log_header(std::ostream& os);
void write_prb_log_rows(std::ostream& os, const SlotResult& r);

}  // namespace streamguard
