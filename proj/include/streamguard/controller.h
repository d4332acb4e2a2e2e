#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "streamguard/monitor.h"
#include "streamguard/packet_model.h"

namespace streamguard {

// Which Zoom subflows get the high-priority class.
struct Action {
  bool base = false;
  bool enh = false;
  bool audio = false;

  int count() const { return int{base} + int{enh} + int{audio}; }
  std::string str() const;  // "(1,0,1)"
  friend bool operator==(const Action&, const Action&) = default;
};

inline constexpr Action kPrioritizeAll{true, true, true};
inline constexpr Action kBaseAndAudio{true, false, true};
inline constexpr Action kNoPriority{false, false, false};

// Accepts "(1,0,1)", "1,0,1" or "101". Throws std::invalid_argument.
Action parse_action(const std::string& s);
std::vector<Action> all_actions();
// Orders actions by number of prioritized subflows, then lexicographically.
bool action_before(const Action& a, const Action& b);

// Estimated Zoom QoE in [0,1] after applying `a` on top of the current state.
double qoe_gain(const Action& a, const FlowState& s);

// ------------------------------------------------------------- fairness

struct FairnessUe {
  double bits_per_prb = 1.0;
  double total_load_bps = 0.0;
  double nonzoom_load_bps = 0.0;
  bool bw_hungry = false;
};

struct SlackEstimate {
  double total_prb = 0.0;
  double nonzoom_prb = 0.0;  // U
  double slack_prb = 0.0;    // S = total - U
  std::vector<uint64_t> default_prbs;
};

struct IntervalGeometry {
  uint32_t prbs_per_slot = 79;
  double slot_ms = 1.0;
  double interval_ms = 50.0;
  uint32_t slots() const;
  double total_prb() const { return double(prbs_per_slot) * slots(); }
};

// PRBs needed to carry `load_bps` for one interval at the given efficiency.
double prbs_for_load(double load_bps, double bits_per_prb, double interval_ms);

// Default-allocation side run. With `unbounded_hungry`, elephant UEs get
// unbounded demand and count entirely as non-Zoom load.
SlackEstimate estimate_slack(std::span<const FairnessUe> ues,
                             const IntervalGeometry& g,
                             bool unbounded_hungry = true);

// clip(max(0, R - S) / max(1, U)).
double fairness_loss(double reserved_prb, const SlackEstimate& slack);

struct PrioritizedLoads {
  uint32_t ue = 0;
  double base_bps = 0.0;
  double enh_bps = 0.0;
  double audio_bps = 0.0;
};

// Reserved PRBs for one flow under `a`.
double reserved_prbs(const Action& a, const PrioritizedLoads& loads,
                     double bits_per_prb, double interval_ms);

// --------------------------------------------------------------- solver

struct SolverProblem {
  std::vector<std::vector<double>> qoe;       // [flow][action], 0..100
  std::vector<std::vector<double>> reserved;  // [flow][action], PRBs
  double nonzoom_prb = 0.0;                   // U
  double slack_prb = 0.0;                     // S
  double alpha = 0.5;
  double beta = 0.5;
};

struct SolverResult {
  std::vector<size_t> choice;  // index into the action columns
  bool fallback = false;       // no feasible vector; caller applies no-priority
  double objective = 0.0;
  double q_agg = 0.0;
  double reserved = 0.0;
  double excess = 0.0;
  double loss = 0.0;
  uint64_t nodes = 0;
};

double solver_objective(const SolverProblem& p, std::span<const size_t> choice,
                        double* q_agg = nullptr, double* excess = nullptr);
bool solver_feasible(const SolverProblem& p, std::span<const size_t> choice);

// Columns are assumed ordered by preference for ties (lower index wins).
SolverResult solve_exhaustive(const SolverProblem& p);
SolverResult solve_branch_and_bound(const SolverProblem& p);
SolverResult solve(const SolverProblem& p, size_t enumeration_threshold);

// ---------------------------------------------------------- stabilizer

// Per-flow hysteresis and warm-up.
class Stabilizer {
 public:
  Stabilizer(uint32_t confirmations, double warmup_ms, Action warmup_action)
      : confirmations_(confirmations),
        warmup_ms_(warmup_ms),
        warmup_action_(warmup_action) {}

  Action stabilize(uint32_t flow, const Action& proposal, double now_ms,
                   double flow_start_ms);
  bool in_warmup(uint32_t flow, double now_ms) const;
  std::optional<Action> committed(uint32_t flow) const;

 private:
  struct Track {
    double start_ms = 0.0;
    Action committed;
    std::optional<Action> pending;
    uint32_t count = 0;
  };
  uint32_t confirmations_;
  double warmup_ms_;
  Action warmup_action_;
  std::map<uint32_t, Track> tracks_;
};

// -------------------------------------------------------------- shaping

struct FlowDecision {
  uint32_t flow = 0;
  uint32_t ue = 0;
  Direction direction = Direction::Downlink;
  Action action = kPrioritizeAll;
  double probe_drop_probability = 0.0;
  bool enhancement_drop = false;
  double epoch_ms = 0.0;
};

// Drop share that brings the flow's offered load down to its estimated
// allocation: clip((offered - allocated) / offered).
double probe_drop_probability(double offered_bps, double allocated_bps);

// Marking map from classified subflow to priority class.
PriorityClass mark(SubflowKind kind, const FlowDecision& d);

// ----------------------------------------------------------- controller

struct ControllerParams {
  double alpha = 1.0;
  double beta = 0.5;
  double interval_ms = 50.0;
  uint32_t hysteresis_multiple = 5;
  double warmup_ms = 2000.0;
  size_t enumeration_threshold = 12;
  std::vector<Action> candidates{kPrioritizeAll, kBaseAndAudio, kNoPriority};
  bool enable_enhancement_drop = true;
  bool enable_probe_drop = true;
  std::optional<double> forced_probe_drop;  // overrides the law after warm-up
  bool record_timing = false;

  // Throws std::invalid_argument when out of range.
  void validate() const;
};

struct DecisionLogRow {
  uint64_t interval = 0;
  double t_ms = 0.0;
  uint32_t flow = 0;
  Direction direction = Direction::Downlink;
  Action proposed;
  Action committed;
  double fairness_loss = 0.0;
  double q_agg = 0.0;
  double objective = 0.0;
  double solve_time_ms = 0.0;
  double probe_drop = 0.0;
  bool enhancement_drop = false;
};

void write_decision_log_header(std::ostream& os);
void write_decision_log_row(std::ostream& os, const DecisionLogRow& r,
                            bool with_timing);

class Controller {
 public:
  Controller(ControllerParams params, IntervalGeometry geometry);

  // Returns one decision per Zoom flow in the report.
  std::vector<FlowDecision> decide(const MonitorReport& report);

  const std::vector<DecisionLogRow>& log() const { return log_; }
  const std::vector<double>& solve_times_ms() const { return solve_times_; }
  const ControllerParams& params() const { return params_; }

 private:
  void decide_direction(const MonitorReport& report, Direction dir,
                        std::vector<FlowDecision>& out);

  ControllerParams params_;
  IntervalGeometry geometry_;
  std::vector<Action> columns_;  // candidates sorted by tie preference
  Stabilizer stabilizer_;
  std::vector<DecisionLogRow> log_;
  std::vector<double> solve_times_;
};

}  // namespace streamguard
