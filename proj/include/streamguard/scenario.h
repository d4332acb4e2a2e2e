#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "streamguard/baselines.h"
#include "streamguard/controller.h"
#include "streamguard/qoe_eval.h"
#include "streamguard/ran_sim.h"
#include "streamguard/traffic_gen.h"

namespace streamguard {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SnrPoint {
  double t_ms = 0.0;
  double snr_db = 0.0;
};

struct ZoomFlowSpec {
  Direction direction = Direction::Downlink;
  ZoomSourceConfig source;
};

struct BackgroundFlowSpec {
  Direction direction = Direction::Downlink;
  BackgroundSourceConfig source;
  double base_rtt_ms = 30.0;  // path RTT outside the RAN
};

struct UeSpec {
  double snr_db = 10.0;
  std::vector<SnrPoint> snr_trace;  // step changes, sorted by time
  std::vector<ZoomFlowSpec> zoom;
  std::vector<BackgroundFlowSpec> background;
};

struct OutputOptions {
  bool trace = true;
  bool monitor = true;
  bool decisions = true;
  bool qoe = true;
  bool goodput = true;
  bool ground_truth = true;
  bool prb_log = false;
};

struct ReceiverOptions {
  double playout_offset_ms = 0.0;
  double frame_hold_ms = 0.0;  // 0 disables the decode-order wait
};

struct ScenarioConfig {
  std::string name = "custom";
  CellConfig cell;
  std::vector<UeSpec> ues;
  ControllerParams controller;
  BaselineMode baseline;
  std::string dpi_app = "zoom";
  double duration_s = 60.0;
  uint64_t seed = 1;
  double core_delay_ms = 10.0;
  double qoe_start_ms = 2000.0;  // scoring skips the call setup
  bool assert_congestion = false;
  double congestion_min_fraction = 0.9;
  OutputOptions outputs;
  ReceiverOptions receiver;

  // Throws ConfigError with a readable reason.
  void validate() const;
  double duration_ms() const { return duration_s * 1000.0; }
};

// JSON schema documented in the README. Unknown keys are rejected.
ScenarioConfig scenario_from_json_text(const std::string& text);
ScenarioConfig load_scenario_file(const std::filesystem::path& path);
std::string scenario_to_json_text(const ScenarioConfig& cfg);

// Presets 1..5. Throws ConfigError otherwise.
ScenarioConfig builtin_preset(int n);

struct ZoomFlowResult {
  uint32_t ue = 0;
  uint32_t flow = 0;
  Direction direction = Direction::Downlink;
  QoeInputs inputs;
  QoeScore score;
  double delivered_base_fps = 0.0;  // base frames rendered per second after qoe_start
  double send_rate_bps = 0.0;  // after qoe_start
  uint64_t offered_bytes = 0;
  uint64_t delivered_bytes = 0;
};

struct BackgroundResult {
  uint32_t ue = 0;
  uint32_t flow = 0;
  Direction direction = Direction::Downlink;
  uint64_t offered_bytes = 0;
  uint64_t delivered_bytes = 0;
  double goodput_bps = 0.0;
};

struct LatencyStats {
  size_t count = 0;
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
};
LatencyStats latency_stats(std::vector<double> samples);

struct RunReport {
  std::string baseline;
  std::vector<ZoomFlowResult> zoom;
  std::vector<BackgroundResult> background;
  std::vector<DecisionLogRow> decisions;
  LatencyStats solver;
  double qoe_sum = 0.0;
  double goodput_sum_bps = 0.0;
  double congested_fraction = 0.0;
  bool congestion_ok = true;
  CellCounters counters;
};

// Runs the scenario. When out_dir is set, writes the CSV outputs there.
RunReport run_scenario(const ScenarioConfig& cfg,
                       const std::optional<std::filesystem::path>& out_dir = {});

struct SweepPoint {
  std::string param;  // alpha, beta, probe_drop, seed
  double value = 0.0;
};

struct SweepRow {
  SweepPoint point;
  bool ok = false;
  std::string error;
  RunReport report;
};

// Runs every grid point independently; a failing point is recorded and the
// rest continue.
std::vector<SweepRow> run_sweep(const ScenarioConfig& base,
                                const std::vector<SweepPoint>& grid);
ScenarioConfig apply_sweep_point(ScenarioConfig cfg, const SweepPoint& p);

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);
void write_summary_json(std::ostream& os, const ScenarioConfig& cfg,
                        const RunReport& r);

}  // namespace streamguard
