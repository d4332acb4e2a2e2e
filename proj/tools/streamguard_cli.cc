// Command-line front end: run / sweep / score / flow2frame.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "streamguard/flow2frame.h"
#include "streamguard/offline.h"
#include "streamguard/scenario.h"

namespace fs = std::filesystem;
using namespace streamguard;

namespace {

struct CommonOpts {
  std::string config;
  std::optional<int> preset;
  std::optional<uint64_t> seed;
  std::optional<double> duration;
  std::optional<std::string> baseline;
  std::optional<double> alpha;
  std::optional<double> beta;
  bool timing = false;
  bool no_trace = false;
};

void add_common(CLI::App* app, CommonOpts& o) {
  app->add_option("--config", o.config, "Scenario JSON file");
  app->add_option("--preset", o.preset, "Built-in scenario 1..5")->check(CLI::Range(1, 5));
  app->add_option("--seed", o.seed, "Random seed");
  app->add_option("--duration", o.duration, "Simulated seconds");
  app->add_option("--baseline", o.baseline,
                  "streamguard | dchannel | tcran:<kbps> | vanilla:<kbps>");
  app->add_option("--alpha", o.alpha, "QoE aggregation weight in [0,1]");
  app->add_option("--beta", o.beta, "QoE vs fairness weight in [0,1]");
  app->add_flag("--timing", o.timing, "Record solver wall-clock time (non-deterministic)");
  app->add_flag("--no-trace", o.no_trace, "Skip the per-packet trace");
}

ScenarioConfig build_config(const CommonOpts& o) {
  if (!o.config.empty() && o.preset) throw ConfigError("use either --config or --preset");
  ScenarioConfig cfg = o.config.empty() ? builtin_preset(o.preset.value_or(1))
                                        : load_scenario_file(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.duration) cfg.duration_s = *o.duration;
  if (o.baseline) {
    try {
      cfg.baseline = parse_baseline(*o.baseline);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (o.alpha) cfg.controller.alpha = *o.alpha;
  if (o.beta) cfg.controller.beta = *o.beta;
  cfg.controller.record_timing = o.timing;
  if (o.no_trace) cfg.outputs.trace = false;
  cfg.validate();
  return cfg;
}

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("bad grid value: " + tok);
    }
  }
  return out;
}

int cmd_run(const CommonOpts& o, const std::string& out) {
  const ScenarioConfig cfg = build_config(o);
  const auto t0 = std::chrono::steady_clock::now();
  const RunReport r = run_scenario(cfg, out.empty() ? std::nullopt : std::optional<fs::path>(out));
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("scenario %s  mode %s  seed %llu  (%.1f s wall)\n", cfg.name.c_str(),
              r.baseline.c_str(), static_cast<unsigned long long>(cfg.seed), secs);
  for (const auto& z : r.zoom)
    std::printf("  zoom flow %u ue %u %s  qoe %.2f (audio %.1f video %.1f fps %.1f res %.1f)"
                "  base fps %.2f\n",
                z.flow, z.ue, std::string(to_string(z.direction)).c_str(), z.score.total(),
                z.score.audio, z.score.video, z.score.fps, z.score.resolution,
                z.delivered_base_fps);
  std::printf("  qoe sum %.2f  background goodput %.0f bps  congested %.1f%%\n", r.qoe_sum,
              r.goodput_sum_bps, 100.0 * r.congested_fraction);
  if (cfg.controller.record_timing && r.solver.count)
    std::printf("  solver p50 %.3f ms  p99 %.3f ms  max %.3f ms\n", r.solver.p50_ms,
                r.solver.p99_ms, r.solver.max_ms);
  if (cfg.assert_congestion && !r.congestion_ok)
    std::fprintf(stderr, "warning: congestion condition not met (%.1f%% of slots < %.0f%%)\n",
                 100.0 * r.congested_fraction, 100.0 * cfg.congestion_min_fraction);
  return 0;
}

int cmd_sweep(const CommonOpts& o, const std::string& param, const std::string& values,
              const std::string& out) {
  ScenarioConfig cfg = build_config(o);
  cfg.outputs = OutputOptions{false, false, false, false, false, false, false};
  std::vector<SweepPoint> grid;
  for (double v : parse_values(values)) grid.push_back({param, v});
  const auto rows = run_sweep(cfg, grid);
  if (out.empty()) {
    write_sweep_csv(std::cout, rows);
  } else {
    const fs::path p(out);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + out);
    write_sweep_csv(f, rows);
  }
  size_t failed = 0;
  for (const auto& r : rows)
    if (!r.ok) {
      ++failed;
      std::fprintf(stderr, "sweep point %s=%g failed: %s\n", r.point.param.c_str(),
                   r.point.value, r.error.c_str());
    }
  return 0;
}

struct ScoreOpts {
  std::optional<double> core_delay, start_ms, duration, frame_hold, playout_offset;
};

int cmd_score(const std::string& in, const std::string& out, const ScoreOpts& o) {
  RunMeta meta = load_run_meta(in);
  if (o.core_delay) meta.core_delay_ms = *o.core_delay;
  if (o.start_ms) meta.qoe_start_ms = *o.start_ms;
  if (o.duration) meta.duration_s = *o.duration;
  if (o.frame_hold) meta.receiver.frame_hold_ms = *o.frame_hold;
  if (o.playout_offset) meta.receiver.playout_offset_ms = *o.playout_offset;
  auto flows = load_run_dir(in, meta.core_delay_ms);
  double end = meta.duration_s ? *meta.duration_s * 1000.0 : 0.0;
  if (!meta.duration_s)
    for (const auto& f : flows)
      for (const auto& p : f.received) end = std::max(end, p.recv_ms);
  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!out.empty()) {
    file.open(out, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write " + out);
    os = &file;
  }
  write_qoe_csv_header(*os);
  for (const auto& f : flows) {
    std::vector<ReceivedPacket> scored;
    for (const auto& p : f.received)
      if (p.emit_ms >= meta.qoe_start_ms && p.recv_ms <= end) scored.push_back(p);
    const QoeInputs qi = build_qoe_inputs(scored, f.truth, meta.qoe_start_ms, end, meta.receiver);
    write_qoe_csv_row(*os, f.ue, f.flow, f.direction, qi, composite(qi));
  }
  return 0;
}

int cmd_flow2frame(const std::string& in, std::optional<uint32_t> flow,
                   std::optional<uint64_t> synthetic_seed, const std::string& out,
                   std::optional<double> core_delay) {
  AlignmentInput input;
  std::vector<bool> delivered;
  std::optional<int> truth_delta;
  if (synthetic_seed) {
    const SyntheticTrace t = make_synthetic_trace(*synthetic_seed);
    input = t.input;
    truth_delta = t.true_delta_ms;
  } else {
    if (in.empty()) throw ConfigError("flow2frame needs --in <run dir> or --synthetic <seed>");
    const RunMeta meta = load_run_meta(in);
    auto flows = load_run_dir(in, core_delay.value_or(meta.core_delay_ms));
    if (flows.empty()) throw ConfigError("no Zoom flows in " + in);
    const OfflineFlow* f = &flows.front();
    if (flow) {
      f = nullptr;
      for (const auto& x : flows)
        if (x.flow == *flow) f = &x;
      if (!f) throw ConfigError("flow " + std::to_string(*flow) + " not in run");
    }
    input = alignment_input_for(*f, meta.receiver);
    for (const auto& fr : f->truth.frames) {
      auto it = f->frame_fully_delivered.find(fr.frame_id);
      delivered.push_back(it != f->frame_fully_delivered.end() && it->second);
    }
  }
  const AlignmentResult r = align(input);
  std::vector<std::optional<MissingCause>> causes(input.cam_pts.size());
  for (size_t k = 0; k < input.cam_pts.size(); ++k)
    if (!input.rx_rendered.count(k))
      causes[k] = classify_missing(k, r, k < delivered.size() && delivered[k]);
  std::printf("delta %d ms  accuracy %.4f  false positives %zu  skipped %zu / %zu frames\n",
              r.best_delta_ms, r.accuracy, r.false_positives, r.link.skipped_count,
              input.cam_pts.size());
  if (truth_delta) std::printf("true delta %d ms\n", *truth_delta);
  if (!out.empty()) {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + out);
    write_mapping_csv(f, input, r, causes);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"StreamGuard RAN simulator"};
  app.require_subcommand(1);

  CommonOpts run_opts;
  std::string run_out;
  auto* run = app.add_subcommand("run", "Simulate one scenario and write CSV outputs");
  add_common(run, run_opts);
  run->add_option("--out", run_out, "Output directory");

  CommonOpts sweep_opts;
  std::string sweep_out, sweep_param = "beta", sweep_values = "0,0.25,0.5,0.75,1";
  auto* sweep = app.add_subcommand("sweep", "Run a parameter grid and write a frontier CSV");
  add_common(sweep, sweep_opts);
  sweep->add_option("--out", sweep_out, "Output CSV (stdout if omitted)");
  sweep->add_option("--param", sweep_param, "alpha | beta | probe_drop | seed");
  sweep->add_option("--values", sweep_values, "Comma-separated grid values (may be empty)");

  std::string score_in, score_out;
  ScoreOpts score_opts;
  auto* score = app.add_subcommand("score", "Recompute QoE from a run directory");
  score->add_option("--in", score_in, "Run output directory")->required();
  score->add_option("--out", score_out, "Output CSV (stdout if omitted)");
  score->add_option("--core-delay", score_opts.core_delay, "Uplink core delay in ms");
  score->add_option("--start-ms", score_opts.start_ms, "Scoring window start");
  score->add_option("--duration", score_opts.duration, "Run length in seconds");
  score->add_option("--frame-hold", score_opts.frame_hold, "Receiver decode wait in ms");
  score->add_option("--playout-offset", score_opts.playout_offset, "Fixed playout delay in ms");

  std::string f2f_in, f2f_out;
  std::optional<uint32_t> f2f_flow;
  std::optional<uint64_t> f2f_synth;
  std::optional<double> f2f_core;
  auto* f2f = app.add_subcommand("flow2frame", "Align camera frames with RTP sampling");
  f2f->add_option("--in", f2f_in, "Run output directory");
  f2f->add_option("--flow", f2f_flow, "Zoom flow id (first flow if omitted)");
  f2f->add_option("--synthetic", f2f_synth, "Use a synthetic trace with this seed");
  std::optional<uint64_t> f2f_seed;
  f2f->add_option("--seed", f2f_seed, "Same as --synthetic");
  f2f->add_option("--out", f2f_out, "Mapping CSV");
  f2f->add_option("--core-delay", f2f_core, "Uplink core delay in ms");

  int export_n = 1;
  std::string export_out;
  auto* exp = app.add_subcommand("preset", "Print a built-in scenario as JSON");
  exp->add_option("--preset", export_n, "Preset 1..5")->check(CLI::Range(1, 5));
  exp->add_option("--out", export_out, "Output file (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) return cmd_run(run_opts, run_out);
    if (*sweep) return cmd_sweep(sweep_opts, sweep_param, sweep_values, sweep_out);
    if (*score) return cmd_score(score_in, score_out, score_opts);
    if (*exp) {
      const std::string text = scenario_to_json_text(builtin_preset(export_n));
      if (export_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream f(export_out, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + export_out);
        f << text;
      }
      return 0;
    }
    if (*f2f) {
      if (!f2f_synth) f2f_synth = f2f_seed;
      return cmd_flow2frame(f2f_in, f2f_flow, f2f_synth, f2f_out, f2f_core);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
