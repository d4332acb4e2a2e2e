#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "streamguard/baselines.h"
#include "streamguard/controller.h"
#include "streamguard/flow2frame.h"
#include "streamguard/qoe_eval.h"
#include "streamguard/scenario.h"

namespace py = pybind11;
using namespace streamguard;

namespace {

ScenarioConfig config_from(const std::string& json_text, std::optional<uint64_t> seed,
                           std::optional<double> duration_s) {
  ScenarioConfig cfg = scenario_from_json_text(json_text);
  if (seed) cfg.seed = *seed;
  if (duration_s) cfg.duration_s = *duration_s;
  cfg.validate();
  return cfg;
}

py::dict report_dict(const RunReport& r) {
  py::list zoom;
  for (const auto& z : r.zoom) {
    py::dict d;
    d["ue"] = z.ue;
    d["flow"] = z.flow;
    d["direction"] = std::string(to_string(z.direction));
    d["qoe"] = z.score.total();
    d["audio"] = z.score.audio;
    d["video"] = z.score.video;
    d["fps"] = z.score.fps;
    d["resolution"] = z.score.resolution;
    d["delivered_base_fps"] = z.delivered_base_fps;
    d["send_rate_bps"] = z.send_rate_bps;
    zoom.append(d);
  }
  py::list bg;
  for (const auto& b : r.background) {
    py::dict d;
    d["ue"] = b.ue;
    d["flow"] = b.flow;
    d["direction"] = std::string(to_string(b.direction));
    d["goodput_bps"] = b.goodput_bps;
    bg.append(d);
  }
  py::dict out;
  out["baseline"] = r.baseline;
  out["qoe_sum"] = r.qoe_sum;
  out["goodput_sum_bps"] = r.goodput_sum_bps;
  out["congested_fraction"] = r.congested_fraction;
  out["congestion_ok"] = r.congestion_ok;
  out["zoom"] = zoom;
  out["background"] = bg;
  out["decisions"] = r.decisions.size();
  out["delivered_packets"] = r.counters.delivered;
  out["dropped_directive"] = r.counters.dropped_directive;
  return out;
}

}  // namespace

PYBIND11_MODULE(_streamguard, m) {
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<Action>(m, "Action")
      .def(py::init<bool, bool, bool>(), py::arg("base"), py::arg("enh"), py::arg("audio"))
      .def_readwrite("base", &Action::base)
      .def_readwrite("enh", &Action::enh)
      .def_readwrite("audio", &Action::audio)
      .def("__str__", &Action::str)
      .def("__repr__", [](const Action& a) { return "Action" + a.str(); })
      .def(py::self == py::self);
  m.def("parse_action", &parse_action);
  m.def("all_actions", &all_actions);

  py::class_<FlowState>(m, "FlowState")
      .def(py::init([](double base_fps, double enh_fps, double base_delay_ms,
                       double enh_delay_ms, double audio_delay_ms) {
             return FlowState{base_fps, enh_fps, base_delay_ms, enh_delay_ms, audio_delay_ms};
           }),
           py::arg("base_fps") = 0.0, py::arg("enh_fps") = 0.0, py::arg("base_delay_ms") = 0.0,
           py::arg("enh_delay_ms") = 0.0, py::arg("audio_delay_ms") = 0.0)
      .def_readwrite("base_fps", &FlowState::base_fps)
      .def_readwrite("enh_fps", &FlowState::enh_fps)
      .def_readwrite("base_delay_ms", &FlowState::base_delay_ms)
      .def_readwrite("enh_delay_ms", &FlowState::enh_delay_ms)
      .def_readwrite("audio_delay_ms", &FlowState::audio_delay_ms);
  m.def("qoe_gain", &qoe_gain, py::arg("action"), py::arg("state"));

  m.def(
      "fairness_loss",
      [](double reserved_prb, double nonzoom_prb, double slack_prb) {
        SlackEstimate s;
        s.nonzoom_prb = nonzoom_prb;
        s.slack_prb = slack_prb;
        s.total_prb = nonzoom_prb + slack_prb;
        return fairness_loss(reserved_prb, s);
      },
      py::arg("reserved_prb"), py::arg("nonzoom_prb"), py::arg("slack_prb"));

  py::class_<SolverResult>(m, "SolverResult")
      .def_readonly("choice", &SolverResult::choice)
      .def_readonly("fallback", &SolverResult::fallback)
      .def_readonly("objective", &SolverResult::objective)
      .def_readonly("q_agg", &SolverResult::q_agg)
      .def_readonly("reserved", &SolverResult::reserved)
      .def_readonly("excess", &SolverResult::excess)
      .def_readonly("loss", &SolverResult::loss);
  m.def(
      "solve",
      [](std::vector<std::vector<double>> qoe, std::vector<std::vector<double>> reserved,
         double nonzoom_prb, double slack_prb, double alpha, double beta,
         size_t enumeration_threshold) {
        SolverProblem p{std::move(qoe), std::move(reserved), nonzoom_prb, slack_prb, alpha, beta};
        return solve(p, enumeration_threshold);
      },
      py::arg("qoe"), py::arg("reserved"), py::arg("nonzoom_prb"), py::arg("slack_prb"),
      py::arg("alpha") = 1.0, py::arg("beta") = 0.5, py::arg("enumeration_threshold") = 12);
  m.def(
      "solve_exhaustive",
      [](std::vector<std::vector<double>> qoe, std::vector<std::vector<double>> reserved,
         double nonzoom_prb, double slack_prb, double alpha, double beta) {
        SolverProblem p{std::move(qoe), std::move(reserved), nonzoom_prb, slack_prb, alpha, beta};
        return solve_exhaustive(p);
      },
      py::arg("qoe"), py::arg("reserved"), py::arg("nonzoom_prb"), py::arg("slack_prb"),
      py::arg("alpha") = 1.0, py::arg("beta") = 0.5);

  m.def(
      "score_delay",
      [](const std::string& stream, double delay_ms, double jitter_ms) {
        if (stream != "audio" && stream != "video")
          throw py::value_error("stream must be 'audio' or 'video'");
        return score_delay(stream == "audio" ? MediaStream::Audio : MediaStream::Video,
                           delay_ms, jitter_ms);
      },
      py::arg("stream"), py::arg("mean_delay_ms"), py::arg("mean_jitter_ms"));
  m.def("score_fps", [](const std::vector<double>& series) { return score_fps(series); },
        py::arg("fps_series"));

  m.def(
      "align_synthetic",
      [](uint64_t seed, double skip_probability) {
        SyntheticTraceParams params;
        params.skip_probability = skip_probability;
        const SyntheticTrace t = make_synthetic_trace(seed, params);
        const AlignmentResult r = align(t.input);
        py::dict d;
        d["true_delta_ms"] = t.true_delta_ms;
        d["best_delta_ms"] = r.best_delta_ms;
        d["accuracy"] = r.accuracy;
        d["false_positives"] = r.false_positives;
        d["agreement"] = mapping_agreement(r, t.true_point_frame);
        return d;
      },
      py::arg("seed"), py::arg("skip_probability") = 0.25);

  m.def("parse_baseline", [](const std::string& s) { return parse_baseline(s).str(); });
  m.def("builtin_preset_json", [](int n) { return scenario_to_json_text(builtin_preset(n)); },
        py::arg("n"));
  m.def(
      "validate_config",
      [](const std::string& json_text) { return scenario_to_json_text(config_from(json_text, {}, {})); },
      py::arg("json_text"));
  m.def(
      "run",
      [](const std::string& json_text, std::optional<uint64_t> seed,
         std::optional<double> duration_s, std::optional<std::filesystem::path> out_dir) {
        const ScenarioConfig cfg = config_from(json_text, seed, duration_s);
        RunReport r;
        {
          py::gil_scoped_release release;
          r = run_scenario(cfg, out_dir);
        }
        return report_dict(r);
      },
      py::arg("json_text"), py::arg("seed") = py::none(), py::arg("duration_s") = py::none(),
      py::arg("out_dir") = py::none());
}
