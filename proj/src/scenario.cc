#include "streamguard/scenario.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "streamguard/csv_util.h"
#include "streamguard/dpi.h"
#include "streamguard/monitor.h"

namespace streamguard {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- config

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (ues.empty()) fail("scenario needs at least one UE");
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) fail("duration_s must be positive");
  if (duration_ms() <= controller.warmup_ms)
    fail("duration must exceed the warm-up (" + csv::fmt(controller.warmup_ms, 0) + " ms)");
  if (cell.prbs_per_slot == 0) fail("cell.prbs_per_slot must be positive");
  if (!(cell.slot_ms > 0.0)) fail("cell.slot_ms must be positive");
  if (cell.bsr_period_slots == 0) fail("cell.bsr_period_slots must be positive");
  if (cell.queue_limit_bytes == 0) fail("cell.queue_limit_bytes must be positive");
  if (!(cell.air_loss_probability >= 0.0 && cell.air_loss_probability <= 1.0))
    fail("cell.air_loss_probability must be in [0,1]");
  try {
    validate_mcs_table(cell.mcs_table);
    controller.validate();
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  if (!(core_delay_ms >= 0.0)) fail("core_delay_ms must be >= 0");
  if (!(qoe_start_ms >= 0.0) || qoe_start_ms >= duration_ms())
    fail("qoe_start_ms must lie inside the run");
  if (!(congestion_min_fraction >= 0.0 && congestion_min_fraction <= 1.0))
    fail("congestion_min_fraction must be in [0,1]");
  if (!(receiver.playout_offset_ms >= 0.0)) fail("receiver.playout_offset_ms must be >= 0");
  if (!(receiver.frame_hold_ms >= 0.0)) fail("receiver.frame_hold_ms must be >= 0");
  if ((baseline.kind == BaselineKind::TcRan || baseline.kind == BaselineKind::Vanilla5G) &&
      !(baseline.quota_kbps > 0.0))
    fail("baseline quota must be positive");
  if (!DpiRegistry().contains(dpi_app)) fail("unknown dpi_app: " + dpi_app);
  for (size_t i = 0; i < ues.size(); ++i) {
    const auto& u = ues[i];
    const std::string where = "ues[" + std::to_string(i) + "]";
    if (!std::isfinite(u.snr_db)) fail(where + ".snr_db must be finite");
    for (size_t k = 0; k < u.snr_trace.size(); ++k) {
      if (!std::isfinite(u.snr_trace[k].snr_db) || !std::isfinite(u.snr_trace[k].t_ms))
        fail(where + ".snr_trace has a non-finite entry");
      if (k > 0 && u.snr_trace[k].t_ms < u.snr_trace[k - 1].t_ms)
        fail(where + ".snr_trace must be sorted by time");
    }
    for (const auto& z : u.zoom) {
      if (z.source.base_fps_target < 0 || z.source.enh_fps_target < 0)
        fail(where + ": fps targets must be >= 0");
      if (!(z.source.frame_interval_ms > 0)) fail(where + ": frame_interval_ms must be > 0");
      if (z.source.start_ms < 0) fail(where + ": start_ms must be >= 0");
    }
    for (const auto& b : u.background) {
      if (b.source.pkt_bytes == 0) fail(where + ": background pkt_bytes must be > 0");
      if (!(b.base_rtt_ms >= 0)) fail(where + ": base_rtt_ms must be >= 0");
      if (b.source.start_ms < 0) fail(where + ": start_ms must be >= 0");
    }
  }
}

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->template get<T>();
}

std::string scheduler_name(SchedulerPolicy p) {
  return p == SchedulerPolicy::RoundRobin ? "round_robin" : "proportional_fair";
}

SchedulerPolicy parse_scheduler(const std::string& s) {
  if (s == "round_robin" || s == "rr") return SchedulerPolicy::RoundRobin;
  if (s == "proportional_fair" || s == "pf") return SchedulerPolicy::ProportionalFair;
  throw ConfigError("unknown scheduler: " + s);
}

std::string model_name(BackgroundModel m) {
  return m == BackgroundModel::BulkAimd ? "bulk" : "web";
}

BackgroundModel parse_model(const std::string& s) {
  if (s == "bulk") return BackgroundModel::BulkAimd;
  if (s == "web") return BackgroundModel::LightWeb;
  throw ConfigError("unknown background model: " + s);
}

CellConfig parse_cell(const json& j) {
  check_keys(j, {"prbs_per_slot", "slot_ms", "k1_slots", "scheduler", "bsr_period_slots",
                 "bsr_cap_bytes", "queue_limit_bytes", "air_loss_probability"},
             "cell");
  CellConfig c;
  read(j, "prbs_per_slot", c.prbs_per_slot);
  read(j, "slot_ms", c.slot_ms);
  read(j, "k1_slots", c.k1_slots);
  if (j.contains("scheduler")) c.policy = parse_scheduler(j.at("scheduler").get<std::string>());
  read(j, "bsr_period_slots", c.bsr_period_slots);
  read(j, "bsr_cap_bytes", c.bsr_cap_bytes);
  read(j, "queue_limit_bytes", c.queue_limit_bytes);
  read(j, "air_loss_probability", c.air_loss_probability);
  return c;
}

void parse_controller(const json& j, ControllerParams& p, BaselineMode& mode) {
  check_keys(j, {"mode", "alpha", "beta", "interval_ms", "hysteresis_multiple", "warmup_ms",
                 "enumeration_threshold", "candidates", "enhancement_drop", "probe_drop",
                 "forced_probe_drop"},
             "controller");
  if (j.contains("mode")) mode = parse_baseline(j.at("mode").get<std::string>());
  read(j, "alpha", p.alpha);
  read(j, "beta", p.beta);
  read(j, "interval_ms", p.interval_ms);
  read(j, "hysteresis_multiple", p.hysteresis_multiple);
  read(j, "warmup_ms", p.warmup_ms);
  read(j, "enumeration_threshold", p.enumeration_threshold);
  if (j.contains("candidates")) {
    p.candidates.clear();
    for (const auto& a : j.at("candidates")) p.candidates.push_back(parse_action(a.get<std::string>()));
  }
  read(j, "enhancement_drop", p.enable_enhancement_drop);
  read(j, "probe_drop", p.enable_probe_drop);
  if (j.contains("forced_probe_drop") && !j.at("forced_probe_drop").is_null())
    p.forced_probe_drop = j.at("forced_probe_drop").get<double>();
}

Direction required_direction(const json& j, const std::string& where) {
  if (!j.contains("direction")) throw ConfigError(where + ".direction is required (\"dl\" or \"ul\")");
  return parse_direction(j.at("direction").get<std::string>());
}

ZoomFlowSpec parse_zoom(const json& j, const std::string& where) {
  check_keys(j, {"direction", "start_ms", "base_fps", "enh_fps", "enh_kind", "probe_duration_ms",
                 "probe_rate_pps", "probe_steady_rate_pps", "probe_pkt_bytes", "audio_pkt_bytes",
                 "capture_lag_ms"},
             where);
  ZoomFlowSpec z;
  z.direction = required_direction(j, where);
  auto& s = z.source;
  read(j, "start_ms", s.start_ms);
  read(j, "base_fps", s.base_fps_target);
  read(j, "enh_fps", s.enh_fps_target);
  if (j.contains("enh_kind")) {
    s.enh_kind = parse_subflow_kind(j.at("enh_kind").get<std::string>());
    if (!is_enhancement(s.enh_kind)) throw ConfigError(where + ".enh_kind must be an enhancement layer");
  }
  read(j, "probe_duration_ms", s.probe_duration_ms);
  read(j, "probe_rate_pps", s.probe_rate_pps);
  read(j, "probe_steady_rate_pps", s.probe_steady_rate_pps);
  read(j, "probe_pkt_bytes", s.probe_pkt_bytes);
  read(j, "audio_pkt_bytes", s.audio_pkt_bytes);
  read(j, "capture_lag_ms", s.capture_lag_ms);
  return z;
}

BackgroundFlowSpec parse_background(const json& j, const std::string& where) {
  check_keys(j, {"direction", "model", "start_ms", "pkt_bytes", "base_rtt_ms", "initial_window"},
             where);
  BackgroundFlowSpec b;
  b.direction = required_direction(j, where);
  if (j.contains("model")) b.source.model = parse_model(j.at("model").get<std::string>());
  read(j, "start_ms", b.source.start_ms);
  read(j, "pkt_bytes", b.source.pkt_bytes);
  read(j, "base_rtt_ms", b.base_rtt_ms);
  read(j, "initial_window", b.source.initial_window);
  return b;
}

UeSpec parse_ue(const json& j, const std::string& where) {
  check_keys(j, {"snr_db", "snr_trace", "zoom", "background"}, where);
  UeSpec u;
  read(j, "snr_db", u.snr_db);
  if (j.contains("snr_trace"))
    for (const auto& p : j.at("snr_trace")) {
      if (!p.is_array() || p.size() != 2) throw ConfigError(where + ".snr_trace entries are [t_ms, snr_db]");
      u.snr_trace.push_back({p[0].get<double>(), p[1].get<double>()});
    }
  if (j.contains("zoom")) {
    size_t k = 0;
    for (const auto& z : j.at("zoom")) u.zoom.push_back(parse_zoom(z, where + ".zoom[" + std::to_string(k++) + "]"));
  }
  if (j.contains("background")) {
    size_t k = 0;
    for (const auto& b : j.at("background"))
      u.background.push_back(parse_background(b, where + ".background[" + std::to_string(k++) + "]"));
  }
  return u;
}

}  // namespace

ScenarioConfig scenario_from_json_text(const std::string& text) {
  ScenarioConfig c;
  try {
    const json j = json::parse(text);
    check_keys(j, {"name", "duration_s", "seed", "core_delay_ms", "qoe_start_ms", "dpi_app",
                   "assert_congestion", "congestion_min_fraction", "cell", "controller",
                   "outputs", "receiver", "ues"},
               "scenario");
    read(j, "name", c.name);
    read(j, "duration_s", c.duration_s);
    read(j, "seed", c.seed);
    read(j, "core_delay_ms", c.core_delay_ms);
    read(j, "qoe_start_ms", c.qoe_start_ms);
    read(j, "dpi_app", c.dpi_app);
    read(j, "assert_congestion", c.assert_congestion);
    read(j, "congestion_min_fraction", c.congestion_min_fraction);
    if (j.contains("cell")) c.cell = parse_cell(j.at("cell"));
    if (j.contains("controller")) parse_controller(j.at("controller"), c.controller, c.baseline);
    if (j.contains("outputs")) {
      const auto& o = j.at("outputs");
      check_keys(o, {"trace", "monitor", "decisions", "qoe", "goodput", "ground_truth", "prb_log"},
                 "outputs");
      read(o, "trace", c.outputs.trace);
      read(o, "monitor", c.outputs.monitor);
      read(o, "decisions", c.outputs.decisions);
      read(o, "qoe", c.outputs.qoe);
      read(o, "goodput", c.outputs.goodput);
      read(o, "ground_truth", c.outputs.ground_truth);
      read(o, "prb_log", c.outputs.prb_log);
    }
    if (j.contains("receiver")) {
      const auto& r = j.at("receiver");
      check_keys(r, {"playout_offset_ms", "frame_hold_ms"}, "receiver");
      read(r, "playout_offset_ms", c.receiver.playout_offset_ms);
      read(r, "frame_hold_ms", c.receiver.frame_hold_ms);
    }
    if (!j.contains("ues") || !j.at("ues").is_array()) throw ConfigError("scenario needs a 'ues' array");
    size_t i = 0;
    for (const auto& u : j.at("ues")) c.ues.push_back(parse_ue(u, "ues[" + std::to_string(i++) + "]"));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid scenario config: ") + e.what());
  }
  c.validate();
  return c;
}

ScenarioConfig load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return scenario_from_json_text(ss.str());
}

std::string scenario_to_json_text(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["duration_s"] = c.duration_s;
  j["seed"] = c.seed;
  j["core_delay_ms"] = c.core_delay_ms;
  j["qoe_start_ms"] = c.qoe_start_ms;
  j["dpi_app"] = c.dpi_app;
  j["assert_congestion"] = c.assert_congestion;
  j["congestion_min_fraction"] = c.congestion_min_fraction;
  j["cell"] = {{"prbs_per_slot", c.cell.prbs_per_slot},
               {"slot_ms", c.cell.slot_ms},
               {"k1_slots", c.cell.k1_slots},
               {"scheduler", scheduler_name(c.cell.policy)},
               {"bsr_period_slots", c.cell.bsr_period_slots},
               {"bsr_cap_bytes", c.cell.bsr_cap_bytes},
               {"queue_limit_bytes", c.cell.queue_limit_bytes},
               {"air_loss_probability", c.cell.air_loss_probability}};
  const auto& p = c.controller;
  json cand = json::array();
  for (const auto& a : p.candidates)
    cand.push_back(std::to_string(int{a.base}) + std::to_string(int{a.enh}) + std::to_string(int{a.audio}));
  j["controller"] = {{"mode", c.baseline.str()},
                     {"alpha", p.alpha},
                     {"beta", p.beta},
                     {"interval_ms", p.interval_ms},
                     {"hysteresis_multiple", p.hysteresis_multiple},
                     {"warmup_ms", p.warmup_ms},
                     {"enumeration_threshold", p.enumeration_threshold},
                     {"candidates", cand},
                     {"enhancement_drop", p.enable_enhancement_drop},
                     {"probe_drop", p.enable_probe_drop},
                     {"forced_probe_drop", p.forced_probe_drop ? json(*p.forced_probe_drop) : json(nullptr)}};
  j["outputs"] = {{"trace", c.outputs.trace},     {"monitor", c.outputs.monitor},
                  {"decisions", c.outputs.decisions}, {"qoe", c.outputs.qoe},
                  {"goodput", c.outputs.goodput}, {"ground_truth", c.outputs.ground_truth},
                  {"prb_log", c.outputs.prb_log}};
  j["receiver"] = {{"playout_offset_ms", c.receiver.playout_offset_ms},
                   {"frame_hold_ms", c.receiver.frame_hold_ms}};
  json ues = json::array();
  for (const auto& u : c.ues) {
    json ju;
    ju["snr_db"] = u.snr_db;
    if (!u.snr_trace.empty()) {
      json tr = json::array();
      for (const auto& s : u.snr_trace) tr.push_back({s.t_ms, s.snr_db});
      ju["snr_trace"] = tr;
    }
    json zs = json::array();
    for (const auto& z : u.zoom) {
      const auto& s = z.source;
      zs.push_back({{"direction", std::string(to_string(z.direction))},
                    {"start_ms", s.start_ms},
                    {"base_fps", s.base_fps_target},
                    {"enh_fps", s.enh_fps_target},
                    {"enh_kind", std::string(to_string(s.enh_kind))},
                    {"probe_duration_ms", s.probe_duration_ms},
                    {"probe_rate_pps", s.probe_rate_pps},
                    {"probe_steady_rate_pps", s.probe_steady_rate_pps},
                    {"probe_pkt_bytes", s.probe_pkt_bytes},
                    {"audio_pkt_bytes", s.audio_pkt_bytes},
                    {"capture_lag_ms", s.capture_lag_ms}});
    }
    ju["zoom"] = zs;
    json bs = json::array();
    for (const auto& b : u.background)
      bs.push_back({{"direction", std::string(to_string(b.direction))},
                    {"model", model_name(b.source.model)},
                    {"start_ms", b.source.start_ms},
                    {"pkt_bytes", b.source.pkt_bytes},
                    {"base_rtt_ms", b.base_rtt_ms},
                    {"initial_window", b.source.initial_window}});
    ju["background"] = bs;
    ues.push_back(ju);
  }
  j["ues"] = ues;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------- presets

namespace {

ZoomFlowSpec zoom_flow(Direction d) {
  ZoomFlowSpec z;
  z.direction = d;
  return z;
}

BackgroundFlowSpec bulk(Direction d, double start_ms) {
  BackgroundFlowSpec b;
  b.direction = d;
  b.source.model = BackgroundModel::BulkAimd;
  b.source.start_ms = start_ms;
  // Stands in for connections already past slow start when the call begins.
  b.source.initial_window = 100.0;
  return b;
}

}  // namespace

ScenarioConfig builtin_preset(int n) {
  ScenarioConfig c;
  c.assert_congestion = true;
  c.receiver.frame_hold_ms = 150.0;
  const Direction DL = Direction::Downlink, UL = Direction::Uplink;
  auto ue = [](double snr) {
    UeSpec u;
    u.snr_db = snr;
    return u;
  };
  // The Zoom UE shares its modem and DRBs with one TCP download; the other
  // TCP flows sit on their own UEs.
  switch (n) {
    case 1: {
      c.name = "preset1_1dl_4db_7tcp";
      UeSpec z = ue(4.0);
      z.zoom.push_back(zoom_flow(DL));
      z.background.push_back(bulk(DL, 0.0));
      c.ues.push_back(z);
      for (int i = 0; i < 6; ++i) {
        UeSpec b = ue(12.0);
        b.background.push_back(bulk(DL, 0.0));
        c.ues.push_back(b);
      }
      break;
    }
    case 2: {
      c.name = "preset2_3dl_4_12_25db_7tcp";
      for (double snr : {4.0, 12.0, 25.0}) {
        UeSpec z = ue(snr);
        z.zoom.push_back(zoom_flow(DL));
        z.background.push_back(bulk(DL, 0.0));
        c.ues.push_back(z);
      }
      for (int i = 0; i < 4; ++i) {
        UeSpec b = ue(12.0);
        b.background.push_back(bulk(DL, 0.0));
        c.ues.push_back(b);
      }
      break;
    }
    case 3: {
      c.name = "preset3_1ul_4db_3tcp";
      UeSpec z = ue(4.0);
      z.zoom.push_back(zoom_flow(UL));
      z.background.push_back(bulk(UL, 0.0));
      c.ues.push_back(z);
      for (int i = 0; i < 2; ++i) {
        UeSpec b = ue(12.0);
        b.background.push_back(bulk(UL, 0.0));
        c.ues.push_back(b);
      }
      break;
    }
    case 4: {
      c.name = "preset4_3ul_4_12_25db_3tcp";
      for (double snr : {4.0, 12.0, 25.0}) {
        UeSpec z = ue(snr);
        z.zoom.push_back(zoom_flow(UL));
        z.background.push_back(bulk(UL, 0.0));
        c.ues.push_back(z);
      }
      break;
    }
    case 5: {
      c.name = "preset5_3bidir_hetero_7dl_3ul_tcp";
      for (double snr : {4.0, 12.0, 25.0}) {
        UeSpec z = ue(snr);
        z.zoom.push_back(zoom_flow(DL));
        z.zoom.push_back(zoom_flow(UL));
        z.background.push_back(bulk(DL, 0.0));
        z.background.push_back(bulk(UL, 0.0));
        c.ues.push_back(z);
      }
      for (int i = 0; i < 4; ++i) {
        UeSpec b = ue(12.0);
        b.background.push_back(bulk(DL, 0.0));
        c.ues.push_back(b);
      }
      break;
    }
    default:
      throw ConfigError("preset must be 1..5, got " + std::to_string(n));
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------- run loop

LatencyStats latency_stats(std::vector<double> s) {
  LatencyStats st;
  st.count = s.size();
  if (s.empty()) return st;
  std::sort(s.begin(), s.end());
  st.mean_ms = std::accumulate(s.begin(), s.end(), 0.0) / s.size();
  auto pct = [&](double q) {
    const size_t idx = static_cast<size_t>(std::ceil(q * s.size())) - 1;
    return s[std::min(idx, s.size() - 1)];
  };
  st.p50_ms = pct(0.50);
  st.p99_ms = pct(0.99);
  st.max_ms = s.back();
  return st;
}

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct ZoomRuntime {
  std::unique_ptr<ZoomSource> src;
  uint32_t flow = 0;
  uint32_t ue = 0;
  Direction dir = Direction::Downlink;
  // Receiver-side views, keyed by the time the sender learns about them.
  std::deque<std::pair<double, bool>> probe_events;  // (t, delivered)
  std::deque<std::pair<double, double>> media_recv;  // (recv, one-way delay)
  std::optional<std::pair<double, double>> last_media;
  std::optional<double> first_media_sent;
  std::vector<ReceivedPacket> received;
  uint64_t offered_bytes = 0;
  uint64_t delivered_bytes = 0;
  uint64_t sent_after_start = 0;

  ZoomFeedback feedback(double now) {
    while (!probe_events.empty() && probe_events.front().first <= now - 1000.0)
      probe_events.pop_front();
    size_t got = 0, total = 0;
    for (const auto& [t, ok] : probe_events) {
      if (t > now) continue;
      ++total;
      got += ok ? 1 : 0;
    }
    ZoomFeedback fb;
    fb.probe_delivery_ratio = total ? static_cast<double>(got) / total : 1.0;

    while (!media_recv.empty() && media_recv.front().first <= now - 500.0) {
      last_media = media_recv.front();
      media_recv.pop_front();
    }
    double sum = 0.0;
    size_t n = 0;
    for (const auto& [t, d] : media_recv) {
      if (t > now) continue;
      sum += d;
      ++n;
      last_media = std::make_pair(t, d);
    }
    if (n > 0) {
      fb.recent_delay_ms = sum / n;
    } else if (last_media) {
      fb.recent_delay_ms = std::max(last_media->second, now - last_media->first);
    } else if (first_media_sent) {
      fb.recent_delay_ms = now - *first_media_sent;
    }
    return fb;
  }
};

struct BackgroundEvent {
  double t = 0.0;
  uint64_t acked = 0;
  uint32_t lost = 0;
  std::optional<double> rtt;
};

struct BackgroundRuntime {
  std::unique_ptr<BackgroundSource> src;
  uint32_t flow = 0;
  uint32_t ue = 0;
  Direction dir = Direction::Downlink;
  double base_rtt_ms = 30.0;
  std::deque<BackgroundEvent> pending;  // nondecreasing t
  uint64_t offered_bytes = 0;
  uint64_t delivered_bytes = 0;

  void push(BackgroundEvent e) {
    // Keep ordered; events are produced nearly in time order.
    auto it = pending.end();
    while (it != pending.begin() && std::prev(it)->t > e.t) --it;
    pending.insert(it, e);
  }
  BackgroundFeedback collect(double now) {
    BackgroundFeedback fb;
    while (!pending.empty() && pending.front().t <= now) {
      const auto& e = pending.front();
      fb.acked_bytes += e.acked;
      fb.loss_events += e.lost;
      if (e.rtt) fb.rtt_sample_ms = e.rtt;
      pending.pop_front();
    }
    return fb;
  }
};

struct Outputs {
  std::ofstream trace, monitor, decisions, prb;
  bool trace_on = false, monitor_on = false, prb_on = false;
};

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

class Simulation {
 public:
  Simulation(const ScenarioConfig& cfg, const std::optional<std::filesystem::path>& out)
      : cfg_(cfg),
        out_dir_(out),
        dpi_(registry_.get(cfg.dpi_app)),
        cell_(cfg.cell, mix_seed(cfg.seed, 0)),
        monitor_(monitor_config(cfg), dpi_, cfg.ues.size()) {
    ControllerParams params = cfg.controller;
    // Zero weight on fairness means Zoom is never prioritized.
    if (params.beta == 0.0) params.candidates = {kNoPriority};
    if (cfg.baseline.kind == BaselineKind::StreamGuard) {
      IntervalGeometry g;
      g.prbs_per_slot = cfg.cell.prbs_per_slot;
      g.slot_ms = cfg.cell.slot_ms;
      g.interval_ms = params.interval_ms;
      controller_.emplace(params, g);
    } else {
      marker_.emplace(cfg.baseline);
    }
    interval_slots_ = std::max<uint64_t>(
        1, static_cast<uint64_t>(std::llround(params.interval_ms / cfg.cell.slot_ms)));

    uint32_t flow = 0;
    uint64_t stream = 1;
    for (uint32_t u = 0; u < cfg.ues.size(); ++u) {
      const UeSpec& spec = cfg.ues[u];
      cell_.add_ue(spec.snr_db);
      for (const auto& z : spec.zoom) {
        ZoomRuntime rt;
        rt.flow = flow;
        rt.ue = u;
        rt.dir = z.direction;
        rt.src = std::make_unique<ZoomSource>(z.source, flow, u, z.direction,
                                              static_cast<uint16_t>(50000 + flow),
                                              mix_seed(cfg.seed, stream++));
        flow_slot_[flow] = {true, zoom_.size()};
        zoom_.push_back(std::move(rt));
        has_dir_[z.direction == Direction::Downlink ? 0 : 1] = true;
        ++flow;
      }
      for (const auto& b : spec.background) {
        BackgroundRuntime rt;
        rt.flow = flow;
        rt.ue = u;
        rt.dir = b.direction;
        rt.base_rtt_ms = b.base_rtt_ms;
        rt.src = std::make_unique<BackgroundSource>(b.source, flow, u, b.direction,
                                                    static_cast<uint16_t>(40000 + flow),
                                                    mix_seed(cfg.seed, stream++));
        flow_slot_[flow] = {false, background_.size()};
        background_.push_back(std::move(rt));
        bg_dir_[b.direction == Direction::Downlink ? 0 : 1] = true;
        ++flow;
      }
      snr_next_.push_back(0);
    }
    if (out_dir_) open_outputs();
  }

  RunReport run();

 private:
  static MonitorConfig monitor_config(const ScenarioConfig& cfg) {
    MonitorConfig m;
    m.k1_slots = cfg.cell.k1_slots;
    m.slot_ms = cfg.cell.slot_ms;
    return m;
  }

  void open_outputs() {
    std::filesystem::create_directories(*out_dir_);
    const auto& o = cfg_.outputs;
    if (o.trace) {
      out_.trace = open_out(*out_dir_ / "trace.csv");
      out_.trace << trace_csv_header() << '\n';
      out_.trace_on = true;
    }
    if (o.monitor) {
      out_.monitor = open_out(*out_dir_ / "monitor.csv");
      write_monitor_csv_header(out_.monitor);
      out_.monitor_on = true;
    }
    if (o.prb_log) {
      out_.prb = open_out(*out_dir_ / "prb_log.csv");
      write_prb_log_header(out_.prb);
      out_.prb_on = true;
    }
  }

  void trace(const SimPacket& p, PacketFate fate) {
    if (out_.trace_on) write_trace_row(out_.trace, TraceRecord{p, fate});
  }

  PriorityClass classify_and_mark(const SimPacket& p, double now) {
    const SubflowKind kind = dpi_.classify(p);
    if (marker_) return marker_->mark(p, kind, now);
    auto it = decisions_.find(p.flow);
    if (it == decisions_.end()) {
      FlowDecision warm;  // warm-up action before the first decision
      warm.action = kPrioritizeAll;
      return mark(kind, warm);
    }
    return mark(kind, it->second);
  }

  void on_dropped(const SimPacket& p, PacketFate fate, double now);
  void on_delivered(const SimPacket& p, double now);
  void admit(SimPacket p, double now);
  void update_snr(double now);

  const ScenarioConfig& cfg_;
  std::optional<std::filesystem::path> out_dir_;
  DpiRegistry registry_;
  const DpiPlugin& dpi_;
  Cell cell_;
  Monitor monitor_;
  std::optional<Controller> controller_;
  std::optional<BaselineMarker> marker_;
  std::map<uint32_t, FlowDecision> decisions_;
  uint64_t interval_slots_ = 50;
  std::vector<ZoomRuntime> zoom_;
  std::vector<BackgroundRuntime> background_;
  std::map<uint32_t, std::pair<bool, size_t>> flow_slot_;  // flow -> (zoom?, index)
  std::vector<size_t> snr_next_;
  std::deque<SimPacket> pending_acks_;  // downlink, by ack time
  std::array<bool, 2> has_dir_{};
  std::array<bool, 2> bg_dir_{};
  uint64_t next_packet_id_ = 0;
  Outputs out_;
};

void Simulation::update_snr(double now) {
  for (uint32_t u = 0; u < cfg_.ues.size(); ++u) {
    const auto& tr = cfg_.ues[u].snr_trace;
    size_t& k = snr_next_[u];
    bool changed = false;
    while (k < tr.size() && tr[k].t_ms <= now) {
      ++k;
      changed = true;
    }
    if (changed) cell_.set_snr(u, tr[k - 1].snr_db);
  }
}

void Simulation::on_dropped(const SimPacket& p, PacketFate fate, double now) {
  trace(p, fate);
  const auto [is_zoom, idx] = flow_slot_.at(p.flow);
  if (is_zoom) {
    if (p.kind == SubflowKind::Probe) zoom_[idx].probe_events.emplace_back(now, false);
  } else {
    auto& bg = background_[idx];
    bg.push({now + bg.base_rtt_ms, 0, 1, std::nullopt});
  }
}

void Simulation::on_delivered(const SimPacket& p, double now) {
  trace(p, PacketFate::Delivered);
  const double recv = p.direction == Direction::Downlink
                          ? *p.stamps.phy_deliver_ms
                          : *p.stamps.phy_deliver_ms + cfg_.core_delay_ms;
  const auto [is_zoom, idx] = flow_slot_.at(p.flow);
  if (is_zoom) {
    auto& z = zoom_[idx];
    z.delivered_bytes += p.size_bytes;
    if (p.kind == SubflowKind::Probe) z.probe_events.emplace_back(recv, true);
    if (p.rtp && (p.kind == SubflowKind::Audio || is_video(p.kind))) {
      const double emit = p.stamps.app_emit_ms.value_or(now);
      // The video rate controller only sees its own packets' delay.
      if (is_video(p.kind)) z.media_recv.emplace_back(recv, recv - emit);
      if (recv <= cfg_.duration_ms()) {
        ReceivedPacket rp;
        rp.kind = p.kind;
        rp.frame_id = p.rtp->frame_id;
        rp.rtp_timestamp = p.rtp->timestamp;
        rp.emit_ms = emit;
        rp.recv_ms = recv;
        z.received.push_back(rp);
      }
    }
  } else {
    auto& bg = background_[idx];
    bg.delivered_bytes += p.size_bytes;
    const double ack_at = recv + bg.base_rtt_ms;
    bg.push({ack_at, p.size_bytes, 0, ack_at - p.stamps.app_emit_ms.value_or(now)});
  }
}

void Simulation::admit(SimPacket p, double now) {
  p.id = next_packet_id_++;
  if (!p.stamps.app_emit_ms) p.stamps.app_emit_ms = now;
  const auto [is_zoom, idx] = flow_slot_.at(p.flow);
  if (is_zoom) {
    auto& z = zoom_[idx];
    z.offered_bytes += p.size_bytes;
    if (now >= cfg_.qoe_start_ms) z.sent_after_start += p.size_bytes;
    if (is_video(p.kind) && !z.first_media_sent)
      z.first_media_sent = now;
  } else {
    background_[idx].offered_bytes += p.size_bytes;
  }
  EnqueueOutcome r;
  if (p.direction == Direction::Downlink) {
    monitor_.on_dl_ingress(p, now);
    const PriorityClass pc = classify_and_mark(p, now);
    r = cell_.enqueue_downlink(std::move(p), pc, now);
  } else {
    monitor_.on_ul_shim(p, now);
    const PriorityClass pc = classify_and_mark(p, now);
    r = cell_.enqueue_uplink(std::move(p), pc, now);
  }
  if (r.fate != PacketFate::Queued) on_dropped(r.packet, r.fate, now);
}

RunReport Simulation::run() {
  const double slot_ms = cfg_.cell.slot_ms;
  const uint64_t slots = static_cast<uint64_t>(std::llround(cfg_.duration_ms() / slot_ms));
  uint64_t congested = 0, measured = 0;

  for (uint64_t s = 0; s < slots; ++s) {
    const double now = s * slot_ms;
    update_snr(now);

    for (auto& z : zoom_)
      for (auto& p : z.src->zoom_step(now, z.feedback(now))) admit(std::move(p), now);
    for (auto& b : background_)
      for (auto& p : b.src->background_step(now, b.collect(now))) admit(std::move(p), now);

    if (s % cfg_.cell.bsr_period_slots == 0)
      for (uint32_t u = 0; u < cell_.num_ues(); ++u) monitor_.on_bsr(u, cell_.emit_bsr(u, now));

    SlotResult res = cell_.schedule_slot(now);
    monitor_.on_slot(res, cell_);
    for (auto& p : res.dl_delivered) {
      on_delivered(p, now);
      pending_acks_.push_back(std::move(p));
    }
    for (auto& p : res.ul_delivered) {
      monitor_.on_ul_arrival(p, *p.stamps.phy_deliver_ms);
      on_delivered(p, now);
    }
    for (auto& p : res.lost) on_dropped(p, PacketFate::LostOnAir, now);
    while (!pending_acks_.empty() && *pending_acks_.front().stamps.ack_ms <= now + slot_ms) {
      monitor_.on_dl_ack(pending_acks_.front());
      pending_acks_.pop_front();
    }
    if (out_.prb_on) write_prb_log_rows(out_.prb, res);

    if (now >= cfg_.qoe_start_ms) {
      ++measured;
      bool c = true;
      if (bg_dir_[0]) c = c && res.low_backlog_dl;
      if (bg_dir_[1]) c = c && res.low_backlog_ul;
      if (c) ++congested;
    }

    if ((s + 1) % interval_slots_ == 0) {
      const double t_end = now + slot_ms;
      const MonitorReport rep = monitor_.snapshot(t_end);
      if (out_.monitor_on) write_monitor_csv_rows(out_.monitor, rep);
      if (controller_)
        for (const auto& d : controller_->decide(rep)) decisions_[d.flow] = d;
    }
  }

  // Packets still queued at the end.
  if (out_.trace_on) {
    for (uint32_t u = 0; u < cell_.num_ues(); ++u) {
      const auto& st = cell_.ue(u);
      for (const auto* qs : {&st.dl, &st.ul})
        for (const auto& q : *qs)
          for (const auto& qp : q.fifo) trace(qp.pkt, PacketFate::Queued);
    }
  }

  RunReport rep;
  rep.baseline = cfg_.baseline.str();
  rep.counters = cell_.counters();
  rep.congested_fraction = measured ? static_cast<double>(congested) / measured : 0.0;
  rep.congestion_ok = rep.congested_fraction >= cfg_.congestion_min_fraction;
  const double end = cfg_.duration_ms();
  const double start = cfg_.qoe_start_ms;
  const double span_s = (end - start) / 1000.0;
  ReceiverConfig rc;
  rc.playout_offset_ms = cfg_.receiver.playout_offset_ms;
  rc.frame_hold_ms = cfg_.receiver.frame_hold_ms;
  for (auto& z : zoom_) {
    ZoomFlowResult r;
    r.ue = z.ue;
    r.flow = z.flow;
    r.direction = z.dir;
    r.offered_bytes = z.offered_bytes;
    r.delivered_bytes = z.delivered_bytes;
    r.send_rate_bps = z.sent_after_start * 8.0 / span_s;
    rc.audio_rate_hz = z.src->config().audio_sample_rate_hz;
    std::vector<ReceivedPacket> scored;
    for (const auto& p : z.received)
      if (p.emit_ms >= start) scored.push_back(p);
    const GroundTruthLog& truth = z.src->ground_truth();
    r.inputs = build_qoe_inputs(scored, truth, start, end, rc);
    r.score = composite(r.inputs);

    // Base frames that reach the screen, as the viewer sees them.
    std::vector<uint64_t> shown;
    render_timeline(scored, truth, rc, nullptr, &shown);
    std::set<uint64_t> base_ids;
    for (const auto& f : truth.frames)
      if (f.emitted && !is_enhancement(f.layer)) base_ids.insert(f.frame_id);
    size_t complete = 0;
    for (uint64_t id : shown) complete += base_ids.count(id);
    r.delivered_base_fps = complete / span_s;
    rep.qoe_sum += r.score.total();
    rep.zoom.push_back(std::move(r));
  }
  for (auto& b : background_) {
    BackgroundResult r;
    r.ue = b.ue;
    r.flow = b.flow;
    r.direction = b.dir;
    r.offered_bytes = b.offered_bytes;
    r.delivered_bytes = b.delivered_bytes;
    r.goodput_bps = b.delivered_bytes * 8.0 / cfg_.duration_s;
    rep.goodput_sum_bps += r.goodput_bps;
    rep.background.push_back(r);
  }
  if (controller_) {
    rep.decisions = controller_->log();
    rep.solver = latency_stats(controller_->solve_times_ms());
  }

  if (out_dir_) {
    const auto& o = cfg_.outputs;
    if (o.decisions) {
      auto f = open_out(*out_dir_ / "decisions.csv");
      write_decision_log_header(f);
      for (const auto& row : rep.decisions) write_decision_log_row(f, row, cfg_.controller.record_timing);
    }
    if (o.qoe) {
      auto f = open_out(*out_dir_ / "qoe.csv");
      write_qoe_csv_header(f);
      for (const auto& z : rep.zoom) write_qoe_csv_row(f, z.ue, z.flow, z.direction, z.inputs, z.score);
    }
    if (o.goodput) {
      auto f = open_out(*out_dir_ / "goodput.csv");
      f << "ue,flow,direction,offered_bytes,delivered_bytes,goodput_bps\n";
      for (const auto& b : rep.background)
        f << b.ue << ',' << b.flow << ',' << to_string(b.direction) << ',' << b.offered_bytes
          << ',' << b.delivered_bytes << ',' << csv::fmt(b.goodput_bps, 1) << '\n';
    }
    if (o.ground_truth) {
      auto gt = open_out(*out_dir_ / "ground_truth.csv");
      auto rs = open_out(*out_dir_ / "rate_series.csv");
      bool first = true;
      for (const auto& z : zoom_) {
        write_ground_truth_csv(gt, z.flow, z.src->ground_truth(), first);
        write_rate_series_csv(rs, z.flow, z.src->ground_truth(), first);
        first = false;
      }
      if (first) {
        gt << "flow,frame_id,camera_pts_ms,emitted,rtp_timestamp,layer,resolution,"
              "ref_base_frame,packets,emit_ms\n";
        rs << "flow,t_ms,multiplier,send_rate_bps\n";
      }
    }
    auto f = open_out(*out_dir_ / "summary.json");
    write_summary_json(f, cfg_, rep);
  }
  return rep;
}

}  // namespace

RunReport run_scenario(const ScenarioConfig& cfg,
                       const std::optional<std::filesystem::path>& out_dir) {
  cfg.validate();
  Simulation sim(cfg, out_dir);
  return sim.run();
}

// ---------------------------------------------------------------- sweep

ScenarioConfig apply_sweep_point(ScenarioConfig cfg, const SweepPoint& p) {
  if (p.param == "alpha") {
    cfg.controller.alpha = p.value;
  } else if (p.param == "beta") {
    cfg.controller.beta = p.value;
  } else if (p.param == "probe_drop") {
    cfg.controller.forced_probe_drop = p.value;
  } else if (p.param == "seed") {
    if (!(p.value >= 0) || p.value != std::floor(p.value)) throw ConfigError("seed must be a non-negative integer");
    cfg.seed = static_cast<uint64_t>(p.value);
  } else {
    throw ConfigError("unknown sweep parameter: " + p.param);
  }
  cfg.validate();
  return cfg;
}

std::vector<SweepRow> run_sweep(const ScenarioConfig& base,
                                const std::vector<SweepPoint>& grid) {
  std::vector<SweepRow> rows;
  for (const auto& pt : grid) {
    SweepRow row;
    row.point = pt;
    try {
      row.report = run_scenario(apply_sweep_point(base, pt));
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "param,value,status,qoe_sum,goodput_sum_bps,congested_fraction,error\n";
  for (const auto& r : rows) {
    os << r.point.param << ',' << csv::fmt(r.point.value, 4) << ',' << (r.ok ? "ok" : "error") << ',';
    if (r.ok) {
      os << csv::fmt(r.report.qoe_sum, 3) << ',' << csv::fmt(r.report.goodput_sum_bps, 1) << ','
         << csv::fmt(r.report.congested_fraction, 4) << ',';
    } else {
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      os << ",,," << msg;
    }
    os << '\n';
  }
}

void write_summary_json(std::ostream& os, const ScenarioConfig& cfg, const RunReport& r) {
  json j;
  j["name"] = cfg.name;
  j["baseline"] = r.baseline;
  j["seed"] = cfg.seed;
  j["duration_s"] = cfg.duration_s;
  j["core_delay_ms"] = cfg.core_delay_ms;
  j["qoe_start_ms"] = cfg.qoe_start_ms;
  j["receiver"] = {{"playout_offset_ms", cfg.receiver.playout_offset_ms},
                   {"frame_hold_ms", cfg.receiver.frame_hold_ms}};
  j["qoe_sum"] = std::round(r.qoe_sum * 1000.0) / 1000.0;
  j["goodput_sum_bps"] = std::round(r.goodput_sum_bps);
  j["congested_fraction"] = std::round(r.congested_fraction * 10000.0) / 10000.0;
  j["congestion_ok"] = r.congestion_ok;
  json zs = json::array();
  for (const auto& z : r.zoom)
    zs.push_back({{"ue", z.ue},
                  {"flow", z.flow},
                  {"direction", std::string(to_string(z.direction))},
                  {"qoe", std::round(z.score.total() * 1000.0) / 1000.0},
                  {"delivered_base_fps", std::round(z.delivered_base_fps * 1000.0) / 1000.0},
                  {"send_rate_bps", std::round(z.send_rate_bps)}});
  j["zoom"] = zs;
  json solver = {{"decisions", r.solver.count}};
  if (cfg.controller.record_timing) {
    solver["mean_ms"] = r.solver.mean_ms;
    solver["p50_ms"] = r.solver.p50_ms;
    solver["p99_ms"] = r.solver.p99_ms;
    solver["max_ms"] = r.solver.max_ms;
  }
  j["solver"] = solver;
  os << j.dump(2) << '\n';
}

}  // namespace streamguard
