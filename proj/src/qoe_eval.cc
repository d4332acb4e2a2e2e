#include "streamguard/qoe_eval.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "streamguard/csv_util.h"

namespace streamguard {

double score_delay(MediaStream stream, double mean_delay_ms, double mean_jitter_ms) {
  const double threshold = stream == MediaStream::Audio ? 150.0 : 400.0;
  const double eff = std::max(0.0, mean_delay_ms) + std::max(0.0, mean_jitter_ms);
  if (eff <= 0.0) return 25.0;
  return 25.0 * std::min(1.0, std::sqrt(threshold / eff));
}

double score_fps_stats(double mean_fps, double stddev_fps) {
  if (mean_fps <= 0.0) return 0.0;
  return 25.0 * std::min(1.0, mean_fps / 28.0) *
         std::max(0.0, 1.0 - 0.5 * stddev_fps / mean_fps);
}

double score_fps(std::span<const double> series) {
  if (series.empty()) throw std::invalid_argument("score_fps: empty series");
  const double n = static_cast<double>(series.size());
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / n;
  double var = 0.0;
  for (double x : series) var += (x - mean) * (x - mean);
  return score_fps_stats(mean, std::sqrt(var / n));
}

std::vector<double> fps_series(std::span<const double> render_ms, double start_ms,
                               double end_ms, double window_ms, double step_ms) {
  std::vector<double> sorted(render_ms.begin(), render_ms.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  for (double t = start_ms; t + window_ms <= end_ms + 1e-9; t += step_ms) {
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), t);
    const auto hi = std::lower_bound(sorted.begin(), sorted.end(), t + window_ms);
    out.push_back(static_cast<double>(hi - lo) * 1000.0 / window_ms);
  }
  return out;
}

double resolution_weight(int resolution) {
  if (resolution >= 640) return 1.0;
  if (resolution >= 480) return 0.6;
  if (resolution >= 320) return 0.3;
  return 0.0;
}

std::vector<bool> detect_freezes(std::span<const RenderedFrame> frames,
                                 double session_end_ms) {
  const size_t n = frames.size();
  std::vector<bool> frozen(n, false);
  std::vector<double> dur(n);
  for (size_t i = 0; i < n; ++i)
    dur[i] = (i + 1 < n ? frames[i + 1].t_ms : session_end_ms) - frames[i].t_ms;
  double window_sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const size_t k = std::min<size_t>(i, 30);
    if (k > 0) {
      const double mean = window_sum / static_cast<double>(k);
      frozen[i] = dur[i] >= std::max(3.0 * mean, mean + 150.0);
    }
    window_sum += dur[i];
    if (i >= 30) window_sum -= dur[i - 30];
  }
  return frozen;
}

double score_resolution(std::span<const RenderedFrame> frames,
                        const std::vector<bool>& frozen, double session_start_ms,
                        double session_end_ms) {
  const double total = session_end_ms - session_start_ms;
  if (total <= 0.0 || frames.empty()) return 0.0;
  double credit = 0.0;
  for (size_t i = 0; i < frames.size(); ++i) {
    if (i < frozen.size() && frozen[i]) continue;
    const double next = i + 1 < frames.size() ? frames[i + 1].t_ms : session_end_ms;
    const double from = std::max(frames[i].t_ms, session_start_ms);
    const double to = std::min(next, session_end_ms);
    if (to > from) credit += resolution_weight(frames[i].resolution) * (to - from);
  }
  return 25.0 * std::clamp(credit / total, 0.0, 1.0);
}

QoeScore composite(const QoeInputs& in) {
  QoeScore s;
  s.audio = score_delay(MediaStream::Audio, in.audio_delay_ms, in.audio_jitter_ms);
  s.video = score_delay(MediaStream::Video, in.video_delay_ms, in.video_jitter_ms);
  s.fps = in.fps.empty() ? 0.0 : score_fps(in.fps);
  const auto frozen = detect_freezes(in.frames, in.session_end_ms);
  s.resolution = score_resolution(in.frames, frozen, in.session_start_ms, in.session_end_ms);
  return s;
}

void JitterEstimator::update(double arrival_ms, double media_ms) {
  const double transit = arrival_ms - media_ms;
  if (last_transit_) jitter_ += (std::abs(transit - *last_transit_) - jitter_) / 16.0;
  last_transit_ = transit;
}

std::vector<RenderedFrame> render_timeline(std::span<const ReceivedPacket> pkts,
                                           const GroundTruthLog& truth,
                                           const ReceiverConfig& cfg,
                                           std::vector<double>* frame_delays,
                                           std::vector<uint64_t>* rendered_ids) {
  struct Arrivals {
    uint32_t count = 0;
    double first_ms = 0.0;
    double last_ms = 0.0;
  };
  std::map<uint64_t, Arrivals> got;
  for (const auto& p : pkts) {
    if (!is_video(p.kind)) continue;
    auto [it, fresh] = got.try_emplace(p.frame_id);
    auto& a = it->second;
    a.first_ms = fresh ? p.recv_ms : std::min(a.first_ms, p.recv_ms);
    a.last_ms = std::max(a.last_ms, p.recv_ms);
    ++a.count;
  }
  std::map<uint64_t, const FrameTruth*> by_id;
  for (const auto& f : truth.frames)
    if (f.emitted) by_id[f.frame_id] = &f;

  struct Done {
    double t;
    uint64_t id;
  };
  std::vector<Done> done;
  if (cfg.frame_hold_ms > 0.0) {
    // Decode order. A frame that is incomplete when the wait expires is
    // abandoned, but the wait still delays everything behind it.
    double cursor = -std::numeric_limits<double>::infinity();
    for (const auto& [id, a] : got) {
      auto it = by_id.find(id);
      if (it == by_id.end()) continue;
      const double give_up = a.first_ms + cfg.frame_hold_ms;
      if (a.count >= it->second->packets && a.last_ms <= give_up) {
        cursor = std::max(cursor, a.last_ms);
        done.push_back({cursor + cfg.playout_offset_ms, id});
      } else {
        cursor = std::max(cursor, give_up);
      }
    }
    // Of frames released together only the newest reaches the screen.
    std::vector<Done> shown;
    for (size_t i = 0; i < done.size(); ++i)
      if (i + 1 == done.size() || done[i + 1].t != done[i].t) shown.push_back(done[i]);
    done = std::move(shown);
  } else {
    for (const auto& [id, a] : got) {
      auto it = by_id.find(id);
      if (it == by_id.end() || a.count < it->second->packets) continue;
      done.push_back({a.last_ms + cfg.playout_offset_ms, id});
    }
    std::sort(done.begin(), done.end(), [](const Done& x, const Done& y) {
      return x.t != y.t ? x.t < y.t : x.id < y.id;
    });
  }

  std::vector<RenderedFrame> out;
  std::map<uint64_t, bool> base_shown;
  std::optional<uint64_t> newest;
  for (const auto& d : done) {
    const FrameTruth& f = *by_id[d.id];
    if (newest && d.id <= *newest) continue;  // stale
    if (is_enhancement(f.layer) &&
        (!f.ref_base_frame || !base_shown.count(*f.ref_base_frame)))
      continue;
    if (!out.empty() && d.t <= out.back().t_ms) continue;  // keep strictly increasing
    out.push_back({d.t, f.resolution});
    if (!is_enhancement(f.layer)) base_shown[d.id] = true;
    newest = d.id;
    if (frame_delays) frame_delays->push_back(d.t - f.emit_ms);
    if (rendered_ids) rendered_ids->push_back(d.id);
  }
  return out;
}

QoeInputs build_qoe_inputs(std::span<const ReceivedPacket> pkts,
                           const GroundTruthLog& truth, double session_start_ms,
                           double session_end_ms, const ReceiverConfig& cfg) {
  QoeInputs in;
  in.session_start_ms = session_start_ms;
  in.session_end_ms = session_end_ms;

  // Audio: per packet, in receive order.
  std::vector<const ReceivedPacket*> audio;
  for (const auto& p : pkts)
    if (p.kind == SubflowKind::Audio) audio.push_back(&p);
  std::stable_sort(audio.begin(), audio.end(),
                   [](auto* a, auto* b) { return a->recv_ms < b->recv_ms; });
  JitterEstimator aj;
  RtpUnwrapper unwrap;
  double dsum = 0.0, jsum = 0.0;
  for (const auto* p : audio) {
    const double play = p->recv_ms + cfg.playout_offset_ms;
    dsum += play - p->emit_ms;
    aj.update(play, rtp_ts_to_ms(static_cast<double>(unwrap.unwrap(p->rtp_timestamp)),
                                 cfg.audio_rate_hz));
    jsum += aj.value();
  }
  if (!audio.empty()) {
    in.audio_delay_ms = dsum / audio.size();
    in.audio_jitter_ms = jsum / audio.size();
  } else {
    in.audio_delay_ms = 1e9;  // nothing heard
  }

  std::vector<double> delays;
  in.frames = render_timeline(pkts, truth, cfg, &delays);
  if (!in.frames.empty()) {
    JitterEstimator vj;
    double vd = 0.0, vjs = 0.0;
    for (size_t i = 0; i < in.frames.size(); ++i) {
      vd += delays[i];
      vj.update(in.frames[i].t_ms, in.frames[i].t_ms - delays[i]);
      vjs += vj.value();
    }
    in.video_delay_ms = vd / in.frames.size();
    in.video_jitter_ms = vjs / in.frames.size();
  } else {
    in.video_delay_ms = 1e9;
  }
  std::vector<double> times;
  for (const auto& f : in.frames) times.push_back(f.t_ms);
  in.fps = fps_series(times, session_start_ms, session_end_ms);
  return in;
}

void write_qoe_csv_header(std::ostream& os) {
  os << "ue,flow,direction,audio_delay_ms,audio_jitter_ms,video_delay_ms,"
        "video_jitter_ms,mean_fps,rendered_frames,s_audio,s_video,s_fps,s_res,total\n";
}

void write_qoe_csv_row(std::ostream& os, uint32_t ue, uint32_t flow,
                       Direction dir, const QoeInputs& in, const QoeScore& s) {
  const double mean_fps =
      in.fps.empty() ? 0.0
                     : std::accumulate(in.fps.begin(), in.fps.end(), 0.0) / in.fps.size();
  os << ue << ',' << flow << ',' << to_string(dir) << ','
     << csv::fmt(std::min(in.audio_delay_ms, 1e6), 2) << ','
     << csv::fmt(in.audio_jitter_ms, 2) << ','
     << csv::fmt(std::min(in.video_delay_ms, 1e6), 2) << ','
     << csv::fmt(in.video_jitter_ms, 2) << ',' << csv::fmt(mean_fps, 2) << ','
     << in.frames.size() << ',' << csv::fmt(s.audio, 3) << ','
     << csv::fmt(s.video, 3) << ',' << csv::fmt(s.fps, 3) << ','
     << csv::fmt(s.resolution, 3) << ',' << csv::fmt(s.total(), 3) << '\n';
}

}  // namespace streamguard
