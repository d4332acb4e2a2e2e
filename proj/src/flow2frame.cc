#include "streamguard/flow2frame.h"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>

#include "streamguard/csv_util.h"

namespace streamguard {

LinkResult link_points(std::span<const double> cam_pts,
                       std::span<const double> abs_points) {
  LinkResult r;
  r.point_frame.resize(abs_points.size());
  std::vector<bool> sampled(cam_pts.size(), false);
  for (size_t i = 0; i < abs_points.size(); ++i) {
    const auto it = std::upper_bound(cam_pts.begin(), cam_pts.end(), abs_points[i]);
    if (it == cam_pts.begin()) continue;  // before the first frame
    const auto idx = static_cast<size_t>(it - cam_pts.begin()) - 1;
    r.point_frame[i] = idx;
    sampled[idx] = true;
  }
  r.tx_skipped.resize(cam_pts.size());
  for (size_t k = 0; k < cam_pts.size(); ++k) {
    r.tx_skipped[k] = !sampled[k];
    if (!sampled[k]) ++r.skipped_count;
  }
  return r;
}

double verify_alignment(const std::vector<bool>& tx_skipped,
                        const std::set<size_t>& rx_rendered,
                        size_t* false_positives) {
  size_t skipped = 0, fp = 0;
  for (size_t k = 0; k < tx_skipped.size(); ++k) {
    if (!tx_skipped[k]) continue;
    ++skipped;
    if (rx_rendered.count(k)) ++fp;
  }
  if (false_positives) *false_positives = fp;
  if (skipped == 0) return 1.0;
  return static_cast<double>(skipped - fp) / static_cast<double>(skipped);
}

AlignmentResult evaluate_delta(const AlignmentInput& in, int delta_ms) {
  std::vector<double> abs(in.rtp_points.size());
  for (size_t i = 0; i < abs.size(); ++i)
    abs[i] = in.cam_pts.front() + delta_ms + in.rtp_points[i];
  AlignmentResult r;
  r.best_delta_ms = delta_ms;
  r.link = link_points(in.cam_pts, abs);
  r.accuracy = verify_alignment(r.link.tx_skipped, in.rx_rendered, &r.false_positives);
  return r;
}

AlignmentResult align(const AlignmentInput& in) {
  if (in.cam_pts.size() < 2) throw std::invalid_argument("align: need two camera frames");
  if (in.rtp_points.empty()) throw std::invalid_argument("align: no RTP points");
  if (!std::is_sorted(in.rtp_points.begin(), in.rtp_points.end()))
    throw std::invalid_argument("align: RTP points must be sorted");
  const int span = static_cast<int>(std::ceil(in.cam_pts[1] - in.cam_pts[0]));
  AlignmentResult best;
  std::vector<size_t> fps;
  bool have = false;
  for (int d = 0; d < std::max(span, 1); ++d) {
    AlignmentResult r = evaluate_delta(in, d);
    fps.push_back(r.false_positives);
    if (!have || r.accuracy >= best.accuracy) {
      best = std::move(r);
      have = true;
    }
  }
  best.false_positives_by_delta = std::move(fps);
  return best;
}

const char* to_string(MissingCause c) {
  switch (c) {
    case MissingCause::SkippedAtSender: return "skipped_at_sender";
    case MissingCause::LostInNetwork: return "lost_in_network";
    case MissingCause::DroppedAtReceiver: return "dropped_at_receiver";
  }
  return "?";
}

MissingCause classify_missing(size_t frame, const AlignmentResult& a,
                              bool all_packets_delivered) {
  if (frame < a.link.tx_skipped.size() && a.link.tx_skipped[frame])
    return MissingCause::SkippedAtSender;
  if (!all_packets_delivered) return MissingCause::LostInNetwork;
  return MissingCause::DroppedAtReceiver;
}

SyntheticTrace make_synthetic_trace(uint64_t seed, const SyntheticTraceParams& p) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-p.camera_jitter_ms, p.camera_jitter_ms);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SyntheticTrace t;
  auto& cam = t.input.cam_pts;
  const double cam0 = 1000.0 + std::floor(unit(rng) * 1000.0);
  for (size_t i = 0; i < p.frames; ++i)
    cam.push_back(cam0 + i * p.camera_period_ms + (i == 0 ? 0.0 : jitter(rng)));
  // Sender clock starts on a whole millisecond inside the first frame gap.
  const int span = static_cast<int>(std::floor(cam[1] - cam[0]));
  t.true_delta_ms = static_cast<int>(unit(rng) * span) % std::max(span, 1);
  const double first = cam0 + t.true_delta_ms;

  std::vector<bool> sampled(cam.size(), false);
  for (size_t k = 0;; ++k) {
    const double s = first + k * p.sample_period_ms;
    if (s > cam.back()) break;
    if (k > 0 && unit(rng) < p.skip_probability) continue;
    const auto it = std::upper_bound(cam.begin(), cam.end(), s);
    const auto idx = static_cast<size_t>(it - cam.begin()) - 1;
    t.input.rtp_points.push_back(s - first);
    t.true_point_frame.push_back(idx);
    sampled[idx] = true;
  }
  t.true_tx_skipped.resize(cam.size());
  for (size_t k = 0; k < cam.size(); ++k) {
    t.true_tx_skipped[k] = !sampled[k];
    if (sampled[k] && unit(rng) >= p.rx_loss_probability) t.input.rx_rendered.insert(k);
  }
  return t;
}

double mapping_agreement(const AlignmentResult& r, std::span<const size_t> truth) {
  if (truth.empty()) return 1.0;
  size_t same = 0;
  for (size_t i = 0; i < truth.size() && i < r.link.point_frame.size(); ++i)
    if (r.link.point_frame[i] && *r.link.point_frame[i] == truth[i]) ++same;
  return static_cast<double>(same) / static_cast<double>(truth.size());
}

void write_mapping_csv(std::ostream& os, const AlignmentInput& in,
                       const AlignmentResult& r,
                       const std::vector<std::optional<MissingCause>>& causes) {
  os << "frame,cam_pts_ms,delta_ms,sampled_by_point,rendered,cause\n";
  std::vector<std::optional<size_t>> by_frame(in.cam_pts.size());
  for (size_t i = 0; i < r.link.point_frame.size(); ++i)
    if (r.link.point_frame[i] && !by_frame[*r.link.point_frame[i]])
      by_frame[*r.link.point_frame[i]] = i;
  for (size_t k = 0; k < in.cam_pts.size(); ++k) {
    os << k << ',' << csv::fmt(in.cam_pts[k]) << ',' << r.best_delta_ms << ',';
    if (by_frame[k]) os << *by_frame[k];
    os << ',' << (in.rx_rendered.count(k) ? 1 : 0) << ',';
    if (k < causes.size() && causes[k]) os << to_string(*causes[k]);
    os << '\n';
  }
}

}  // namespace streamguard
