#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <vector>

namespace streamguard {

struct AlignmentInput {
  std::vector<double> cam_pts;     // increasing, ms
  std::vector<double> rtp_points;  // ms relative to the first point (first = 0)
  std::set<size_t> rx_rendered;    // camera frame indices seen at the receiver
};

struct LinkResult {
  std::vector<std::optional<size_t>> point_frame;  // per RTP point
  std::vector<bool> tx_skipped;                    // per camera frame
  size_t skipped_count = 0;
};

struct AlignmentResult {
  int best_delta_ms = 0;
  double accuracy = 0.0;
  size_t false_positives = 0;
  LinkResult link;
  std::vector<size_t> false_positives_by_delta;
};

// Each absolute point samples the latest camera frame at or before it.
LinkResult link_points(std::span<const double> cam_pts,
                       std::span<const double> abs_points);

// (|skipped| - false positives) / |skipped|, 1 when nothing is skipped.
// False positives are skipped frames that were rendered anyway.
double verify_alignment(const std::vector<bool>& tx_skipped,
                        const std::set<size_t>& rx_rendered,
                        size_t* false_positives = nullptr);

// Tries every whole-millisecond offset between the first two camera frames and
// keeps the last one reaching the best accuracy. Throws std::invalid_argument
// for fewer than two camera frames or no RTP points.
AlignmentResult align(const AlignmentInput& in);

AlignmentResult evaluate_delta(const AlignmentInput& in, int delta_ms);

enum class MissingCause : uint8_t { SkippedAtSender, LostInNetwork, DroppedAtReceiver };
const char* to_string(MissingCause c);

// For a camera frame absent at the receiver.
MissingCause classify_missing(size_t frame, const AlignmentResult& alignment,
                              bool all_packets_delivered);

struct SyntheticTraceParams {
  size_t frames = 600;
  double camera_period_ms = 1000.0 / 30.0;
  double camera_jitter_ms = 2.0;
  double sample_period_ms = 33.0;
  double skip_probability = 0.25;
  double rx_loss_probability = 0.03;
};

struct SyntheticTrace {
  AlignmentInput input;
  int true_delta_ms = 0;
  std::vector<size_t> true_point_frame;
  std::vector<bool> true_tx_skipped;
};

SyntheticTrace make_synthetic_trace(uint64_t seed, const SyntheticTraceParams& p = {});

// Fraction of RTP points linked to the same frame as the ground truth.
double mapping_agreement(const AlignmentResult& r, std::span<const size_t> truth);

void write_mapping_csv(std::ostream& os, const AlignmentInput& in,
                       const AlignmentResult& r,
                       const std::vector<std::optional<MissingCause>>& causes);

}  // namespace streamguard
