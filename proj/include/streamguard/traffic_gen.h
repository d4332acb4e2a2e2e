#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "streamguard/packet_model.h"

namespace streamguard {

// Piecewise-linear map clamped to its first/last value outside the knots.
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;
  // Throws std::invalid_argument unless knots are strictly increasing in x.
  explicit PiecewiseLinear(std::vector<std::pair<double, double>> knots);

  double operator()(double x) const;
  bool non_decreasing() const;
  bool non_increasing() const;
  const std::vector<std::pair<double, double>>& knots() const { return knots_; }

 private:
  std::vector<std::pair<double, double>> knots_;
};

struct PacketSizing {
  uint32_t packets = 1;
  uint32_t bytes = 1000;
  uint32_t jitter_bytes = 0;  // uniform +/- jitter per packet
};

struct ZoomSourceConfig {
  double start_ms = 0.0;
  double audio_interval_ms = 20.0;
  double audio_sample_rate_hz = 48000.0;
  uint32_t audio_pkt_bytes = 160;
  double frame_interval_ms = 33.0;
  double video_sample_rate_hz = 90000.0;
  double base_fps_target = 8.0;
  double enh_fps_target = 16.0;
  PacketSizing base{3, 1000, 60};
  PacketSizing enh{5, 1100, 60};
  SubflowKind enh_kind = SubflowKind::HighFpsEnhancement;
  double probe_duration_ms = 2000.0;
  double probe_rate_pps = 100.0;
  double probe_steady_rate_pps = 20.0;
  uint32_t probe_pkt_bytes = 1200;
  double control_interval_ms = 500.0;
  uint32_t control_pkt_bytes = 120;
  // Probe delivery ratio -> sending-rate multiplier.
  PiecewiseLinear rate_curve{{{0.0, 0.3}, {0.5, 0.6}, {1.0, 1.0}}};
  // Recent one-way delay (ms) -> sending-rate multiplier.
  PiecewiseLinear congestion_backoff{
      {{0.0, 1.0}, {150.0, 1.0}, {400.0, 0.5}, {1000.0, 0.25}}};
  // Camera frames carry PTS = frame tick - capture_lag_ms.
  double capture_lag_ms = 7.0;
};

struct ZoomFeedback {
  double probe_delivery_ratio = 1.0;
  double recent_delay_ms = 0.0;
};

// Resolution the encoder selects for a given rate multiplier.
int resolution_for_multiplier(double m);

struct FrameTruth {
  uint64_t frame_id = 0;  // camera frame index within the flow
  double camera_pts_ms = 0.0;
  bool emitted = false;
  uint32_t rtp_timestamp = 0;
  SubflowKind layer = SubflowKind::Base;
  int resolution = 0;
  std::optional<uint64_t> ref_base_frame;  // enhancement frames only
  uint32_t packets = 0;
  double emit_ms = 0.0;
};

struct RateSample {
  double t_ms = 0.0;
  double multiplier = 1.0;
  double send_rate_bps = 0.0;
};

struct GroundTruthLog {
  std::vector<FrameTruth> frames;
  std::vector<RateSample> rates;
};

void write_ground_truth_csv(std::ostream& os, uint32_t flow,
                            const GroundTruthLog& log, bool header);
void write_rate_series_csv(std::ostream& os, uint32_t flow,
                           const GroundTruthLog& log, bool header);

struct GroundTruthRow {
  uint32_t flow = 0;
  FrameTruth frame;
};
std::vector<GroundTruthRow> read_ground_truth_csv(std::istream& is);

// Synthetic Zoom sender: audio, SVC video layers, probes and control chatter.
class ZoomSource {
 public:
  ZoomSource(ZoomSourceConfig cfg, uint32_t flow, uint32_t ue, Direction dir,
             uint16_t client_port, uint64_t seed);

  // Call once per slot with nondecreasing now_ms.
  std::vector<SimPacket> zoom_step(double now_ms, const ZoomFeedback& feedback);

  const GroundTruthLog& ground_truth() const { return truth_; }
  double current_multiplier() const { return multiplier_; }
  uint64_t bytes_sent() const { return bytes_sent_; }
  const ZoomSourceConfig& config() const { return cfg_; }
  uint32_t flow() const { return flow_; }
  uint32_t ue() const { return ue_; }
  Direction direction() const { return dir_; }

 private:
  SimPacket make_packet(double now_ms, SubflowKind kind, uint32_t size) const;
  uint32_t jittered(const PacketSizing& s);
  void emit_frame(double tick_ms, SubflowKind layer, std::vector<SimPacket>& out);

  ZoomSourceConfig cfg_;
  uint32_t flow_;
  uint32_t ue_;
  Direction dir_;
  uint16_t client_port_;
  std::mt19937_64 rng_;

  uint32_t audio_ts_base_;
  uint32_t video_ts_base_;
  uint16_t seq_audio_;
  uint16_t seq_base_;
  uint16_t seq_enh_;
  uint64_t next_audio_idx_ = 0;
  uint64_t next_tick_idx_ = 0;
  double probe_credit_ = 0.0;
  std::optional<double> last_step_ms_;
  double next_control_ms_;
  double base_credit_ = 1.0;  // first tick carries a base frame
  double enh_credit_ = 0.0;
  std::optional<uint64_t> last_base_frame_;
  double multiplier_ = 1.0;
  int resolution_ = 640;

  uint64_t bytes_sent_ = 0;
  uint64_t bytes_in_sample_ = 0;
  double next_sample_ms_;
  GroundTruthLog truth_;
};

enum class BackgroundModel : uint8_t { BulkAimd, LightWeb };

struct BackgroundSourceConfig {
  BackgroundModel model = BackgroundModel::BulkAimd;
  double start_ms = 0.0;
  uint32_t pkt_bytes = 1400;
  double initial_window = 10.0;
  double additive_increase = 1.0;  // packets per window of ACKs
  double decrease_factor = 0.5;
  double min_window = 2.0;
  // LightWeb bursts.
  uint32_t burst_min_pkts = 10;
  uint32_t burst_max_pkts = 30;
  double burst_gap_min_ms = 1500.0;
  double burst_gap_max_ms = 4000.0;
};

struct BackgroundFeedback {
  uint64_t acked_bytes = 0;
  uint32_t loss_events = 0;  // lost packets reported this step
  std::optional<double> rtt_sample_ms;
};

// Adaptive background sender (AIMD bulk transfer or bursty light web).
class BackgroundSource {
 public:
  BackgroundSource(BackgroundSourceConfig cfg, uint32_t flow, uint32_t ue,
                   Direction dir, uint16_t client_port, uint64_t seed);

  std::vector<SimPacket> background_step(double now_ms,
                                         const BackgroundFeedback& fb);

  double window() const { return cwnd_; }
  uint64_t in_flight() const { return in_flight_; }
  uint64_t bytes_sent() const { return bytes_sent_; }
  uint32_t flow() const { return flow_; }
  uint32_t ue() const { return ue_; }
  Direction direction() const { return dir_; }
  const BackgroundSourceConfig& config() const { return cfg_; }

 private:
  SimPacket make_packet(double now_ms, bool syn);
  void on_feedback(double now_ms, const BackgroundFeedback& fb);

  BackgroundSourceConfig cfg_;
  uint32_t flow_;
  uint32_t ue_;
  Direction dir_;
  uint16_t port_;
  std::mt19937_64 rng_;

  double cwnd_;
  uint64_t in_flight_ = 0;
  uint64_t acked_in_window_ = 0;
  uint64_t ack_byte_remainder_ = 0;
  double srtt_ms_ = 40.0;
  double recovery_until_ms_ = -1.0;
  bool connected_ = false;
  uint64_t bytes_sent_ = 0;

  double next_burst_ms_;
  uint16_t burst_port_;
};

}  // namespace streamguard
