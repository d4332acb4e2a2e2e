#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "streamguard/packet_model.h"
#include "streamguard/traffic_gen.h"

namespace streamguard {

enum class MediaStream : uint8_t { Audio, Video };

// 25 * min(1, (threshold / (delay + jitter))^0.5); threshold 150 ms audio,
// 400 ms video.
double score_delay(MediaStream stream, double mean_delay_ms, double mean_jitter_ms);

double score_fps_stats(double mean_fps, double stddev_fps);
// Population mean and standard deviation of the series. Throws on empty input.
double score_fps(std::span<const double> fps_series);

// Frames rendered inside each [t, t + window) for t = start, start + step, ...
// while t + window <= end.
std::vector<double> fps_series(std::span<const double> render_ms, double start_ms,
                               double end_ms, double window_ms = 1000.0,
                               double step_ms = 300.0);

struct RenderedFrame {
  double t_ms = 0.0;
  int resolution = 640;
};

double resolution_weight(int resolution);

// frozen[i] is true when the display time of frame i (until the next frame,
// or until session_end for the last one) reaches max(3 * m, m + 150), m being
// the mean of up to 30 preceding display times.
std::vector<bool> detect_freezes(std::span<const RenderedFrame> frames,
                                 double session_end_ms);

double score_resolution(std::span<const RenderedFrame> frames,
                        const std::vector<bool>& frozen, double session_start_ms,
                        double session_end_ms);

struct QoeInputs {
  double audio_delay_ms = 0.0;
  double audio_jitter_ms = 0.0;
  double video_delay_ms = 0.0;
  double video_jitter_ms = 0.0;
  std::vector<double> fps;
  std::vector<RenderedFrame> frames;
  double session_start_ms = 0.0;
  double session_end_ms = 0.0;
};

struct QoeScore {
  double audio = 0.0;
  double video = 0.0;
  double fps = 0.0;
  double resolution = 0.0;
  double total() const { return audio + video + fps + resolution; }
};

QoeScore composite(const QoeInputs& in);

// Interarrival jitter estimate, J += (|D| - J) / 16.
class JitterEstimator {
 public:
  void update(double arrival_ms, double media_ms);
  double value() const { return jitter_; }

 private:
  std::optional<double> last_transit_;
  double jitter_ = 0.0;
};

struct ReceivedPacket {
  SubflowKind kind = SubflowKind::Audio;
  uint64_t frame_id = 0;
  uint32_t rtp_timestamp = 0;
  double emit_ms = 0.0;
  double recv_ms = 0.0;
};

struct ReceiverConfig {
  double audio_rate_hz = 48000.0;
  double playout_offset_ms = 0.0;
  // 0: frames render as they complete. Otherwise frames decode in frame order
  // and the decoder waits up to this long after the first packet of a frame
  // before giving up on it, holding every later frame meanwhile.
  double frame_hold_ms = 0.0;
};

// Without a hold, renders complete frames in completion order; a frame is
// skipped when a later one is already on screen. With a hold, frames released
// at the same instant show only the newest. Enhancement frames need their base.
std::vector<RenderedFrame> render_timeline(std::span<const ReceivedPacket> pkts,
                                           const GroundTruthLog& truth,
                                           const ReceiverConfig& cfg,
                                           std::vector<double>* frame_delays = nullptr,
                                           std::vector<uint64_t>* rendered_ids = nullptr);

QoeInputs build_qoe_inputs(std::span<const ReceivedPacket> pkts,
                           const GroundTruthLog& truth, double session_start_ms,
                           double session_end_ms, const ReceiverConfig& cfg = {});

void write_qoe_csv_header(std::ostream& os);
void write_qoe_csv_row(std::ostream& os, uint32_t ue, uint32_t flow,
                       Direction dir, const QoeInputs& in, const QoeScore& s);

}  // namespace streamguard
