#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "streamguard/dpi.h"
#include "streamguard/packet_model.h"
#include "streamguard/ran_sim.h"

namespace streamguard {

// s <- w * raw + (1 - w) * s, seeded with the first raw sample.
class Ewma {
 public:
  explicit Ewma(double weight = 0.2) : weight_(weight) {}
  double update(double raw);
  double value() const { return value_.value_or(0.0); }
  bool seeded() const { return value_.has_value(); }

 private:
  double weight_;
  std::optional<double> value_;
};

// Sum of timestamped values over a trailing window.
class WindowSum {
 public:
  explicit WindowSum(double window_ms = 1000.0) : window_ms_(window_ms) {}
  void add(double t_ms, double v);
  // Sum over (now - window, now].
  double sum(double now_ms);
  size_t count(double now_ms);

 private:
  void evict(double now_ms);
  double window_ms_;
  std::deque<std::pair<double, double>> items_;
  double sum_ = 0.0;
};

// Running minimum of (arrival - rtp time); returns extra delay over it.
class UlDelayBaseline {
 public:
  double observe(double arrival_ms, double rtp_ms);
  std::optional<double> baseline() const { return baseline_; }

 private:
  std::optional<double> baseline_;
};

// Uplink arrivals reconstructed from consecutive BSRs and the bytes the
// gNB pulled from the UE in between: A = B2 - B1 + D1. Negative values kept.
class BsrLoadEstimator {
 public:
  explicit BsrLoadEstimator(double window_ms = 1000.0) : window_(window_ms) {}
  void on_transmitted(uint64_t bytes) { transmitted_since_bsr_ += bytes; }
  // Returns the inferred arrival bytes for the interval ending at this BSR.
  double on_bsr(double t_ms, uint64_t reported_bytes);
  double load_bps(double now_ms);
  double cumulative_arrivals() const { return cumulative_; }

 private:
  WindowSum window_;
  uint64_t last_report_ = 0;
  uint64_t transmitted_since_bsr_ = 0;
  double cumulative_ = 0.0;
};

struct BwHungryParams {
  double min_age_ms = 2000.0;
  double window_ms = 1000.0;
  uint32_t large_bytes = 1000;
  uint32_t min_large_pkts = 51;  // "more than 50"
};

struct ConnectionKey {
  uint32_t ue = 0;
  uint16_t client_port = 0;
  uint16_t server_port = 0;
  friend auto operator<=>(const ConnectionKey&, const ConnectionKey&) = default;
};

// Elephant detection per connection. A connection is born at its SYN; once
// flagged it stays flagged.
class BwHungryDetector {
 public:
  explicit BwHungryDetector(BwHungryParams p = {}) : p_(p) {}
  void observe(const ConnectionKey& key, Direction dir, uint32_t size_bytes,
               bool is_syn, double now_ms);
  bool is_hungry(const ConnectionKey& key, double now_ms);
  // True if any connection of the UE is hungry in the given direction.
  bool ue_hungry(uint32_t ue, Direction dir, double now_ms);

 private:
  struct Conn {
    double born_ms = 0.0;
    std::array<std::deque<double>, 2> large;  // per direction
    bool burst_seen = false;
    Direction burst_dir = Direction::Downlink;
    bool hungry = false;
  };
  void refresh(Conn& c, double now_ms);
  BwHungryParams p_;
  std::map<ConnectionKey, Conn> conns_;
};

// Per-layer assembly of RTP frames by (stream, timestamp).
struct FrameSample {
  double t_ms = 0.0;      // completion time
  double delay_ms = 0.0;  // per direction estimator
};

struct FlowState {
  double base_fps = 0.0;
  double enh_fps = 0.0;
  double base_delay_ms = 0.0;
  double enh_delay_ms = 0.0;
  double audio_delay_ms = 0.0;
};

struct SubflowLoads {
  double base = 0.0;  // includes small-window video
  double enh = 0.0;
  double audio = 0.0;
  double probe = 0.0;
  double control = 0.0;
  double background = 0.0;
  double zoom() const { return base + enh + audio + probe + control; }
  double total() const { return zoom() + background; }
};

struct FlowReport {
  uint32_t flow = 0;
  uint32_t ue = 0;
  Direction direction = Direction::Downlink;
  double first_seen_ms = 0.0;
  FlowState state;
  SubflowLoads loads;  // this flow's Zoom subflows, bits/s
};

struct UeReport {
  uint32_t ue = 0;
  double snr_db = 0.0;
  double cqi = 0.0;
  double mcs = 0.0;
  double bits_per_prb = 0.0;
  std::array<SubflowLoads, 2> loads;  // by direction, bits/s
  std::array<bool, 2> bw_hungry{};
  double ul_bsr_load_bps = 0.0;  // all groups, BSR-inferred
};

struct MonitorReport {
  uint64_t interval = 0;
  double t_ms = 0.0;
  std::vector<FlowReport> flows;
  std::vector<UeReport> ues;
};

struct MonitorConfig {
  uint32_t k1_slots = 4;
  double slot_ms = 1.0;
  double ewma_weight = 0.2;
  double media_window_ms = 1000.0;
  double audio_rate_hz = 48000.0;
  double video_rate_hz = 90000.0;
  BwHungryParams bw_hungry;
};

double dl_frame_delay(std::span<const SimPacket> frame, uint32_t k1_slots,
                      double slot_ms);

// Observes the RAN and Zoom traffic at the gNB and assembles per-interval
// reports for the controller.
class Monitor {
 public:
  Monitor(MonitorConfig cfg, const DpiPlugin& dpi, size_t num_ues);

  // Downlink packet entering the RAN (before marking drops).
  void on_dl_ingress(const SimPacket& pkt, double now_ms);
  // Downlink packet acknowledged by HARQ (carries ack_ms).
  void on_dl_ack(const SimPacket& pkt);
  // Uplink packet received at the gNB.
  void on_ul_arrival(const SimPacket& pkt, double now_ms);
  // Per-subflow uplink offered bytes reported by the UE-side shim.
  void on_ul_shim(const SimPacket& pkt, double now_ms);
  void on_bsr(uint32_t ue, const Bsr& bsr);
  void on_slot(const SlotResult& r, const Cell& cell);

  MonitorReport snapshot(double now_ms);

  const BsrLoadEstimator& bsr_estimator(uint32_t ue, size_t group) const {
    return bsr_.at(ue)[group];
  }

 private:
  struct StreamKey {
    uint32_t flow;
    Direction dir;
    uint8_t layer;  // 0 base, 1 enh, 2 audio
    friend auto operator<=>(const StreamKey&, const StreamKey&) = default;
  };
  struct PendingFrame {
    std::vector<SimPacket> pkts;
    bool have_last = false;
  };
  struct Stream {
    std::map<int64_t, PendingFrame> pending;  // unwrapped timestamp
    RtpUnwrapper unwrap;
    UlDelayBaseline baseline;
    std::deque<FrameSample> samples;
  };
  struct FlowTrack {
    uint32_t ue = 0;
    Direction dir = Direction::Downlink;
    double first_seen_ms = 0.0;
    std::array<WindowSum, 5> bytes;  // base, enh, audio, probe, control
    std::array<Ewma, 5> smooth;
  };
  struct UeTrack {
    std::array<std::array<WindowSum, 6>, 2> bytes;
    std::array<std::array<Ewma, 6>, 2> smooth;
    double snr_sum = 0, cqi_sum = 0, mcs_sum = 0, bpp_sum = 0;
    uint32_t ran_samples = 0;
    UeReport last;
  };

  FlowTrack& flow_track(const SimPacket& pkt, double now_ms);
  void account_load(const SimPacket& pkt, SubflowKind kind, double now_ms);
  void add_media_packet(const SimPacket& pkt, SubflowKind kind, double t_ms);
  void complete_frames(const StreamKey& key, Stream& s);

  MonitorConfig cfg_;
  const DpiPlugin& dpi_;
  std::map<StreamKey, Stream> streams_;
  std::map<uint32_t, FlowTrack> flows_;
  std::vector<UeTrack> ues_;
  std::vector<std::array<BsrLoadEstimator, kNumClasses>> bsr_;
  BwHungryDetector hungry_;
  uint64_t interval_ = 0;
};

void write_monitor_csv_header(std::ostream& os);
void write_monitor_csv_rows(std::ostream& os, const MonitorReport& r);

}  // namespace streamguard
