#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace streamguard {

enum class Direction : uint8_t { Downlink, Uplink };

enum class SubflowKind : uint8_t {
  Audio,
  Base,
  HighFpsEnhancement,
  LowFpsEnhancement,
  SmallWindowVideo,
  Probe,
  Control,
  Background,
};

inline constexpr std::array<SubflowKind, 8> kAllSubflowKinds = {
    SubflowKind::Audio,          SubflowKind::Base,
    SubflowKind::HighFpsEnhancement, SubflowKind::LowFpsEnhancement,
    SubflowKind::SmallWindowVideo,   SubflowKind::Probe,
    SubflowKind::Control,        SubflowKind::Background,
};

std::string_view to_string(SubflowKind kind);
std::string_view to_string(Direction dir);
SubflowKind parse_subflow_kind(std::string_view name);
Direction parse_direction(std::string_view name);

inline bool is_enhancement(SubflowKind k) {
  return k == SubflowKind::HighFpsEnhancement ||
         k == SubflowKind::LowFpsEnhancement;
}
inline bool is_video(SubflowKind k) {
  return k == SubflowKind::Base || is_enhancement(k) ||
         k == SubflowKind::SmallWindowVideo;
}
inline bool is_zoom(SubflowKind k) { return k != SubflowKind::Background; }

// Two-class DRB (downlink) / LCG (uplink) abstraction.
enum class Priority : uint8_t { High, Low };

enum class DropDirective : uint8_t { None, Drop, DropWithProbability };

struct PriorityClass {
  Priority level = Priority::Low;
  DropDirective drop = DropDirective::None;
  double drop_probability = 0.0;  // only meaningful for DropWithProbability

  static PriorityClass high() { return {Priority::High, DropDirective::None, 0.0}; }
  static PriorityClass low() { return {Priority::Low, DropDirective::None, 0.0}; }
  // Throws std::invalid_argument unless p is in [0, 1].
  static PriorityClass with_drop_probability(Priority level, double p);

  friend bool operator==(const PriorityClass&, const PriorityClass&) = default;
};

struct RtpHeader {
  uint32_t timestamp = 0;
  uint16_t sequence = 0;
  uint64_t frame_id = 0;  // ground truth only; the monitor groups by timestamp
  bool last_of_frame = false;
  uint32_t extension_data = 0;  // low 24 bits, big-endian byte triple
};

struct TransportInfo {
  uint16_t src_port = 0;
  uint16_t dst_port = 0;
  bool is_syn = false;
  bool is_large_data = false;
};

struct Stamps {
  std::optional<double> app_emit_ms;
  std::optional<double> sdap_ingress_ms;
  std::optional<double> phy_deliver_ms;
  std::optional<double> ack_ms;

  // app_emit <= sdap_ingress <= phy_deliver <= ack over the stamps present.
  bool monotone() const;
};

struct SimPacket {
  uint64_t id = 0;
  uint32_t ue = 0;
  uint32_t flow = 0;  // generator flow index inside the scenario
  Direction direction = Direction::Downlink;
  uint32_t size_bytes = 0;
  SubflowKind kind = SubflowKind::Background;  // generator ground truth
  uint8_t l7_type = 0;                         // Zoom media-type byte
  std::optional<RtpHeader> rtp;
  TransportInfo transport;
  Stamps stamps;
  PriorityClass priority;
  bool ipv6 = false;
};

inline constexpr uint32_t kIpUdpHeaderBytes = 28;

// L7 payload length seen by DPI for a packet of the given wire size.
inline uint32_t l7_payload_len(const SimPacket& p) {
  return p.size_bytes > kIpUdpHeaderBytes ? p.size_bytes - kIpUdpHeaderBytes : 0;
}

// Converts an RTP timestamp in sampling instants to milliseconds.
// Throws std::invalid_argument when sample_rate_hz <= 0.
double rtp_ts_to_ms(double timestamp, double sample_rate_hz);

// Unwraps a 32-bit RTP timestamp sequence into a monotone 64-bit counter,
// assuming successive deltas stay below 2^31 in magnitude.
class RtpUnwrapper {
 public:
  int64_t unwrap(uint32_t ts);

 private:
  bool started_ = false;
  uint32_t last_ = 0;
  int64_t value_ = 0;
};

// Same idea for 16-bit sequence numbers.
class SeqUnwrapper {
 public:
  int64_t unwrap(uint16_t seq);

 private:
  bool started_ = false;
  uint16_t last_ = 0;
  int64_t value_ = 0;
};

enum class PacketFate : uint8_t {
  Queued,
  Delivered,
  DroppedByDirective,
  DroppedOverflow,
  LostOnAir,
};
std::string_view to_string(PacketFate fate);

struct TraceRecord {
  SimPacket packet;
  PacketFate fate = PacketFate::Queued;
};

// Column order of the packet trace CSV. Frozen; bump kTraceVersion on change.
inline constexpr int kTraceVersion = 1;
std::string_view trace_csv_header();
void write_trace_row(std::ostream& os, const TraceRecord& rec);
std::vector<TraceRecord> read_trace_csv(std::istream& is);

}  // namespace streamguard
