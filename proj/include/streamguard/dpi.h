#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include "streamguard/packet_model.h"

namespace streamguard {

inline constexpr uint16_t kZoomMediaPort = 8801;
inline constexpr size_t kZoomTypeOffset = 8;

inline constexpr uint8_t kZoomTypeAudio = 0x0f;
inline constexpr uint8_t kZoomTypeVideo = 0x10;
inline constexpr uint8_t kZoomTypeProbe = 0x15;
inline constexpr uint8_t kZoomTypeControl = 0x21;  // any other value works

// The subset of a Zoom datagram the classifier inspects.
struct ZoomWirePayload {
  bool ipv4 = true;
  uint16_t src_port = 0;
  uint16_t dst_port = 0;
  uint8_t zoom_pkt_type = 0;
  std::array<uint8_t, 3> first_extension_data{};
  uint32_t payload_len = 0;
};

std::array<uint8_t, 3> ext_bytes(uint32_t value24);
uint32_t ext_value(const std::array<uint8_t, 3>& bytes);

// Zoom subflow classification rules. Total: absent, short or non-Zoom input
// maps to Background.
SubflowKind classify_zoom(const std::optional<ZoomWirePayload>& payload);

// Rebuilds the wire view the classifier needs from a simulated packet.
std::optional<ZoomWirePayload> wire_view(const SimPacket& pkt);

// Representative extension value emitted by the generator for each video kind.
uint32_t canonical_extension(SubflowKind kind);
uint8_t canonical_l7_type(SubflowKind kind);

struct DpiPlugin {
  std::string name;
  std::function<SubflowKind(const SimPacket&)> classify;
};

class DpiRegistry {
 public:
  // Registry pre-populated with the built-in "zoom" plugin.
  DpiRegistry();
  void add(DpiPlugin plugin);
  // Throws std::invalid_argument for an unknown application name.
  const DpiPlugin& get(const std::string& name) const;
  bool contains(const std::string& name) const;

 private:
  std::map<std::string, DpiPlugin> plugins_;
};

DpiPlugin make_zoom_plugin();

}  // namespace streamguard
