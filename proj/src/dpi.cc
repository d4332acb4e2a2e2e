#include "streamguard/dpi.h"

#include <algorithm>
#include <stdexcept>

namespace streamguard {
namespace {

constexpr std::array<uint32_t, 4> kBaseLayerValues = {0x500000, 0x5ff000,
                                                       0x5f0fff, 0x5f7fff};
constexpr std::array<uint32_t, 3> kHighFpsValues = {0x5ff777, 0x5ffaaa,
                                                    0x5ff555};
constexpr std::array<uint32_t, 1> kLowFpsValues = {0x577777};
// Not in any of the sets above.
constexpr uint32_t kSmallWindowValue = 0x512345;

constexpr uint32_t kProbeMinPayload = 1000;

template <size_t N>
bool contains(const std::array<uint32_t, N>& set, uint32_t v) {
  return std::find(set.begin(), set.end(), v) != set.end();
}

}  // namespace

std::array<uint8_t, 3> ext_bytes(uint32_t value24) {
  return {static_cast<uint8_t>((value24 >> 16) & 0xff),
          static_cast<uint8_t>((value24 >> 8) & 0xff),
          static_cast<uint8_t>(value24 & 0xff)};
}

uint32_t ext_value(const std::array<uint8_t, 3>& b) {
  return (uint32_t{b[0]} << 16) | (uint32_t{b[1]} << 8) | uint32_t{b[2]};
}

SubflowKind classify_zoom(const std::optional<ZoomWirePayload>& payload) {
  if (!payload || !payload->ipv4 || payload->payload_len <= kZoomTypeOffset)
    return SubflowKind::Background;
  const auto& p = *payload;
  if (p.src_port != kZoomMediaPort && p.dst_port != kZoomMediaPort)
    return SubflowKind::Background;

  switch (p.zoom_pkt_type) {
    case kZoomTypeAudio:
      return SubflowKind::Audio;
    case kZoomTypeVideo: {
      const uint32_t ext = ext_value(p.first_extension_data);
      if (contains(kBaseLayerValues, ext)) return SubflowKind::Base;
      if (contains(kHighFpsValues, ext)) return SubflowKind::HighFpsEnhancement;
      if (contains(kLowFpsValues, ext)) return SubflowKind::LowFpsEnhancement;
      return SubflowKind::SmallWindowVideo;
    }
    default:
      break;
  }
  // Small 0x15 packets fall through to Control.
  if (p.zoom_pkt_type == kZoomTypeProbe && p.payload_len > kProbeMinPayload)
    return SubflowKind::Probe;
  return SubflowKind::Control;
}

std::optional<ZoomWirePayload> wire_view(const SimPacket& pkt) {
  const uint32_t len = l7_payload_len(pkt);
  if (len == 0) return std::nullopt;
  ZoomWirePayload w;
  w.ipv4 = !pkt.ipv6;
  w.src_port = pkt.transport.src_port;
  w.dst_port = pkt.transport.dst_port;
  w.zoom_pkt_type = pkt.l7_type;
  w.payload_len = len;
  if (pkt.rtp) w.first_extension_data = ext_bytes(pkt.rtp->extension_data);
  return w;
}

uint32_t canonical_extension(SubflowKind kind) {
  switch (kind) {
    case SubflowKind::Base: return kBaseLayerValues[0];
    case SubflowKind::HighFpsEnhancement: return kHighFpsValues[0];
    case SubflowKind::LowFpsEnhancement: return kLowFpsValues[0];
    case SubflowKind::SmallWindowVideo: return kSmallWindowValue;
    default: return 0;
  }
}

uint8_t canonical_l7_type(SubflowKind kind) {
  switch (kind) {
    case SubflowKind::Audio: return kZoomTypeAudio;
    case SubflowKind::Base:
    case SubflowKind::HighFpsEnhancement:
    case SubflowKind::LowFpsEnhancement:
    case SubflowKind::SmallWindowVideo: return kZoomTypeVideo;
    case SubflowKind::Probe: return kZoomTypeProbe;
    case SubflowKind::Control: return kZoomTypeControl;
    case SubflowKind::Background: return 0;
  }
  return 0;
}

DpiPlugin make_zoom_plugin() {
  return {"zoom", [](const SimPacket& p) { return classify_zoom(wire_view(p)); }};
}

DpiRegistry::DpiRegistry() { add(make_zoom_plugin()); }

void DpiRegistry::add(DpiPlugin plugin) {
  auto name = plugin.name;
  plugins_[name] = std::move(plugin);
}

const DpiPlugin& DpiRegistry::get(const std::string& name) const {
  auto it = plugins_.find(name);
  if (it == plugins_.end())
    throw std::invalid_argument("no DPI plugin registered for '" + name + "'");
  return it->second;
}

bool DpiRegistry::contains(const std::string& name) const {
  return plugins_.count(name) != 0;
}

}  // namespace streamguard
