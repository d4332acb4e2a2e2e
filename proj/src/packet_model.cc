#include "streamguard/packet_model.h"

#include <ostream>
#include <stdexcept>

#include "streamguard/csv_util.h"

namespace streamguard {

std::string_view to_string(SubflowKind kind) {
  switch (kind) {
    case SubflowKind::Audio: return "audio";
    case SubflowKind::Base: return "base";
    case SubflowKind::HighFpsEnhancement: return "high_fps_enh";
    case SubflowKind::LowFpsEnhancement: return "low_fps_enh";
    case SubflowKind::SmallWindowVideo: return "small_window";
    case SubflowKind::Probe: return "probe";
    case SubflowKind::Control: return "control";
    case SubflowKind::Background: return "background";
  }
  return "?";
}

std::string_view to_string(Direction dir) {
  return dir == Direction::Downlink ? "dl" : "ul";
}

SubflowKind parse_subflow_kind(std::string_view name) {
  for (auto k : kAllSubflowKinds)
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown subflow kind: " + std::string(name));
}

Direction parse_direction(std::string_view name) {
  if (name == "dl" || name == "downlink") return Direction::Downlink;
  if (name == "ul" || name == "uplink") return Direction::Uplink;
  throw std::invalid_argument("unknown direction: " + std::string(name));
}

std::string_view to_string(PacketFate fate) {
  switch (fate) {
    case PacketFate::Queued: return "queued";
    case PacketFate::Delivered: return "delivered";
    case PacketFate::DroppedByDirective: return "dropped_directive";
    case PacketFate::DroppedOverflow: return "dropped_overflow";
    case PacketFate::LostOnAir: return "lost_on_air";
  }
  return "?";
}

static PacketFate parse_fate(std::string_view s) {
  for (auto f : {PacketFate::Queued, PacketFate::Delivered,
                 PacketFate::DroppedByDirective, PacketFate::DroppedOverflow,
                 PacketFate::LostOnAir})
    if (to_string(f) == s) return f;
  throw std::invalid_argument("unknown packet fate: " + std::string(s));
}

PriorityClass PriorityClass::with_drop_probability(Priority level, double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("drop probability outside [0,1]");
  return {level, DropDirective::DropWithProbability, p};
}

bool Stamps::monotone() const {
  const std::optional<double>* chain[] = {&app_emit_ms, &sdap_ingress_ms,
                                          &phy_deliver_ms, &ack_ms};
  std::optional<double> prev;
  for (const auto* s : chain) {
    if (!*s) continue;
    if (prev && **s < *prev) return false;
    prev = *s;
  }
  return true;
}

double rtp_ts_to_ms(double timestamp, double sample_rate_hz) {
  if (!(sample_rate_hz > 0.0))
    throw std::invalid_argument("rtp_ts_to_ms: sample rate must be positive");
  return timestamp / sample_rate_hz * 1000.0;
}

int64_t RtpUnwrapper::unwrap(uint32_t ts) {
  if (!started_) {
    started_ = true;
    last_ = ts;
    value_ = ts;
    return value_;
  }
  const auto delta = static_cast<int32_t>(ts - last_);
  value_ += delta;
  last_ = ts;
  return value_;
}

int64_t SeqUnwrapper::unwrap(uint16_t seq) {
  if (!started_) {
    started_ = true;
    last_ = seq;
    value_ = seq;
    return value_;
  }
  const auto delta = static_cast<int16_t>(static_cast<uint16_t>(seq - last_));
  value_ += delta;
  last_ = seq;
  return value_;
}

std::string_view trace_csv_header() {
  return "id,ue,flow,direction,size_bytes,kind,l7_type,has_rtp,rtp_timestamp,"
         "rtp_sequence,frame_id,last_of_frame,extension_data,src_port,dst_port,"
         "is_syn,is_large_data,app_emit_ms,sdap_ingress_ms,phy_deliver_ms,ack_ms,"
         "priority,drop,drop_probability,fate";
}

void write_trace_row(std::ostream& os, const TraceRecord& rec) {
  const SimPacket& p = rec.packet;
  const bool has_rtp = p.rtp.has_value();
  const RtpHeader rtp = p.rtp.value_or(RtpHeader{});
  os << p.id << ',' << p.ue << ',' << p.flow << ',' << to_string(p.direction)
     << ',' << p.size_bytes << ',' << to_string(p.kind) << ','
     << static_cast<int>(p.l7_type) << ',' << (has_rtp ? 1 : 0) << ','
     << rtp.timestamp << ',' << rtp.sequence << ',' << rtp.frame_id << ','
     << (rtp.last_of_frame ? 1 : 0) << ',' << rtp.extension_data << ','
     << p.transport.src_port << ',' << p.transport.dst_port << ','
     << (p.transport.is_syn ? 1 : 0) << ','
     << (p.transport.is_large_data ? 1 : 0) << ','
     << csv::fmt_opt(p.stamps.app_emit_ms) << ','
     << csv::fmt_opt(p.stamps.sdap_ingress_ms) << ','
     << csv::fmt_opt(p.stamps.phy_deliver_ms) << ','
     << csv::fmt_opt(p.stamps.ack_ms) << ','
     << (p.priority.level == Priority::High ? "high" : "low") << ','
     << static_cast<int>(p.priority.drop) << ','
     << csv::fmt(p.priority.drop_probability, 4) << ',' << to_string(rec.fate)
     << '\n';
}

std::vector<TraceRecord> read_trace_csv(std::istream& is) {
  csv::Reader r(is);
  std::vector<TraceRecord> out;
  while (r.next()) {
    TraceRecord rec;
    SimPacket& p = rec.packet;
    p.id = static_cast<uint64_t>(r.integer("id"));
    p.ue = static_cast<uint32_t>(r.integer("ue"));
    p.flow = static_cast<uint32_t>(r.integer("flow"));
    p.direction = parse_direction(r.get("direction"));
    p.size_bytes = static_cast<uint32_t>(r.integer("size_bytes"));
    p.kind = parse_subflow_kind(r.get("kind"));
    p.l7_type = static_cast<uint8_t>(r.integer("l7_type"));
    if (r.integer("has_rtp") != 0) {
      RtpHeader h;
      h.timestamp = static_cast<uint32_t>(r.integer("rtp_timestamp"));
      h.sequence = static_cast<uint16_t>(r.integer("rtp_sequence"));
      h.frame_id = static_cast<uint64_t>(r.integer("frame_id"));
      h.last_of_frame = r.integer("last_of_frame") != 0;
      h.extension_data = static_cast<uint32_t>(r.integer("extension_data"));
      p.rtp = h;
    }
    p.transport.src_port = static_cast<uint16_t>(r.integer("src_port"));
    p.transport.dst_port = static_cast<uint16_t>(r.integer("dst_port"));
    p.transport.is_syn = r.integer("is_syn") != 0;
    p.transport.is_large_data = r.integer("is_large_data") != 0;
    p.stamps.app_emit_ms = r.opt("app_emit_ms");
    p.stamps.sdap_ingress_ms = r.opt("sdap_ingress_ms");
    p.stamps.phy_deliver_ms = r.opt("phy_deliver_ms");
    p.stamps.ack_ms = r.opt("ack_ms");
    p.priority.level = r.get("priority") == "high" ? Priority::High : Priority::Low;
    p.priority.drop = static_cast<DropDirective>(r.integer("drop"));
    p.priority.drop_probability = r.num("drop_probability");
    rec.fate = parse_fate(r.get("fate"));
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace streamguard
