#include "streamguard/baselines.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "streamguard/csv_util.h"

namespace streamguard {

std::string BaselineMode::str() const {
  switch (kind) {
    case BaselineKind::StreamGuard: return "streamguard";
    case BaselineKind::DChannel: return "dchannel";
    case BaselineKind::TcRan: return "tcran:" + csv::fmt(quota_kbps, 0);
    case BaselineKind::Vanilla5G: return "vanilla:" + csv::fmt(quota_kbps, 0);
  }
  return "?";
}

BaselineMode parse_baseline(const std::string& s) {
  std::string name = s;
  std::string quota;
  if (auto pos = s.find(':'); pos != std::string::npos) {
    name = s.substr(0, pos);
    quota = s.substr(pos + 1);
  }
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  BaselineMode m;
  if (name == "streamguard") {
    m.kind = BaselineKind::StreamGuard;
  } else if (name == "dchannel") {
    m.kind = BaselineKind::DChannel;
  } else if (name == "tcran" || name == "tc-ran") {
    m.kind = BaselineKind::TcRan;
  } else if (name == "vanilla" || name == "vanilla5g") {
    m.kind = BaselineKind::Vanilla5G;
  } else {
    throw std::invalid_argument("unknown baseline: " + s);
  }
  const bool needs_quota = m.kind == BaselineKind::TcRan || m.kind == BaselineKind::Vanilla5G;
  if (needs_quota) {
    if (quota.empty()) throw std::invalid_argument("baseline " + name + " needs a quota, e.g. " + name + ":300");
    size_t used = 0;
    try {
      m.quota_kbps = std::stod(quota, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != quota.size() || !(m.quota_kbps > 0) || !std::isfinite(m.quota_kbps))
      throw std::invalid_argument("baseline quota must be a positive number: " + s);
  } else if (!quota.empty()) {
    throw std::invalid_argument("baseline " + name + " takes no quota");
  }
  return m;
}

bool TokenBucket::consume(uint32_t bytes, double now_ms) {
  if (now_ms > last_ms_) {
    tokens_ = std::min(depth_, tokens_ + rate_ * (now_ms - last_ms_));
    last_ms_ = now_ms;
  }
  if (tokens_ < bytes) return false;
  tokens_ -= bytes;
  return true;
}

FlowDecision baseline_decision(const BaselineMode& mode, const FlowReport& f) {
  FlowDecision d;
  d.flow = f.flow;
  d.ue = f.ue;
  d.direction = f.direction;
  switch (mode.kind) {
    case BaselineKind::DChannel:
    case BaselineKind::TcRan: d.action = kBaseAndAudio; break;
    case BaselineKind::Vanilla5G:
    case BaselineKind::StreamGuard: d.action = kPrioritizeAll; break;
  }
  return d;
}

BaselineMarker::BaselineMarker(BaselineMode mode) : mode_(mode) {
  if ((mode_.kind == BaselineKind::TcRan || mode_.kind == BaselineKind::Vanilla5G) &&
      !(mode_.quota_kbps > 0))
    throw std::invalid_argument("quota must be > 0");
}

PriorityClass BaselineMarker::mark(const SimPacket& pkt, SubflowKind kind,
                                   double now_ms) {
  if (kind == SubflowKind::Background) return PriorityClass::low();
  if (mode_.kind == BaselineKind::DChannel || mode_.kind == BaselineKind::StreamGuard) {
    FlowDecision d;
    d.action = mode_.kind == BaselineKind::DChannel ? kBaseAndAudio : kPrioritizeAll;
    return streamguard::mark(kind, d);
  }
  bool eligible = true;
  if (mode_.kind == BaselineKind::TcRan)
    eligible = kind == SubflowKind::Base || kind == SubflowKind::SmallWindowVideo ||
               kind == SubflowKind::Audio;
  if (!eligible) return PriorityClass::low();
  auto it = buckets_.find(pkt.flow);
  if (it == buckets_.end()) {
    const double rate = mode_.quota_kbps / 8.0;  // bytes per ms
    it = buckets_.emplace(pkt.flow, TokenBucket(rate, rate * 100.0)).first;
  }
  return it->second.consume(pkt.size_bytes, now_ms) ? PriorityClass::high()
                                                    : PriorityClass::low();
}

}  // namespace streamguard
