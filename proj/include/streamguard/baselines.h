#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "streamguard/controller.h"
#include "streamguard/packet_model.h"

namespace streamguard {

enum class BaselineKind : uint8_t { StreamGuard, DChannel, TcRan, Vanilla5G };

struct BaselineMode {
  BaselineKind kind = BaselineKind::StreamGuard;
  double quota_kbps = 0.0;  // TcRan and Vanilla5G only

  std::string str() const;
};

// Accepts "streamguard", "dchannel", "tcran:<kbps>", "vanilla:<kbps>".
// Throws std::invalid_argument.
BaselineMode parse_baseline(const std::string& s);

class TokenBucket {
 public:
  TokenBucket(double rate_bytes_per_ms, double depth_bytes)
      : rate_(rate_bytes_per_ms), depth_(depth_bytes), tokens_(depth_bytes) {}
  // Takes `bytes` tokens if available.
  bool consume(uint32_t bytes, double now_ms);
  double tokens() const { return tokens_; }

 private:
  double rate_;
  double depth_;
  double tokens_;
  double last_ms_ = 0.0;
};

// Nominal per-flow decision of a baseline; never carries drop directives.
FlowDecision baseline_decision(const BaselineMode& mode, const FlowReport& f);

// Per-packet marking for the quota baselines (one bucket per flow, depth =
// 100 ms of quota). DChannel marks through the regular map.
class BaselineMarker {
 public:
  explicit BaselineMarker(BaselineMode mode);
  PriorityClass mark(const SimPacket& pkt, SubflowKind kind, double now_ms);
  const BaselineMode& mode() const { return mode_; }

 private:
  BaselineMode mode_;
  std::map<uint32_t, TokenBucket> buckets_;
};

}  // namespace streamguard
