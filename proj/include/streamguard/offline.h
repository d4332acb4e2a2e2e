#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "streamguard/flow2frame.h"
#include "streamguard/packet_model.h"
#include "streamguard/qoe_eval.h"
#include "streamguard/traffic_gen.h"

namespace streamguard {

// One Zoom flow reassembled from a run directory (trace.csv + ground_truth.csv).
struct OfflineFlow {
  uint32_t flow = 0;
  uint32_t ue = 0;
  Direction direction = Direction::Downlink;
  std::vector<ReceivedPacket> received;
  GroundTruthLog truth;
  std::map<uint64_t, bool> frame_fully_delivered;  // emitted frames only
};

// Settings a run recorded in summary.json; defaults when the file is absent.
struct RunMeta {
  double core_delay_ms = 10.0;
  double qoe_start_ms = 2000.0;
  std::optional<double> duration_s;
  ReceiverConfig receiver;
};
RunMeta load_run_meta(const std::filesystem::path& dir);

// Uplink packets reach the far end core_delay_ms after the air interface.
std::vector<OfflineFlow> load_run_dir(const std::filesystem::path& dir,
                                      double core_delay_ms);

// Camera timeline, relative RTP sampling points and rendered frames of a flow.
AlignmentInput alignment_input_for(const OfflineFlow& f, const ReceiverConfig& receiver = {},
                                   double video_rate_hz = 90000.0);

}  // namespace streamguard
