#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "streamguard/monitor.h"
#include "streamguard/traffic_gen.h"

using namespace streamguard;

namespace {

struct Emitted {
  std::vector<SimPacket> pkts;
};

Emitted drive(ZoomSource& src, double from, double to, const ZoomFeedback& fb) {
  Emitted e;
  for (double t = from; t < to; t += 1.0)
    for (auto& p : src.zoom_step(t, fb)) e.pkts.push_back(p);
  return e;
}

// Frames per layer whose last packet was emitted in [from, to).
std::map<SubflowKind, int> frames_by_layer(const Emitted& e, double from, double to) {
  std::map<SubflowKind, int> n;
  for (const auto& p : e.pkts)
    if (is_video(p.kind) && p.rtp->last_of_frame && *p.stamps.app_emit_ms >= from &&
        *p.stamps.app_emit_ms < to)
      ++n[p.kind];
  return n;
}

}  // namespace

TEST(PiecewiseLinear, EvaluatesAndClamps) {
  PiecewiseLinear f({{0.0, 0.3}, {0.5, 0.6}, {1.0, 1.0}});
  EXPECT_DOUBLE_EQ(f(-1), 0.3);
  EXPECT_DOUBLE_EQ(f(0.25), 0.45);
  EXPECT_DOUBLE_EQ(f(0.75), 0.8);
  EXPECT_DOUBLE_EQ(f(2), 1.0);
  EXPECT_TRUE(f.non_decreasing());
  EXPECT_THROW(PiecewiseLinear({{1, 0}, {1, 1}}), std::invalid_argument);
}

TEST(ZoomSource, FullRateHitsTargets) {
  ZoomSource src({}, 0, 0, Direction::Downlink, 50000, 1);
  const auto e = drive(src, 0, 12000, {1.0, 0.0});
  const auto n = frames_by_layer(e, 2000, 12000);
  EXPECT_NEAR(n.at(SubflowKind::Base) / 10.0, 8.0, 0.2);
  EXPECT_NEAR(n.at(SubflowKind::HighFpsEnhancement) / 10.0, 16.0, 0.2);
}

TEST(ZoomSource, ZeroDeliverySuppressesEnhancementFirst) {
  ZoomSourceConfig cfg;
  ZoomSource src(cfg, 0, 0, Direction::Downlink, 50000, 1);
  const auto e = drive(src, 0, 12000, {0.0, 0.0});
  EXPECT_DOUBLE_EQ(src.current_multiplier(), cfg.rate_curve(0.0));
  const auto n = frames_by_layer(e, 2000, 12000);
  // 24 fps total target scaled by the curve minimum stays below the base target.
  const double expect_base = (cfg.base_fps_target + cfg.enh_fps_target) * cfg.rate_curve(0.0);
  EXPECT_NEAR(n.at(SubflowKind::Base) / 10.0, expect_base, 0.2);
  EXPECT_EQ(n.count(SubflowKind::HighFpsEnhancement), 0u);
}

TEST(ZoomSource, ProbesDuringInitialPhase) {
  ZoomSource src({}, 0, 0, Direction::Uplink, 50000, 1);
  const auto e = drive(src, 0, 4000, {});
  int early = 0, late = 0;
  for (const auto& p : e.pkts)
    if (p.kind == SubflowKind::Probe) (*p.stamps.app_emit_ms < 2000 ? early : late)++;
  EXPECT_NEAR(early, 200, 2);  // 100 pps for 2 s
  EXPECT_GT(early, 4 * late);
}

TEST(ZoomSource, AudioCadenceAndTimestamps) {
  ZoomSourceConfig cfg;
  ZoomSource src(cfg, 0, 0, Direction::Downlink, 50000, 2);
  const auto e = drive(src, 0, 2000, {});
  std::vector<const SimPacket*> audio;
  for (const auto& p : e.pkts)
    if (p.kind == SubflowKind::Audio) audio.push_back(&p);
  ASSERT_EQ(audio.size(), 100u);
  for (size_t i = 1; i < audio.size(); ++i) {
    EXPECT_DOUBLE_EQ(*audio[i]->stamps.app_emit_ms - *audio[i - 1]->stamps.app_emit_ms, 20.0);
    EXPECT_EQ(uint32_t(audio[i]->rtp->timestamp - audio[i - 1]->rtp->timestamp), 960u);
  }
}

TEST(ZoomSource, SvcDependencyAndFrameInvariants) {
  ZoomSource src({}, 0, 0, Direction::Downlink, 50000, 3);
  Emitted e;
  // Vary the feedback so the multiplier moves around.
  for (double t = 0; t < 30000; t += 1.0) {
    const double ratio = 0.5 + 0.5 * std::sin(t / 3000.0);
    for (auto& p : src.zoom_step(t, {ratio, std::fmod(t / 10.0, 600.0)})) e.pkts.push_back(p);
  }
  std::map<uint64_t, std::vector<const SimPacket*>> frames;
  std::set<uint64_t> base_frames;
  for (const auto& p : e.pkts) {
    if (!is_video(p.kind)) continue;
    frames[p.rtp->frame_id].push_back(&p);
    if (p.kind == SubflowKind::Base) base_frames.insert(p.rtp->frame_id);
  }
  for (const auto& [id, pk] : frames) {
    int last = 0;
    for (const auto* p : pk) {
      EXPECT_EQ(p->rtp->timestamp, pk.front()->rtp->timestamp);
      last += p->rtp->last_of_frame;
    }
    EXPECT_EQ(last, 1) << "frame " << id;
  }
  const auto& truth = src.ground_truth();
  std::set<uint64_t> seen;
  for (const auto& f : truth.frames) {
    EXPECT_TRUE(seen.insert(f.frame_id).second);
    EXPECT_EQ(f.emitted, frames.count(f.frame_id) == 1);
    if (f.emitted && is_enhancement(f.layer)) {
      ASSERT_TRUE(f.ref_base_frame);
      EXPECT_TRUE(base_frames.count(*f.ref_base_frame));
      EXPECT_LT(*f.ref_base_frame, f.frame_id);
    }
  }
  // Emitted frames sit on the RTP clock at their camera tick; skipped frames
  // carry no timestamp.
  const FrameTruth* prev = nullptr;
  for (const auto& f : truth.frames) {
    if (!f.emitted) continue;
    if (prev)
      EXPECT_NEAR(double(uint32_t(f.rtp_timestamp - prev->rtp_timestamp)),
                  double(f.frame_id - prev->frame_id) * 33.0 * 90.0, 1.0);
    prev = &f;
  }
}

TEST(ZoomSource, SendRateMonotoneInDeliveryRatio) {
  double prev = -1;
  for (double r : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    ZoomSource src({}, 0, 0, Direction::Downlink, 50000, 4);
    drive(src, 0, 2000, {r, 0.0});
    const uint64_t before = src.bytes_sent();
    drive(src, 2000, 12000, {r, 0.0});
    const double rate = double(src.bytes_sent() - before);
    EXPECT_GE(rate, prev) << "ratio " << r;
    prev = rate;
  }
}

TEST(ZoomSource, RateCurveMustBeMonotone) {
  ZoomSourceConfig cfg;
  cfg.rate_curve = PiecewiseLinear({{0.0, 1.0}, {1.0, 0.2}});
  EXPECT_THROW(ZoomSource(cfg, 0, 0, Direction::Downlink, 50000, 1), std::invalid_argument);
}

TEST(BulkAimd, AdditiveIncreaseThenHalving) {
  BackgroundSourceConfig cfg;
  cfg.initial_window = 10;
  BackgroundSource src(cfg, 1, 0, Direction::Downlink, 40001, 1);
  double t = 0;
  auto first = src.background_step(t, {});
  ASSERT_EQ(first.size(), 10u);
  EXPECT_TRUE(first.front().transport.is_syn);
  EXPECT_FALSE(first.back().transport.is_syn);
  for (int rtt = 0; rtt < 10; ++rtt) {
    t += 30;
    BackgroundFeedback fb;
    fb.acked_bytes = src.in_flight() * cfg.pkt_bytes;
    fb.rtt_sample_ms = 30;
    const auto sent = src.background_step(t, fb);
    EXPECT_EQ(sent.size(), static_cast<size_t>(src.window()));
  }
  EXPECT_DOUBLE_EQ(src.window(), 20.0);
  BackgroundFeedback loss;
  loss.loss_events = 1;
  src.background_step(t + 30, loss);
  EXPECT_DOUBLE_EQ(src.window(), 10.0);
}

TEST(BulkAimd, KeepsWindowFull) {
  BackgroundSource src({}, 1, 0, Direction::Uplink, 40001, 1);
  src.background_step(0, {});
  EXPECT_EQ(src.in_flight(), 10u);
  BackgroundFeedback fb;
  fb.acked_bytes = 3 * 1400;
  const auto sent = src.background_step(1, fb);
  EXPECT_EQ(sent.size(), 3u);
  EXPECT_EQ(src.in_flight(), 10u);
}

TEST(LightWeb, StaysBelowElephantThreshold) {
  BackgroundSourceConfig cfg;
  cfg.model = BackgroundModel::LightWeb;
  BackgroundSource src(cfg, 2, 1, Direction::Downlink, 41000, 8);
  BwHungryDetector det;
  std::vector<double> large;
  for (double t = 0; t < 120000; t += 1.0)
    for (const auto& p : src.background_step(t, {})) {
      det.observe({p.ue, p.transport.dst_port, p.transport.src_port}, p.direction,
                  p.size_bytes, p.transport.is_syn, t);
      if (p.size_bytes >= 1000) large.push_back(t);
      EXPECT_FALSE(det.ue_hungry(1, Direction::Downlink, t));
    }
  size_t lo = 0;
  for (size_t i = 0; i < large.size(); ++i) {
    while (large[i] - large[lo] >= 1000.0) ++lo;
    EXPECT_LE(i - lo + 1, 40u);
  }
}

TEST(GroundTruthCsv, RoundTrip) {
  ZoomSource src({}, 5, 0, Direction::Downlink, 50005, 6);
  drive(src, 0, 3000, {});
  std::stringstream ss;
  write_ground_truth_csv(ss, 5, src.ground_truth(), true);
  const auto rows = read_ground_truth_csv(ss);
  const auto& frames = src.ground_truth().frames;
  ASSERT_EQ(rows.size(), frames.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].flow, 5u);
    EXPECT_EQ(rows[i].frame.frame_id, frames[i].frame_id);
    EXPECT_EQ(rows[i].frame.emitted, frames[i].emitted);
    EXPECT_EQ(rows[i].frame.rtp_timestamp, frames[i].rtp_timestamp);
    EXPECT_EQ(rows[i].frame.packets, frames[i].packets);
    EXPECT_EQ(rows[i].frame.ref_base_frame, frames[i].ref_base_frame);
    EXPECT_NEAR(rows[i].frame.camera_pts_ms, frames[i].camera_pts_ms, 1e-3);
  }
}
