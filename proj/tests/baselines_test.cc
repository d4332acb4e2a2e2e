#include <gtest/gtest.h>

#include <deque>
#include <random>

#include "streamguard/baselines.h"

using namespace streamguard;

namespace {

SimPacket zoom_pkt(uint32_t flow, uint32_t bytes) {
  SimPacket p;
  p.flow = flow;
  p.size_bytes = bytes;
  return p;
}

}  // namespace

TEST(Baselines, Parse) {
  EXPECT_EQ(parse_baseline("streamguard").kind, BaselineKind::StreamGuard);
  EXPECT_EQ(parse_baseline("DChannel").kind, BaselineKind::DChannel);
  auto t = parse_baseline("tcran:300");
  EXPECT_EQ(t.kind, BaselineKind::TcRan);
  EXPECT_EQ(t.quota_kbps, 300);
  EXPECT_EQ(t.str(), "tcran:300");
  auto v = parse_baseline("vanilla5g:100");
  EXPECT_EQ(v.kind, BaselineKind::Vanilla5G);
  EXPECT_EQ(v.str(), "vanilla:100");
  EXPECT_THROW(parse_baseline("tcran"), std::invalid_argument);
  EXPECT_THROW(parse_baseline("tcran:-5"), std::invalid_argument);
  EXPECT_THROW(parse_baseline("tcran:3x"), std::invalid_argument);
  EXPECT_THROW(parse_baseline("dchannel:300"), std::invalid_argument);
  EXPECT_THROW(parse_baseline("bogus"), std::invalid_argument);
}

TEST(Baselines, DChannelAlwaysBaseAndAudio) {
  FlowReport f;
  f.flow = 4;
  f.ue = 2;
  f.direction = Direction::Uplink;
  const auto d = baseline_decision(parse_baseline("dchannel"), f);
  EXPECT_EQ(d.action, kBaseAndAudio);
  EXPECT_FALSE(d.enhancement_drop);
  EXPECT_EQ(d.probe_drop_probability, 0.0);
  EXPECT_EQ(d.flow, 4u);

  BaselineMarker m(parse_baseline("dchannel"));
  const SimPacket p = zoom_pkt(4, 1000);
  EXPECT_EQ(m.mark(p, SubflowKind::Base, 0), PriorityClass::high());
  EXPECT_EQ(m.mark(p, SubflowKind::Audio, 0), PriorityClass::high());
  EXPECT_EQ(m.mark(p, SubflowKind::HighFpsEnhancement, 0), PriorityClass::low());
  EXPECT_EQ(m.mark(p, SubflowKind::Background, 0), PriorityClass::low());
}

TEST(Baselines, TcRanUnderQuotaAllHigh) {
  BaselineMarker m(parse_baseline("tcran:300"));
  // 200 kb/s of base + audio: 25 bytes per ms, sent as 250-byte packets every 10 ms.
  for (int i = 0; i < 1000; ++i) {
    const auto kind = i % 2 ? SubflowKind::Audio : SubflowKind::Base;
    EXPECT_EQ(m.mark(zoom_pkt(1, 250), kind, 10.0 * i), PriorityClass::high());
  }
  // Enhancement is never eligible.
  EXPECT_EQ(m.mark(zoom_pkt(1, 10), SubflowKind::LowFpsEnhancement, 20000), PriorityClass::low());
}

TEST(Baselines, VanillaHighShareNearQuotaRatio) {
  BaselineMarker m(parse_baseline("vanilla:100"));
  // 800 kb/s offered: 1000-byte packets every 10 ms for 60 s.
  double high = 0, total = 0;
  for (int i = 0; i < 6000; ++i) {
    const auto pc = m.mark(zoom_pkt(0, 1000), SubflowKind::HighFpsEnhancement, 10.0 * i);
    EXPECT_NE(pc.drop, DropDirective::Drop);
    total += 1000;
    if (pc.level == Priority::High) high += 1000;
  }
  EXPECT_NEAR(high / total, 1.0 / 8, 0.01);
}

TEST(Baselines, TokenBucketWindowBound) {
  std::mt19937_64 rng(21);
  for (double quota : {100.0, 300.0, 500.0}) {
    BaselineMarker m(parse_baseline("vanilla:" + std::to_string(int(quota))));
    const double depth_bytes = quota / 8 * 100;
    std::deque<std::pair<double, double>> win;  // (t, high bytes)
    double in_window = 0;
    double t = 0;
    for (int i = 0; i < 20000; ++i) {
      t += std::uniform_real_distribution<double>(0, 4)(rng);
      const uint32_t bytes = 100 + rng() % 1200;
      const auto pc = m.mark(zoom_pkt(0, bytes), SubflowKind::Base, t);
      EXPECT_EQ(pc.drop, DropDirective::None);
      if (pc.level == Priority::High) {
        win.emplace_back(t, bytes);
        in_window += bytes;
      }
      while (!win.empty() && win.front().first <= t - 1000) {
        in_window -= win.front().second;
        win.pop_front();
      }
      ASSERT_LE(in_window, quota / 8 * 1000 + depth_bytes + 1e-6);
    }
  }
}

TEST(Baselines, PerFlowBuckets) {
  BaselineMarker m(parse_baseline("tcran:100"));
  // Depth is 1250 bytes; flow 0 drains its bucket, flow 1 is unaffected.
  EXPECT_EQ(m.mark(zoom_pkt(0, 1200), SubflowKind::Base, 0), PriorityClass::high());
  EXPECT_EQ(m.mark(zoom_pkt(0, 1200), SubflowKind::Base, 0), PriorityClass::low());
  EXPECT_EQ(m.mark(zoom_pkt(1, 1200), SubflowKind::Base, 0), PriorityClass::high());
  // Refills at 12.5 bytes per ms.
  EXPECT_EQ(m.mark(zoom_pkt(0, 1200), SubflowKind::Base, 100), PriorityClass::high());
}

TEST(TokenBucket, RefillCappedAtDepth) {
  TokenBucket b(1.0, 100);
  EXPECT_TRUE(b.consume(100, 0));
  EXPECT_FALSE(b.consume(1, 0));
  EXPECT_TRUE(b.consume(50, 50));
  EXPECT_TRUE(b.consume(50, 1e6));
  EXPECT_DOUBLE_EQ(b.tokens(), 50);
}
