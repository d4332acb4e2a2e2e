#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "streamguard/dpi.h"
#include "streamguard/monitor.h"
#include "streamguard/traffic_gen.h"

using namespace streamguard;

TEST(Ewma, StepAndAlternation) {
  Ewma e(0.2);
  e.update(0.0);
  for (int i = 0; i < 5; ++i) e.update(1.0);
  EXPECT_NEAR(e.value(), 1 - std::pow(0.8, 5), 1e-12);
  EXPECT_NEAR(e.value(), 0.672, 1e-3);

  Ewma c(0.2);
  c.update(3.0);
  for (int n = 1; n < 20; ++n) {
    c.update(5.0);
    EXPECT_NEAR(std::abs(c.value() - 5.0), std::pow(0.8, n) * 2.0, 1e-12);
  }

  Ewma alt(0.2);
  for (int n = 0; n < 400; ++n) alt.update(n % 2);
  for (int n = 0; n < 10; ++n) {
    alt.update(n % 2);
    EXPECT_GT(alt.value(), 0.44);
    EXPECT_LT(alt.value(), 0.56);
  }
}

TEST(UlDelayBaseline, MinOffsetRecurrence) {
  UlDelayBaseline b;
  EXPECT_DOUBLE_EQ(b.observe(130, 100), 0);
  EXPECT_DOUBLE_EQ(b.observe(240, 200), 10);
  EXPECT_DOUBLE_EQ(b.observe(335, 300), 5);
  EXPECT_DOUBLE_EQ(*b.baseline(), 30);
}

TEST(UlDelayBaseline, NonIncreasingAndNonNegative) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> off(0, 200);
  UlDelayBaseline b;
  double prev = 1e300;
  for (int i = 0; i < 10000; ++i) {
    const double rtp = i * 20.0;
    EXPECT_GE(b.observe(rtp + off(rng), rtp), 0.0);
    EXPECT_LE(*b.baseline(), prev);
    prev = *b.baseline();
  }
}

TEST(BsrLoadEstimator, WorkedExamples) {
  BsrLoadEstimator e;
  e.on_bsr(0, 10000);
  e.on_transmitted(4000);
  EXPECT_DOUBLE_EQ(e.on_bsr(5, 8000), 2000);

  BsrLoadEstimator capped;
  capped.on_bsr(0, 150000);
  capped.on_transmitted(4000);
  EXPECT_DOUBLE_EQ(capped.on_bsr(5, 150000), 4000);

  BsrLoadEstimator reset;
  reset.on_bsr(0, 10000);
  EXPECT_DOUBLE_EQ(reset.on_bsr(5, 0), -10000);
}

TEST(BsrLoadEstimator, WindowedRate) {
  BsrLoadEstimator e;
  for (int k = 1; k <= 400; ++k) {
    e.on_transmitted(625);  // 125 kB/s steady through an empty queue
    e.on_bsr(k * 5.0, 0);
  }
  EXPECT_NEAR(e.load_bps(2000), 1e6, 1e-6);
}

TEST(DlFrameDelay, FormulaOnStamps) {
  SimPacket p;
  p.stamps.sdap_ingress_ms = 100;
  p.stamps.ack_ms = 112;
  std::vector<SimPacket> f{p};
  EXPECT_DOUBLE_EQ(dl_frame_delay(f, 4, 1.0), 8.0);
  SimPacket q = p;
  q.stamps.sdap_ingress_ms = 101;
  q.stamps.ack_ms = 118;
  f.push_back(q);
  EXPECT_DOUBLE_EQ(dl_frame_delay(f, 4, 1.0), 14.0);
}

TEST(BwHungry, AgeGateAndStickiness) {
  BwHungryDetector d;
  const ConnectionKey k{0, 40001, 443};
  d.observe(k, Direction::Downlink, 1400, true, 0);
  for (int i = 1; i < 100; ++i) d.observe(k, Direction::Downlink, 1400, false, i * 10.0);
  EXPECT_FALSE(d.is_hungry(k, 999));  // 100 large pkts but only 1 s old
  EXPECT_TRUE(d.is_hungry(k, 2000));
  EXPECT_TRUE(d.ue_hungry(0, Direction::Downlink, 2000));
  EXPECT_FALSE(d.ue_hungry(0, Direction::Uplink, 2000));
  EXPECT_TRUE(d.is_hungry(k, 600000));  // sticky while idle
}

TEST(BwHungry, FiftyIsNotMoreThanFifty) {
  BwHungryDetector d;
  const ConnectionKey k{1, 40002, 443};
  for (int s = 0; s < 5; ++s)
    for (int i = 0; i < 50; ++i)
      d.observe(k, Direction::Uplink, 1000, s == 0 && i == 0, s * 1000.0 + i * 20.0);
  EXPECT_FALSE(d.is_hungry(k, 6000));
  BwHungryDetector small;
  for (int i = 0; i < 500; ++i) small.observe(k, Direction::Uplink, 999, i == 0, i * 5.0);
  EXPECT_FALSE(small.is_hungry(k, 6000));
}

TEST(BwHungry, BulkFlowDetected) {
  BackgroundSource src({}, 1, 0, Direction::Downlink, 40001, 1);
  BwHungryDetector d;
  // Ack everything each 30 ms: the window keeps growing.
  for (double t = 0; t < 5000; t += 30) {
    BackgroundFeedback fb;
    fb.acked_bytes = src.in_flight() * 1400;
    for (const auto& p : src.background_step(t, fb))
      d.observe({p.ue, p.transport.dst_port, p.transport.src_port}, p.direction, p.size_bytes,
                p.transport.is_syn, t);
  }
  EXPECT_TRUE(d.ue_hungry(0, Direction::Downlink, 5000));
}

namespace {

// Downlink Zoom flow through the monitor with a fixed per-packet delay.
struct DlHarness {
  DpiPlugin dpi = make_zoom_plugin();
  Monitor mon{MonitorConfig{}, dpi, 1};
  ZoomSource src{ZoomSourceConfig{}, 0, 0, Direction::Downlink, 50000, 5};
  uint64_t base_bytes_last_s = 0;

  void run(double until, double delay_ms, bool drop_one_packet_per_base = false) {
    std::vector<std::pair<double, SimPacket>> acks;
    for (double t = 0; t < until; t += 1.0) {
      for (auto p : src.zoom_step(t, {})) {
        mon.on_dl_ingress(p, t);
        if (p.kind == SubflowKind::Base && t >= until - 1000) base_bytes_last_s += p.size_bytes;
        p.stamps.sdap_ingress_ms = t;
        p.stamps.ack_ms = t + delay_ms + 4.0;
        if (drop_one_packet_per_base && p.kind == SubflowKind::Base && p.rtp->last_of_frame)
          continue;
        acks.emplace_back(*p.stamps.ack_ms, p);
      }
      while (!acks.empty() && acks.front().first <= t) {
        mon.on_dl_ack(acks.front().second);
        acks.erase(acks.begin());
      }
    }
  }
};

}  // namespace

TEST(Monitor, FpsAndDelayFromCompleteFrames) {
  DlHarness h;
  h.run(10000, 20.0);
  const auto rep = h.mon.snapshot(10000);
  ASSERT_EQ(rep.flows.size(), 1u);
  const auto& s = rep.flows[0].state;
  EXPECT_NEAR(s.base_fps, 8, 1);
  EXPECT_NEAR(s.enh_fps, 16, 1);
  EXPECT_NEAR(s.base_delay_ms, 20, 1e-9);
  EXPECT_NEAR(s.enh_delay_ms, 20, 1e-9);
  EXPECT_NEAR(s.audio_delay_ms, 20, 1e-9);
}

TEST(Monitor, IncompleteFramesNotCounted) {
  DlHarness h;
  h.run(5000, 5.0, true);
  const auto rep = h.mon.snapshot(5000);
  EXPECT_EQ(rep.flows[0].state.base_fps, 0.0);
  EXPECT_NEAR(rep.flows[0].state.enh_fps, 16, 1);
}

TEST(Monitor, LoadsTrackGenerator) {
  DlHarness h;
  h.run(10000, 5.0);
  MonitorReport rep;
  for (int i = 0; i < 100; ++i) rep = h.mon.snapshot(10000);  // let the EWMA settle
  const double truth = h.base_bytes_last_s * 8.0;
  EXPECT_NEAR(rep.flows[0].loads.base, truth, 0.05 * truth);
  EXPECT_NEAR(rep.ues[0].loads[0].base, truth, 0.05 * truth);
}

TEST(Monitor, IdleReport) {
  DpiPlugin dpi = make_zoom_plugin();
  Monitor mon({}, dpi, 2);
  const auto rep = mon.snapshot(50);
  EXPECT_TRUE(rep.flows.empty());
  ASSERT_EQ(rep.ues.size(), 2u);
  EXPECT_EQ(rep.ues[0].loads[0].total(), 0.0);
  EXPECT_EQ(rep.ues[1].loads[1].total(), 0.0);
}

TEST(Monitor, RanMetricsFollowSnrStep) {
  DpiPlugin dpi = make_zoom_plugin();
  Monitor mon({}, dpi, 1);
  Cell cell({}, 1);
  cell.add_ue(4);
  for (int s = 0; s < 50; ++s) mon.on_slot(cell.schedule_slot(s), cell);
  const double before = mon.snapshot(50).ues[0].cqi;
  cell.set_snr(0, 25);
  for (int s = 50; s < 100; ++s) mon.on_slot(cell.schedule_slot(s), cell);
  const auto after = mon.snapshot(100).ues[0];
  EXPECT_EQ(before, snr_to_link(default_mcs_table(), 4).cqi);
  EXPECT_EQ(after.cqi, snr_to_link(default_mcs_table(), 25).cqi);
  EXPECT_DOUBLE_EQ(after.snr_db, 25);
}

TEST(Monitor, UplinkDelayUsesRtpClock) {
  DpiPlugin dpi = make_zoom_plugin();
  Monitor mon({}, dpi, 1);
  ZoomSource src({}, 0, 0, Direction::Uplink, 50000, 5);
  // Constant 10 ms path, then a 40 ms queue from t = 3 s.
  for (double t = 0; t < 4000; t += 1.0)
    for (auto p : src.zoom_step(t, {})) {
      p.stamps.phy_deliver_ms = t + (t >= 3000 ? 50.0 : 10.0);
      mon.on_ul_arrival(p, *p.stamps.phy_deliver_ms);
    }
  const auto rep = mon.snapshot(4050);
  EXPECT_TRUE(rep.flows.empty());  // uplink flows appear via the shim only
  mon.on_ul_shim(src.zoom_step(4000, {}).front(), 4000);
  const auto rep2 = mon.snapshot(4050);
  ASSERT_EQ(rep2.flows.size(), 1u);
  EXPECT_NEAR(rep2.flows[0].state.audio_delay_ms, 40.0, 0.1);
  EXPECT_NEAR(rep2.flows[0].state.base_delay_ms, 40.0, 0.1);
}
