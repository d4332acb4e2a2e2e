#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "oracles.h"
#include "streamguard/controller.h"

using namespace streamguard;

namespace {

FlowState st(double bf, double ef, double bd, double ed, double ad) {
  return {bf, ef, bd, ed, ad};
}

oracle::State ost(const FlowState& s) {
  return {s.base_fps, s.enh_fps, s.base_delay_ms, s.enh_delay_ms, s.audio_delay_ms};
}

FlowState random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> fps(0, 24), delay(0, 200);
  return st(fps(rng) / 2, fps(rng), delay(rng), delay(rng), delay(rng) / 2);
}

oracle::Problem to_oracle(const SolverProblem& p) {
  oracle::Problem o;
  o.qoe = p.qoe;
  o.reserved = p.reserved;
  o.nonzoom = p.nonzoom_prb;
  o.slack = p.slack_prb;
  o.alpha = p.alpha;
  o.beta = p.beta;
  return o;
}

SolverProblem random_problem(std::mt19937_64& rng, size_t flows, size_t actions) {
  std::uniform_real_distribution<double> u01(0, 1);
  SolverProblem p;
  p.alpha = u01(rng);
  p.beta = u01(rng);
  p.nonzoom_prb = std::floor(u01(rng) * 3000);
  p.slack_prb = std::floor(u01(rng) * 1500);
  for (size_t i = 0; i < flows; ++i) {
    std::vector<double> q(actions), r(actions);
    for (size_t j = 0; j < actions; ++j) {
      // Coarse grid so ties show up and exercise the tie-break.
      q[j] = std::round(u01(rng) * 20) * 5;
      r[j] = j == 0 ? 0.0 : std::round(u01(rng) * 12) * 50;
    }
    p.qoe.push_back(q);
    p.reserved.push_back(r);
  }
  return p;
}

}  // namespace

TEST(QoeGain, Examples) {
  EXPECT_DOUBLE_EQ(qoe_gain(kNoPriority, st(8, 16, 0, 0, 0)), 1.0);
  EXPECT_NEAR(qoe_gain(kPrioritizeAll, st(4, 8, 40, 40, 25)), 0.75, 1e-12);
  EXPECT_NEAR(qoe_gain(kNoPriority, st(4, 8, 40, 40, 25)), 0.5, 1e-12);
  EXPECT_NEAR(qoe_gain(kPrioritizeAll, st(0, 0, 80, 80, 50)), 0.5, 1e-12);
  EXPECT_NEAR(qoe_gain(kPrioritizeAll, st(0, 0, 500, 500, 500)), 0.5, 1e-12);
}

TEST(QoeGain, MatchesOracleOnRandomStates) {
  std::mt19937_64 rng(11);
  for (int n = 0; n < 500; ++n) {
    const FlowState s = random_state(rng);
    for (const Action& a : all_actions())
      EXPECT_NEAR(qoe_gain(a, s), oracle::qoe_gain(a.base, a.enh, a.audio, ost(s)), 1e-12);
  }
}

TEST(QoeGain, BoundedAndMonotoneInEachBit) {
  std::mt19937_64 rng(12);
  for (int n = 0; n < 500; ++n) {
    const FlowState s = random_state(rng);
    for (const Action& a : all_actions()) {
      const double v = qoe_gain(a, s);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      Action b = a;
      b.base = true;
      EXPECT_GE(qoe_gain(b, s), v - 1e-15);
      b = a;
      b.enh = true;
      EXPECT_GE(qoe_gain(b, s), v - 1e-15);
      b = a;
      b.audio = true;
      EXPECT_GE(qoe_gain(b, s), v - 1e-15);
    }
  }
}

TEST(QoeGain, SaturatedComponentsGainNothing) {
  // Perfect audio: prioritizing audio changes nothing.
  const FlowState s = st(3, 5, 60, 70, 0);
  EXPECT_DOUBLE_EQ(qoe_gain({true, false, true}, s), qoe_gain({true, false, false}, s));
  // Perfect base layer.
  const FlowState b = st(8, 2, 0, 70, 30);
  EXPECT_DOUBLE_EQ(qoe_gain({true, false, false}, b), qoe_gain(kNoPriority, b));
}

TEST(QoeGain, EnhancementCappedByBase) {
  // Enhancement fps far above target cannot lift quality above the base cap.
  const FlowState lo = st(2, 16, 0, 0, 0);
  const FlowState hi = st(2, 100, 0, 0, 0);
  EXPECT_DOUBLE_EQ(qoe_gain(kNoPriority, lo), qoe_gain(kNoPriority, hi));
  const FlowState capped = st(2, 4, 0, 0, 0);  // 4/16 == 2/8
  EXPECT_DOUBLE_EQ(qoe_gain(kNoPriority, capped), qoe_gain(kNoPriority, lo));
}

TEST(Action, ParseAndFormat) {
  EXPECT_EQ(parse_action("(1,0,1)"), kBaseAndAudio);
  EXPECT_EQ(parse_action("1,1,1"), kPrioritizeAll);
  EXPECT_EQ(parse_action("000"), kNoPriority);
  EXPECT_EQ(kBaseAndAudio.str(), "(1,0,1)");
  EXPECT_THROW(parse_action("12"), std::invalid_argument);
  EXPECT_THROW(parse_action("1,0"), std::invalid_argument);
  EXPECT_THROW(parse_action("1,0,1,1"), std::invalid_argument);
  const auto all = all_actions();
  ASSERT_EQ(all.size(), 8u);
  EXPECT_EQ(all.front(), kNoPriority);
  EXPECT_EQ(all.back(), kPrioritizeAll);
  for (size_t i = 1; i < all.size(); ++i) EXPECT_TRUE(action_before(all[i - 1], all[i]));
}

TEST(Fairness, ArithmeticExample) {
  SlackEstimate s;
  s.total_prb = 100;
  s.nonzoom_prb = 60;
  s.slack_prb = 40;
  EXPECT_DOUBLE_EQ(fairness_loss(70, s), 0.5);
  EXPECT_DOUBLE_EQ(fairness_loss(0, s), 0.0);
  EXPECT_DOUBLE_EQ(fairness_loss(40, s), 0.0);
  EXPECT_DOUBLE_EQ(fairness_loss(1000, s), 1.0);
}

TEST(Fairness, RandomPropertiesAgainstOracle) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u01(0, 1);
  for (int n = 0; n < 1000; ++n) {
    SlackEstimate s;
    s.total_prb = 3950;
    s.nonzoom_prb = std::floor(u01(rng) * s.total_prb);
    s.slack_prb = s.total_prb - s.nonzoom_prb;
    const double r_in = u01(rng) * s.slack_prb;
    EXPECT_EQ(fairness_loss(r_in, s), 0.0);
    const double r = u01(rng) * 2 * s.total_prb;
    const double f = fairness_loss(r, s);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
    EXPECT_DOUBLE_EQ(f, oracle::fairness_loss(s.total_prb, s.nonzoom_prb, r));
    EXPECT_GE(fairness_loss(r + 10, s), f);
  }
}

TEST(Fairness, PrbsForLoad) {
  EXPECT_EQ(prbs_for_load(0, 100, 50), 0);
  // 1 Mb/s over 50 ms is 50000 bits; at 500 bits/PRB that is 100 PRBs.
  EXPECT_EQ(prbs_for_load(1e6, 500, 50), 100);
  EXPECT_EQ(prbs_for_load(1e6 + 1, 500, 50), 101);
  const PrioritizedLoads l{0, 400e3, 600e3, 100e3};
  EXPECT_EQ(reserved_prbs(kNoPriority, l, 500, 50), 0);
  EXPECT_EQ(reserved_prbs(kBaseAndAudio, l, 500, 50), prbs_for_load(500e3, 500, 50));
  EXPECT_EQ(reserved_prbs(kPrioritizeAll, l, 500, 50), prbs_for_load(1.1e6, 500, 50));
}

TEST(Fairness, SlackEstimateIdleAndHungry) {
  IntervalGeometry g;
  EXPECT_EQ(g.slots(), 50u);
  EXPECT_EQ(g.total_prb(), 79.0 * 50);

  std::vector<FairnessUe> idle(3);
  for (auto& u : idle) u.bits_per_prb = 400;
  auto s = estimate_slack(idle, g);
  EXPECT_EQ(s.nonzoom_prb, 0);
  EXPECT_EQ(s.slack_prb, g.total_prb());

  // One elephant UE takes everything the others leave.
  std::vector<FairnessUe> ues(2);
  ues[0] = {400, 1e6, 0, false};           // Zoom only, 125 PRBs
  ues[1] = {400, 5e6, 5e6, true};          // hungry background
  s = estimate_slack(ues, g);
  EXPECT_NEAR(s.nonzoom_prb, g.total_prb() - 125, 1.0);
  EXPECT_NEAR(s.slack_prb, 125, 1.0);
  EXPECT_LE(s.default_prbs[0] + s.default_prbs[1], g.total_prb());

  // Without the unbounded assumption a light background UE leaves slack.
  ues[1] = {400, 1e6, 1e6, false};
  s = estimate_slack(ues, g, false);
  EXPECT_NEAR(s.nonzoom_prb, 125, 1.0);
  EXPECT_NEAR(s.slack_prb, g.total_prb() - 125, 1.0);
}

TEST(Solver, SingleFlowHugeSlackPicksMaxQoe) {
  const FlowState s = st(2, 3, 70, 75, 40);
  const std::vector<Action> cols{kNoPriority, kBaseAndAudio, kPrioritizeAll};
  SolverProblem p;
  p.alpha = 1;
  p.beta = 0.5;
  p.nonzoom_prb = 100;
  p.slack_prb = 1e6;
  std::vector<double> q, r;
  for (const Action& a : cols) {
    q.push_back(100 * qoe_gain(a, s));
    r.push_back(10.0 * a.count());
  }
  p.qoe = {q};
  p.reserved = {r};
  for (const auto& res : {solve_exhaustive(p), solve_branch_and_bound(p), solve(p, 12)}) {
    ASSERT_FALSE(res.fallback);
    EXPECT_EQ(res.choice[0], 2u);
    EXPECT_EQ(res.loss, 0.0);
  }
}

TEST(Solver, TieBreakPrefersEarlierColumn) {
  SolverProblem p;
  p.alpha = 0.5;
  p.beta = 0.3;
  p.nonzoom_prb = 10;
  p.slack_prb = 1000;
  p.qoe = {{70, 70, 70}, {50, 60, 60}};
  p.reserved = {{0, 5, 9}, {0, 5, 9}};
  const auto ex = solve_exhaustive(p);
  const auto bb = solve_branch_and_bound(p);
  EXPECT_EQ(ex.choice, (std::vector<size_t>{0, 1}));
  EXPECT_EQ(bb.choice, ex.choice);
}

TEST(Solver, BetaOneOnlyFitsInSlack) {
  SolverProblem p;
  p.alpha = 1;
  p.beta = 1;
  p.nonzoom_prb = 500;
  p.slack_prb = 30;
  p.qoe = {{10, 60, 90}, {10, 60, 90}};
  p.reserved = {{0, 20, 40}, {0, 20, 40}};
  const auto res = solve(p, 12);
  ASSERT_FALSE(res.fallback);
  EXPECT_EQ(res.excess, 0.0);
  EXPECT_LE(res.reserved, p.slack_prb);
  // With beta = 1 QoE carries no weight, so the cheapest feasible wins ties.
  EXPECT_EQ(res.choice, (std::vector<size_t>{0, 0}));
}

TEST(Solver, BetaZeroAlphaOneMaximizesWorstFlow) {
  const std::vector<Action> cols{kNoPriority, kBaseAndAudio, kPrioritizeAll};
  const FlowState a = st(1, 2, 70, 70, 45), b = st(6, 10, 20, 30, 10);
  SolverProblem p;
  p.alpha = 1;
  p.beta = 0;
  p.nonzoom_prb = 100;
  p.slack_prb = 50;
  for (const FlowState& s : {a, b}) {
    std::vector<double> q, r;
    for (const Action& c : cols) {
      q.push_back(100 * qoe_gain(c, s));
      r.push_back(40.0 * c.count());
    }
    p.qoe.push_back(q);
    p.reserved.push_back(r);
  }
  const auto res = solve_exhaustive(p);
  const auto ref = oracle::brute_force(to_oracle(p));
  EXPECT_EQ(res.choice, ref.choice);
  EXPECT_NEAR(res.objective, ref.objective, 1e-9);
  // The worse flow gets full prioritization; e = 120 + ... - 50 stays <= U.
  EXPECT_EQ(res.choice[0], 2u);
  EXPECT_LE(res.excess, p.nonzoom_prb);
}

TEST(Solver, BranchAndBoundEqualsExhaustiveAndOracle) {
  std::mt19937_64 rng(14);
  int fallbacks = 0;
  for (int n = 0; n < 400; ++n) {
    const size_t flows = 1 + n % 6;
    const size_t actions = 1 + (n / 6) % 3;
    SolverProblem p = random_problem(rng, flows, actions);
    if (n % 7 == 0) {
      // Make everything infeasible: every column reserves beyond the cap.
      for (auto& row : p.reserved)
        for (auto& r : row) r = p.slack_prb + p.nonzoom_prb + 1;
    }
    const auto ex = solve_exhaustive(p);
    const auto bb = solve_branch_and_bound(p);
    const auto ref = oracle::brute_force(to_oracle(p));
    ASSERT_EQ(ex.fallback, ref.choice.empty());
    ASSERT_EQ(bb.fallback, ex.fallback);
    if (ex.fallback) {
      ++fallbacks;
      continue;
    }
    EXPECT_EQ(ex.choice, ref.choice) << "instance " << n;
    EXPECT_EQ(bb.choice, ex.choice) << "instance " << n;
    EXPECT_NEAR(bb.objective, ex.objective, 1e-9);
    EXPECT_NEAR(ex.objective, ref.objective, 1e-9);
    EXPECT_TRUE(solver_feasible(p, bb.choice));
    EXPECT_LE(bb.excess, (1 - p.beta) * p.nonzoom_prb + 1e-9);
  }
  EXPECT_GT(fallbacks, 0);
}

TEST(Solver, FractionalReservationsUseTreeSearch) {
  std::mt19937_64 rng(17);
  for (int n = 0; n < 150; ++n) {
    SolverProblem p = random_problem(rng, 1 + n % 6, 1 + (n / 6) % 3);
    for (auto& row : p.reserved)
      for (auto& r : row)
        if (r > 0) r += 0.37;
    const auto ex = solve_exhaustive(p);
    const auto bb = solve_branch_and_bound(p);
    ASSERT_EQ(bb.fallback, ex.fallback);
    if (ex.fallback) continue;
    EXPECT_EQ(bb.choice, ex.choice) << "instance " << n;
    EXPECT_NEAR(bb.objective, ex.objective, 1e-9);
  }
}

TEST(Solver, LargeInstancesMatchTreeSearch) {
  // 3^12 states is the largest space enumerated directly.
  std::mt19937_64 rng(18);
  for (int n = 0; n < 20; ++n) {
    SolverProblem p = random_problem(rng, 12, 3);
    const auto dp = solve_branch_and_bound(p);
    const auto ex = solve_exhaustive(p);
    ASSERT_EQ(dp.fallback, ex.fallback);
    if (ex.fallback) continue;
    EXPECT_EQ(dp.choice, ex.choice);
    EXPECT_NEAR(dp.objective, ex.objective, 1e-9);
  }
}

TEST(Solver, FallbackWhenNothingFits) {
  SolverProblem p;
  p.beta = 1;
  p.nonzoom_prb = 10;
  p.slack_prb = 0;
  p.qoe = {{50, 80}};
  p.reserved = {{5, 6}};  // no zero-cost column offered
  const auto res = solve(p, 12);
  EXPECT_TRUE(res.fallback);
  EXPECT_TRUE(res.choice.empty());
  // The all-no-priority vector itself is always feasible.
  p.reserved = {{0, 6}};
  const auto ok = solve(p, 12);
  EXPECT_FALSE(ok.fallback);
  EXPECT_EQ(ok.choice[0], 0u);
}

TEST(Solver, RejectsMalformedProblem) {
  SolverProblem p;
  p.qoe = {{1, 2}};
  p.reserved = {{0}};
  EXPECT_THROW(solve(p, 12), std::invalid_argument);
  p.qoe = {{}};
  p.reserved = {{}};
  EXPECT_THROW(solve_branch_and_bound(p), std::invalid_argument);
}

TEST(Solver, TwentyFiveFlowsWithinDeadline) {
  std::mt19937_64 rng(15);
  std::vector<double> times;
  for (int n = 0; n < 30; ++n) {
    SolverProblem p = random_problem(rng, 25, 3);
    p.nonzoom_prb = 2000;
    p.slack_prb = 800;
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = solve(p, 12);
    times.push_back(
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    ASSERT_FALSE(res.fallback);
    EXPECT_TRUE(solver_feasible(p, res.choice));
  }
  std::sort(times.begin(), times.end());
  EXPECT_LE(times.back(), 50.0);
}

TEST(Stabilizer, CommitsOnFifthConsecutiveProposal) {
  Stabilizer s(5, 0.0, kPrioritizeAll);
  const Action a = kBaseAndAudio;
  for (int i = 1; i <= 4; ++i) EXPECT_EQ(s.stabilize(1, a, 50.0 * i, 0), kPrioritizeAll);
  EXPECT_EQ(s.stabilize(1, a, 250, 0), a);
  EXPECT_EQ(*s.committed(1), a);
}

TEST(Stabilizer, DifferingProposalResets) {
  Stabilizer s(5, 0.0, kPrioritizeAll);
  const Action a = kBaseAndAudio, b = kNoPriority;
  double t = 0;
  const std::vector<Action> seq{a, a, b, a, a, a, a};
  for (const Action& p : seq) EXPECT_EQ(s.stabilize(1, p, t += 50, 0), kPrioritizeAll);
  EXPECT_EQ(s.stabilize(1, a, t += 50, 0), a);
  // Re-proposing the committed action clears a pending change.
  Stabilizer r(5, 0.0, kPrioritizeAll);
  for (int i = 0; i < 4; ++i) r.stabilize(2, a, t += 50, 0);
  r.stabilize(2, kPrioritizeAll, t += 50, 0);
  EXPECT_EQ(r.stabilize(2, a, t += 50, 0), kPrioritizeAll);
}

TEST(Stabilizer, RandomSequencesNeverCommitWithoutFiveInARow) {
  std::mt19937_64 rng(16);
  const auto acts = all_actions();
  for (int trial = 0; trial < 200; ++trial) {
    Stabilizer s(5, 0.0, kPrioritizeAll);
    std::vector<Action> hist;
    Action committed = kPrioritizeAll;
    size_t last_commit = 0;
    for (size_t i = 0; i < 200; ++i) {
      // Sticky proposals so that runs of five actually happen.
      const Action p = (hist.empty() || rng() % 4 == 0) ? acts[rng() % 3 + 2 * (rng() % 2)]
                                                        : hist.back();
      hist.push_back(p);
      const Action c = s.stabilize(7, p, 50.0 * i, 0);
      if (!(c == committed)) {
        ASSERT_GE(hist.size(), 5u);
        for (size_t k = hist.size() - 5; k < hist.size(); ++k) ASSERT_EQ(hist[k], c);
        if (last_commit) ASSERT_GE(i - last_commit, 5u);
        committed = c;
        last_commit = i;
      }
    }
  }
}

TEST(Stabilizer, WarmupHoldsFullPrioritizationForExactlyWarmup) {
  Stabilizer s(5, 2000.0, kPrioritizeAll);
  const double start = 1000;
  double t = start;
  for (; t < start + 2000; t += 50) {
    EXPECT_EQ(s.stabilize(3, kNoPriority, t, start), kPrioritizeAll);
    EXPECT_TRUE(s.in_warmup(3, t));
  }
  EXPECT_FALSE(s.in_warmup(3, t));
  EXPECT_EQ(s.stabilize(3, kNoPriority, t, start), kNoPriority);
  EXPECT_TRUE(s.in_warmup(99, 0));
  EXPECT_FALSE(s.committed(99).has_value());
}

TEST(Shaping, ProbeDropLaw) {
  EXPECT_DOUBLE_EQ(probe_drop_probability(2e6, 1e6), 0.5);
  EXPECT_EQ(probe_drop_probability(1e6, 1e6), 0.0);
  EXPECT_EQ(probe_drop_probability(1e6, 2e6), 0.0);
  EXPECT_EQ(probe_drop_probability(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(probe_drop_probability(1e6, -1), 1.0);
}

TEST(Shaping, MarkingMap) {
  FlowDecision d;
  d.action = kBaseAndAudio;
  EXPECT_EQ(mark(SubflowKind::Audio, d), PriorityClass::high());
  EXPECT_EQ(mark(SubflowKind::Base, d), PriorityClass::high());
  EXPECT_EQ(mark(SubflowKind::SmallWindowVideo, d), PriorityClass::high());
  EXPECT_EQ(mark(SubflowKind::HighFpsEnhancement, d), PriorityClass::low());
  EXPECT_EQ(mark(SubflowKind::Background, d), PriorityClass::low());
  d.enhancement_drop = true;
  EXPECT_EQ(mark(SubflowKind::LowFpsEnhancement, d).drop, DropDirective::Drop);
  d.probe_drop_probability = 0.3;
  const PriorityClass pc = mark(SubflowKind::Probe, d);
  EXPECT_EQ(pc.level, Priority::High);
  EXPECT_EQ(pc.drop, DropDirective::DropWithProbability);
  EXPECT_DOUBLE_EQ(pc.drop_probability, 0.3);
  d.action = kNoPriority;
  EXPECT_EQ(mark(SubflowKind::Control, d), PriorityClass::low());
}

TEST(Params, Validation) {
  ControllerParams p;
  EXPECT_NO_THROW(p.validate());
  p.alpha = 1.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.beta = -0.1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.hysteresis_multiple = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.candidates.clear();
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.forced_probe_drop = 2.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

namespace {

MonitorReport one_flow_report(double t, Direction dir, double bg_bps, bool hungry) {
  MonitorReport r;
  r.t_ms = t;
  r.interval = static_cast<uint64_t>(t / 50);
  FlowReport f;
  f.flow = 0;
  f.ue = 0;
  f.direction = dir;
  f.first_seen_ms = 0;
  f.state = st(3, 4, 60, 70, 30);
  f.loads.base = 400e3;
  f.loads.enh = 600e3;
  f.loads.audio = 80e3;
  f.loads.probe = 400e3;
  r.flows.push_back(f);
  const size_t d = dir == Direction::Downlink ? 0 : 1;
  UeReport u0;
  u0.ue = 0;
  u0.bits_per_prb = 200;
  u0.loads[d] = f.loads;
  UeReport u1;
  u1.ue = 1;
  u1.bits_per_prb = 600;
  u1.loads[d].background = bg_bps;
  u1.bw_hungry[d] = hungry;
  r.ues = {u0, u1};
  return r;
}

}  // namespace

TEST(Controller, WarmupThenCommitsAndShapes) {
  ControllerParams p;
  p.beta = 0.5;
  Controller c(p, IntervalGeometry{});
  std::vector<FlowDecision> d;
  for (double t = 50; t <= 1950; t += 50) {
    d = c.decide(one_flow_report(t, Direction::Uplink, 50e6, true));
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].action, kPrioritizeAll);
    EXPECT_EQ(d[0].probe_drop_probability, 0.0);
    EXPECT_FALSE(d[0].enhancement_drop);
  }
  for (double t = 2000; t <= 4000; t += 50)
    d = c.decide(one_flow_report(t, Direction::Uplink, 50e6, true));
  const Action final_action = d[0].action;
  EXPECT_EQ(d[0].enhancement_drop, final_action == kBaseAndAudio);
  EXPECT_GE(d[0].probe_drop_probability, 0.0);
  EXPECT_LE(d[0].probe_drop_probability, 1.0);
  ASSERT_FALSE(c.log().empty());
  EXPECT_EQ(c.log().size(), c.solve_times_ms().size());
  for (const auto& row : c.log()) {
    EXPECT_GE(row.fairness_loss, 0.0);
    EXPECT_LE(row.fairness_loss, 1.0);
  }
}

TEST(Controller, BetaZeroWithNoPriorityCandidateOnly) {
  ControllerParams p;
  p.beta = 0;
  p.candidates = {kNoPriority};
  p.warmup_ms = 500;
  Controller c(p, IntervalGeometry{});
  std::vector<FlowDecision> d;
  for (double t = 50; t <= 1500; t += 50)
    d = c.decide(one_flow_report(t, Direction::Downlink, 10e6, true));
  EXPECT_EQ(d[0].action, kNoPriority);
  EXPECT_FALSE(d[0].enhancement_drop);
}

TEST(Controller, IdleCellPrioritizesEverythingAtNoFairnessCost) {
  ControllerParams p;
  p.beta = 0.9;
  p.warmup_ms = 0;
  Controller c(p, IntervalGeometry{});
  std::vector<FlowDecision> d;
  for (double t = 50; t <= 1000; t += 50)
    d = c.decide(one_flow_report(t, Direction::Downlink, 0, false));
  EXPECT_EQ(d[0].action, kPrioritizeAll);
  EXPECT_EQ(c.log().back().fairness_loss, 0.0);
  EXPECT_FALSE(d[0].enhancement_drop);  // downlink never drops enhancement
}

TEST(Controller, ForcedProbeDropAfterWarmup) {
  ControllerParams p;
  p.forced_probe_drop = 0.6;
  p.warmup_ms = 100;
  Controller c(p, IntervalGeometry{});
  auto d = c.decide(one_flow_report(50, Direction::Uplink, 0, false));
  EXPECT_EQ(d[0].probe_drop_probability, 0.0);
  d = c.decide(one_flow_report(200, Direction::Uplink, 0, false));
  EXPECT_DOUBLE_EQ(d[0].probe_drop_probability, 0.6);
}
