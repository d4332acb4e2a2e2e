#include "streamguard/controller.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "streamguard/csv_util.h"

namespace streamguard {

namespace {

double clip01(double x) { return std::clamp(x, 0.0, 1.0); }

constexpr double kTieTolerance = 1e-9;
constexpr double kFeasTolerance = 1e-9;
constexpr double kExhaustiveLimit = 5e6;

}  // namespace

std::string Action::str() const {
  std::string s = "(0,0,0)";
  s[1] = base ? '1' : '0';
  s[3] = enh ? '1' : '0';
  s[5] = audio ? '1' : '0';
  return s;
}

Action parse_action(const std::string& s) {
  std::string digits;
  for (char c : s) {
    if (c == '0' || c == '1') {
      digits.push_back(c);
    } else if (c != '(' && c != ')' && c != ',' && c != ' ') {
      throw std::invalid_argument("bad action: " + s);
    }
  }
  if (digits.size() != 3) throw std::invalid_argument("bad action: " + s);
  return {digits[0] == '1', digits[1] == '1', digits[2] == '1'};
}

std::vector<Action> all_actions() {
  std::vector<Action> out;
  for (int m = 0; m < 8; ++m) out.push_back({(m & 4) != 0, (m & 2) != 0, (m & 1) != 0});
  std::sort(out.begin(), out.end(), action_before);
  return out;
}

bool action_before(const Action& a, const Action& b) {
  if (a.count() != b.count()) return a.count() < b.count();
  auto key = [](const Action& x) { return std::tuple(x.base, x.enh, x.audio); };
  return key(a) < key(b);
}

double qoe_gain(const Action& a, const FlowState& s) {
  constexpr double kBaseFps = 8.0, kEnhFps = 16.0;
  constexpr double kVideoDelay = 80.0, kAudioDelay = 50.0;
  constexpr double kWBase = 0.4, kWEnh = 0.2, kWAudio = 0.4, kBoost = 0.5;

  const double q_b_fps = clip01(s.base_fps / kBaseFps);
  const double q_e_fps = std::min(clip01(s.enh_fps / kEnhFps), q_b_fps);
  const double q_b_delay = clip01(1.0 - s.base_delay_ms / kVideoDelay);
  const double q_e_delay = clip01(1.0 - s.enh_delay_ms / kVideoDelay);
  const double q_audio = clip01(1.0 - s.audio_delay_ms / kAudioDelay);

  const double q_base = 0.7 * q_b_fps + 0.3 * q_b_delay;
  const double q_enh = 0.5 * q_e_fps + 0.5 * q_e_delay;
  const double q0 = kWBase * q_base + kWEnh * q_enh + kWAudio * q_audio;
  const double gain = kBoost * (kWBase * a.base * (1.0 - q_base) +
                                kWEnh * a.enh * (1.0 - q_enh) +
                                kWAudio * a.audio * (1.0 - q_audio));
  return clip01(q0 + gain);
}

// ------------------------------------------------------------- fairness

uint32_t IntervalGeometry::slots() const {
  return static_cast<uint32_t>(std::llround(interval_ms / slot_ms));
}

double prbs_for_load(double load_bps, double bits_per_prb, double interval_ms) {
  if (load_bps <= 0.0) return 0.0;
  const double bits = load_bps * interval_ms / 1000.0;
  return std::ceil(bits / std::max(bits_per_prb, 1.0));
}

SlackEstimate estimate_slack(std::span<const FairnessUe> ues,
                             const IntervalGeometry& g, bool unbounded_hungry) {
  std::vector<uint64_t> demand(ues.size());
  for (size_t i = 0; i < ues.size(); ++i) {
    const auto& u = ues[i];
    demand[i] = (unbounded_hungry && u.bw_hungry)
                    ? kUnboundedDemand
                    : static_cast<uint64_t>(prbs_for_load(
                          u.total_load_bps, u.bits_per_prb, g.interval_ms));
  }
  SlackEstimate out;
  out.total_prb = g.total_prb();
  out.default_prbs = simulate_interval_allocation(demand, g.prbs_per_slot, g.slots());
  double u_prb = 0.0;
  for (size_t i = 0; i < ues.size(); ++i) {
    const auto& u = ues[i];
    double share = 0.0;
    if (unbounded_hungry && u.bw_hungry) {
      share = 1.0;  // unbounded non-Zoom demand dominates the ratio
    } else if (u.total_load_bps > 0.0) {
      share = std::clamp(u.nonzoom_load_bps / u.total_load_bps, 0.0, 1.0);
    }
    u_prb += static_cast<double>(out.default_prbs[i]) * share;
  }
  out.nonzoom_prb = u_prb;
  out.slack_prb = out.total_prb - u_prb;
  return out;
}

double fairness_loss(double reserved_prb, const SlackEstimate& slack) {
  const double excess = std::max(0.0, reserved_prb - slack.slack_prb);
  return clip01(excess / std::max(1.0, slack.nonzoom_prb));
}

double reserved_prbs(const Action& a, const PrioritizedLoads& l,
                     double bits_per_prb, double interval_ms) {
  double load = 0.0;
  if (a.base) load += l.base_bps;
  if (a.enh) load += l.enh_bps;
  if (a.audio) load += l.audio_bps;
  return prbs_for_load(load, bits_per_prb, interval_ms);
}

// --------------------------------------------------------------- solver

double solver_objective(const SolverProblem& p, std::span<const size_t> choice,
                        double* q_agg, double* excess) {
  const size_t n = choice.size();
  double mn = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  double r = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double q = p.qoe[i][choice[i]];
    mn = std::min(mn, q);
    sum += q;
    r += p.reserved[i][choice[i]];
  }
  if (n == 0) mn = 0.0;
  const double mean = n ? sum / static_cast<double>(n) : 0.0;
  const double q = p.alpha * mn + (1.0 - p.alpha) * mean;
  const double e = std::max(0.0, r - p.slack_prb);
  const double f = 1.0 - e / std::max(1.0, p.nonzoom_prb);
  if (q_agg) *q_agg = q;
  if (excess) *excess = e;
  return (1.0 - p.beta) * q + p.beta * f;
}

bool solver_feasible(const SolverProblem& p, std::span<const size_t> choice) {
  double r = 0.0;
  for (size_t i = 0; i < choice.size(); ++i) r += p.reserved[i][choice[i]];
  const double e = std::max(0.0, r - p.slack_prb);
  return e <= (1.0 - p.beta) * p.nonzoom_prb + kFeasTolerance;
}

namespace {

void validate_problem(const SolverProblem& p) {
  if (p.qoe.size() != p.reserved.size())
    throw std::invalid_argument("solver: qoe/reserved size mismatch");
  for (size_t i = 0; i < p.qoe.size(); ++i) {
    if (p.qoe[i].empty() || p.qoe[i].size() != p.reserved[i].size())
      throw std::invalid_argument("solver: every flow needs at least one action");
  }
}

void finish(const SolverProblem& p, SolverResult& r) {
  if (r.choice.empty() && !p.qoe.empty()) {
    r.fallback = true;
    return;
  }
  double r_total = 0.0;
  for (size_t i = 0; i < r.choice.size(); ++i) r_total += p.reserved[i][r.choice[i]];
  r.objective = solver_objective(p, r.choice, &r.q_agg, &r.excess);
  r.reserved = r_total;
  r.loss = r.excess / std::max(1.0, p.nonzoom_prb);
}

}  // namespace

SolverResult solve_exhaustive(const SolverProblem& p) {
  validate_problem(p);
  SolverResult res;
  const size_t n = p.qoe.size();
  std::vector<size_t> cur(n, 0);
  double best = -std::numeric_limits<double>::infinity();
  bool found = false;
  while (true) {
    ++res.nodes;
    if (solver_feasible(p, cur)) {
      const double obj = solver_objective(p, cur);
      if (!found || obj > best + kTieTolerance) {
        best = obj;
        res.choice = cur;
        found = true;
      }
    }
    // Lexicographic odometer, first flow most significant.
    bool done = true;
    for (size_t k = n; k-- > 0;) {
      if (++cur[k] < p.qoe[k].size()) {
        done = false;
        break;
      }
      cur[k] = 0;
    }
    if (done) break;
  }
  finish(p, res);
  return res;
}

namespace {

struct Segment {
  double dr;
  double dq;
  double slope() const { return dq / dr; }
};

// Upper concave hull of (reserved, qoe) points rising from the cheapest one.
std::vector<Segment> hull_segments(const std::vector<double>& r,
                                   const std::vector<double>& q, double* base_r,
                                   double* base_q) {
  std::vector<std::pair<double, double>> pts;
  for (size_t j = 0; j < r.size(); ++j) pts.emplace_back(r[j], q[j]);
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : a.second > b.second;
  });
  std::vector<std::pair<double, double>> hull;
  for (const auto& pt : pts) {
    if (!hull.empty() && pt.first == hull.back().first) continue;
    if (!hull.empty() && pt.second <= hull.back().second) continue;
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull.back();
      const double cross = (b.first - a.first) * (pt.second - a.second) -
                           (b.second - a.second) * (pt.first - a.first);
      if (cross >= 0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(pt);
  }
  *base_r = hull.front().first;
  *base_q = hull.front().second;
  std::vector<Segment> segs;
  for (size_t k = 1; k < hull.size(); ++k)
    segs.push_back({hull[k].first - hull[k - 1].first, hull[k].second - hull[k - 1].second});
  return segs;
}

class BranchAndBound {
 public:
  explicit BranchAndBound(const SolverProblem& p) : p_(p), n_(p.qoe.size()) {
    cap_ = p.slack_prb + (1.0 - p.beta) * p.nonzoom_prb + kFeasTolerance;
    lmax_ = std::max(1.0, p.nonzoom_prb);
    w_mean_ = n_ ? (1.0 - p.beta) * (1.0 - p.alpha) / static_cast<double>(n_) : 0.0;
    w_min_ = (1.0 - p.beta) * p.alpha;

    std::vector<std::vector<Segment>> segs(n_);
    std::vector<double> base_r(n_), base_q(n_), max_q(n_);
    for (size_t i = 0; i < n_; ++i) {
      segs[i] = hull_segments(p.reserved[i], p.qoe[i], &base_r[i], &base_q[i]);
      max_q[i] = *std::max_element(p.qoe[i].begin(), p.qoe[i].end());
    }
    suffix_.resize(n_ + 1);
    for (size_t k = n_; k-- > 0;) {
      Suffix& s = suffix_[k];
      const Suffix& next = suffix_[k + 1];
      s.min_r = next.min_r + base_r[k];
      s.base_q = next.base_q + base_q[k];
      s.min_max_q = std::min(next.min_max_q, max_q[k]);
      s.segs = next.segs;
      s.segs.insert(s.segs.end(), segs[k].begin(), segs[k].end());
      std::stable_sort(s.segs.begin(), s.segs.end(),
                       [](const Segment& a, const Segment& b) { return a.slope() > b.slope(); });
    }
  }

  SolverResult run() {
    SolverResult res;
    cur_.assign(n_, 0);
    if (suffix_[0].min_r > cap_) {
      finish(p_, res);
      return res;
    }
    incumbent_ = greedy();
    dfs(0, 0.0, 0.0, std::numeric_limits<double>::infinity(), res);
    if (found_) res.choice = best_choice_;
    finish(p_, res);
    return res;
  }

 private:
  struct Suffix {
    double min_r = 0.0;
    double base_q = 0.0;
    double min_max_q = std::numeric_limits<double>::infinity();
    std::vector<Segment> segs;
  };

  // Local search from the cheapest vector; only used for pruning.
  double greedy() {
    std::vector<size_t> c(n_);
    for (size_t i = 0; i < n_; ++i) {
      size_t bj = 0;
      for (size_t j = 1; j < p_.reserved[i].size(); ++j)
        if (p_.reserved[i][j] < p_.reserved[i][bj]) bj = j;
      c[i] = bj;
    }
    if (!solver_feasible(p_, c)) return -std::numeric_limits<double>::infinity();
    double best = solver_objective(p_, c);
    for (size_t iter = 0; iter < 4 * n_ + 4; ++iter) {
      double gain_best = best;
      size_t bi = n_, bj = 0;
      for (size_t i = 0; i < n_; ++i) {
        const size_t keep = c[i];
        for (size_t j = 0; j < p_.qoe[i].size(); ++j) {
          if (j == keep) continue;
          c[i] = j;
          if (solver_feasible(p_, c)) {
            const double v = solver_objective(p_, c);
            if (v > gain_best + kTieTolerance) {
              gain_best = v;
              bi = i;
              bj = j;
            }
          }
        }
        c[i] = keep;
      }
      if (bi == n_) break;
      c[bi] = bj;
      best = gain_best;
    }
    return best;
  }

  double bound(size_t k, double r_fixed, double q_fixed, double min_fixed) const {
    const Suffix& s = suffix_[k];
    const double min_term = std::min(min_fixed, s.min_max_q);
    double r = r_fixed + s.min_r;
    double v = w_mean_ * (q_fixed + s.base_q) -
               p_.beta * std::max(0.0, r - p_.slack_prb) / lmax_;
    const double penalty = p_.beta / lmax_;
    for (const Segment& seg : s.segs) {
      double dr = seg.dr;
      const double gain = w_mean_ * seg.slope();
      if (gain <= 0.0) break;
      while (dr > 0.0) {
        double chunk, rate;
        if (r < p_.slack_prb) {
          chunk = std::min(dr, p_.slack_prb - r);
          rate = gain;
        } else {
          chunk = dr;
          rate = gain - penalty;
        }
        chunk = std::min(chunk, cap_ - r);
        if (rate <= 0.0 || chunk <= 0.0) {
          dr = 0.0;
          break;
        }
        v += rate * chunk;
        r += chunk;
        dr -= chunk;
      }
      if (r >= cap_) break;
    }
    const double mt = std::isinf(min_term) ? 0.0 : min_term;
    return w_min_ * mt + v + p_.beta + 1e-9 * (1.0 + std::abs(v));
  }

  void dfs(size_t k, double r_fixed, double q_fixed, double min_fixed,
           SolverResult& res) {
    ++res.nodes;
    if (k == n_) {
      if (!solver_feasible(p_, cur_)) return;
      const double obj = solver_objective(p_, cur_);
      if (!found_ || obj > best_ + kTieTolerance) {
        best_ = obj;
        best_choice_ = cur_;
        found_ = true;
      }
      return;
    }
    for (size_t j = 0; j < p_.qoe[k].size(); ++j) {
      const double r = r_fixed + p_.reserved[k][j];
      if (r + suffix_[k + 1].min_r > cap_) continue;
      const double q = q_fixed + p_.qoe[k][j];
      const double mn = std::min(min_fixed, p_.qoe[k][j]);
      const double b = bound(k + 1, r, q, mn);
      if (found_ && b <= best_ + kTieTolerance) continue;
      if (b < incumbent_ - kTieTolerance) continue;
      cur_[k] = j;
      dfs(k + 1, r, q, mn, res);
    }
  }

  const SolverProblem& p_;
  size_t n_;
  double cap_, lmax_, w_mean_, w_min_;
  std::vector<Suffix> suffix_;
  std::vector<size_t> cur_;
  std::vector<size_t> best_choice_;
  double best_ = 0.0;
  bool found_ = false;
  double incumbent_ = -std::numeric_limits<double>::infinity();
};

// Branches on the value of the worst flow's QoE. For a fixed floor m every
// flow is limited to actions scoring at least m, which leaves a separable
// objective in the total reservation; a dynamic program over integer PRB
// totals solves it exactly. A floor is pruned when m plus the per-flow best
// QoE and zero-excess fairness cannot beat the incumbent.
class FloorSearch {
 public:
  explicit FloorSearch(const SolverProblem& p) : p_(p), n_(p.qoe.size()) {
    w_min_ = (1.0 - p.beta) * p.alpha;
    w_mean_ = (1.0 - p.beta) * (1.0 - p.alpha) / static_cast<double>(n_);
    lmax_ = std::max(1.0, p.nonzoom_prb);
    const double cap = p.slack_prb + (1.0 - p.beta) * p.nonzoom_prb + kFeasTolerance;
    applicable_ = cap >= 0.0 && cap < kMaxCells;
    if (!applicable_) return;
    cap_ = static_cast<size_t>(std::floor(cap));
    applicable_ = static_cast<double>(n_ + 1) * static_cast<double>(cap_ + 1) <= kMaxCells;
    for (const auto& row : p.reserved)
      for (double r : row)
        applicable_ = applicable_ && r >= 0.0 && r == std::floor(r) && r < kMaxCells;
  }

  bool applicable() const { return applicable_; }

  SolverResult run() {
    SolverResult res;
    double ceiling = std::numeric_limits<double>::infinity();
    double best_case_q = 0.0;
    for (const auto& row : p_.qoe) {
      const double mx = *std::max_element(row.begin(), row.end());
      ceiling = std::min(ceiling, mx);
      best_case_q += mx;
    }
    // Floors worth trying, highest first.
    std::vector<double> floors;
    if (w_min_ > 0.0) {
      for (const auto& row : p_.qoe)
        for (double q : row)
          if (q <= ceiling) floors.push_back(q);
      std::sort(floors.begin(), floors.end(), std::greater<>());
      floors.erase(std::unique(floors.begin(), floors.end()), floors.end());
    } else {
      floors.push_back(-std::numeric_limits<double>::infinity());
    }
    const double upper_rest = w_mean_ * best_case_q + p_.beta;

    double best = -std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, double>> values;  // (floor, value)
    for (double m : floors) {
      const double floor_term = std::isinf(m) ? 0.0 : w_min_ * m;
      if (floor_term + upper_rest < best - kTieTolerance) break;
      const double v = floor_term + fill(m, res.nodes);
      values.emplace_back(m, v);
      best = std::max(best, v);
    }
    if (!std::isfinite(best)) {
      finish(p_, res);
      return res;
    }
    // Lexicographically first vector within tolerance of the optimum.
    for (const auto& [m, v] : values) {
      if (v < best - kTieTolerance) continue;
      fill(m, res.nodes);
      const double floor_term = std::isinf(m) ? 0.0 : w_min_ * m;
      std::vector<size_t> c = trace(m, best - floor_term);
      if (!c.empty() && (res.choice.empty() || c < res.choice)) res.choice = std::move(c);
    }
    finish(p_, res);
    return res;
  }

 private:
  static constexpr double kMaxCells = 4e6;
  static constexpr double kNeg = -std::numeric_limits<double>::infinity();

  double fairness(size_t r) const {
    return p_.beta * (1.0 - std::max(0.0, static_cast<double>(r) - p_.slack_prb) / lmax_);
  }

  // table_[k][r]: best mean-QoE plus fairness of flows k.. given r PRBs
  // already reserved by earlier flows.
  double fill(double floor_q, uint64_t& nodes) {
    table_.assign((n_ + 1) * (cap_ + 1), kNeg);
    for (size_t r = 0; r <= cap_; ++r) at(n_, r) = fairness(r);
    for (size_t k = n_; k-- > 0;) {
      const auto& q = p_.qoe[k];
      const auto& res = p_.reserved[k];
      for (size_t r = 0; r <= cap_; ++r) {
        double v = kNeg;
        for (size_t j = 0; j < q.size(); ++j) {
          if (q[j] < floor_q) continue;
          const size_t rr = r + static_cast<size_t>(res[j]);
          if (rr > cap_) continue;
          const double next = at(k + 1, rr);
          if (next == kNeg) continue;
          v = std::max(v, w_mean_ * q[j] + next);
        }
        at(k, r) = v;
      }
      nodes += cap_ + 1;
    }
    return at(0, 0);
  }

  std::vector<size_t> trace(double floor_q, double target) const {
    std::vector<size_t> c(n_);
    size_t r = 0;
    for (size_t k = 0; k < n_; ++k) {
      const auto& q = p_.qoe[k];
      bool found = false;
      for (size_t j = 0; j < q.size() && !found; ++j) {
        if (q[j] < floor_q) continue;
        const size_t rr = r + static_cast<size_t>(p_.reserved[k][j]);
        if (rr > cap_ || at(k + 1, rr) == kNeg) continue;
        if (w_mean_ * q[j] + at(k + 1, rr) >= target - kTieTolerance) {
          c[k] = j;
          target -= w_mean_ * q[j];
          r = rr;
          found = true;
        }
      }
      if (!found) return {};
    }
    return c;
  }

  double& at(size_t k, size_t r) { return table_[k * (cap_ + 1) + r]; }
  double at(size_t k, size_t r) const { return table_[k * (cap_ + 1) + r]; }

  const SolverProblem& p_;
  size_t n_;
  double w_min_ = 0.0, w_mean_ = 0.0, lmax_ = 1.0;
  size_t cap_ = 0;
  bool applicable_ = false;
  std::vector<double> table_;
};

}  // namespace

SolverResult solve_branch_and_bound(const SolverProblem& p) {
  validate_problem(p);
  if (p.qoe.empty()) {
    SolverResult r;
    finish(p, r);
    return r;
  }
  FloorSearch floors(p);
  if (floors.applicable()) return floors.run();
  return BranchAndBound(p).run();
}

SolverResult solve(const SolverProblem& p, size_t enumeration_threshold) {
  double space = 1.0;
  for (const auto& row : p.qoe) space *= static_cast<double>(std::max<size_t>(1, row.size()));
  if (p.qoe.size() <= enumeration_threshold && space <= kExhaustiveLimit)
    return solve_exhaustive(p);
  return solve_branch_and_bound(p);
}

// ---------------------------------------------------------- stabilizer

Action Stabilizer::stabilize(uint32_t flow, const Action& proposal,
                             double now_ms, double flow_start_ms) {
  auto [it, inserted] = tracks_.try_emplace(flow);
  Track& t = it->second;
  if (inserted) {
    t.start_ms = flow_start_ms;
    t.committed = warmup_action_;
  }
  if (proposal == t.committed) {
    t.pending.reset();
    t.count = 0;
  } else if (t.pending && *t.pending == proposal) {
    t.count = std::min(t.count + 1, confirmations_);
  } else {
    t.pending = proposal;
    t.count = 1;
  }
  if (now_ms - t.start_ms < warmup_ms_) return t.committed;
  if (t.pending && t.count >= confirmations_) {
    t.committed = *t.pending;
    t.pending.reset();
    t.count = 0;
  }
  return t.committed;
}

bool Stabilizer::in_warmup(uint32_t flow, double now_ms) const {
  auto it = tracks_.find(flow);
  return it == tracks_.end() || now_ms - it->second.start_ms < warmup_ms_;
}

std::optional<Action> Stabilizer::committed(uint32_t flow) const {
  auto it = tracks_.find(flow);
  if (it == tracks_.end()) return std::nullopt;
  return it->second.committed;
}

// -------------------------------------------------------------- shaping

double probe_drop_probability(double offered_bps, double allocated_bps) {
  if (offered_bps <= 0.0 || offered_bps <= allocated_bps) return 0.0;
  return clip01((offered_bps - allocated_bps) / offered_bps);
}

PriorityClass mark(SubflowKind kind, const FlowDecision& d) {
  auto level = [](bool high) { return high ? Priority::High : Priority::Low; };
  const Action& a = d.action;
  switch (kind) {
    case SubflowKind::Audio:
      return {level(a.audio), DropDirective::None, 0.0};
    case SubflowKind::Base:
    case SubflowKind::SmallWindowVideo:
      return {level(a.base), DropDirective::None, 0.0};
    case SubflowKind::HighFpsEnhancement:
    case SubflowKind::LowFpsEnhancement:
      if (d.enhancement_drop) return {Priority::Low, DropDirective::Drop, 0.0};
      return {level(a.enh), DropDirective::None, 0.0};
    case SubflowKind::Probe:
      if (d.probe_drop_probability > 0.0)
        return PriorityClass::with_drop_probability(level(a.base), d.probe_drop_probability);
      return {level(a.base), DropDirective::None, 0.0};
    case SubflowKind::Control:
      return {level(a.count() > 0), DropDirective::None, 0.0};
    case SubflowKind::Background:
      break;
  }
  return PriorityClass::low();
}

// ----------------------------------------------------------- controller

void ControllerParams::validate() const {
  auto in01 = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in01(alpha)) throw std::invalid_argument("alpha must be in [0,1]");
  if (!in01(beta)) throw std::invalid_argument("beta must be in [0,1]");
  if (!(interval_ms > 0)) throw std::invalid_argument("interval_ms must be > 0");
  if (hysteresis_multiple == 0) throw std::invalid_argument("hysteresis_multiple must be >= 1");
  if (warmup_ms < 0) throw std::invalid_argument("warmup_ms must be >= 0");
  if (candidates.empty()) throw std::invalid_argument("candidate action set is empty");
  if (forced_probe_drop && !in01(*forced_probe_drop))
    throw std::invalid_argument("forced probe drop must be in [0,1]");
}

Controller::Controller(ControllerParams params, IntervalGeometry geometry)
    : params_(std::move(params)),
      geometry_(geometry),
      stabilizer_(params_.hysteresis_multiple, params_.warmup_ms, kPrioritizeAll) {
  params_.validate();
  geometry_.interval_ms = params_.interval_ms;
  columns_ = params_.candidates;
  std::sort(columns_.begin(), columns_.end(), action_before);
  columns_.erase(std::unique(columns_.begin(), columns_.end()), columns_.end());
}

std::vector<FlowDecision> Controller::decide(const MonitorReport& report) {
  std::vector<FlowDecision> out;
  decide_direction(report, Direction::Downlink, out);
  decide_direction(report, Direction::Uplink, out);
  return out;
}

void Controller::decide_direction(const MonitorReport& report, Direction dir,
                                  std::vector<FlowDecision>& out) {
  const size_t d = dir == Direction::Downlink ? 0 : 1;
  std::vector<const FlowReport*> flows;
  for (const auto& f : report.flows)
    if (f.direction == dir) flows.push_back(&f);
  if (flows.empty()) return;

  std::vector<FairnessUe> ues(report.ues.size());
  for (size_t i = 0; i < report.ues.size(); ++i) {
    const UeReport& u = report.ues[i];
    ues[i].bits_per_prb = std::max(1.0, u.bits_per_prb);
    ues[i].total_load_bps = u.loads[d].total();
    ues[i].nonzoom_load_bps = u.loads[d].background;
    ues[i].bw_hungry = u.bw_hungry[d];
  }
  const SlackEstimate slack = estimate_slack(ues, geometry_, true);

  auto bpp_of = [&](uint32_t ue) { return ue < ues.size() ? ues[ue].bits_per_prb : 1.0; };
  auto loads_of = [](const FlowReport& f) {
    return PrioritizedLoads{f.ue, f.loads.base, f.loads.enh, f.loads.audio};
  };

  SolverProblem prob;
  prob.alpha = params_.alpha;
  prob.beta = params_.beta;
  prob.nonzoom_prb = slack.nonzoom_prb;
  prob.slack_prb = slack.slack_prb;
  for (const FlowReport* f : flows) {
    std::vector<double> q, r;
    for (const Action& a : columns_) {
      q.push_back(100.0 * qoe_gain(a, f->state));
      r.push_back(reserved_prbs(a, loads_of(*f), bpp_of(f->ue), params_.interval_ms));
    }
    prob.qoe.push_back(std::move(q));
    prob.reserved.push_back(std::move(r));
  }

  const auto t0 = std::chrono::steady_clock::now();
  const SolverResult sol = solve(prob, params_.enumeration_threshold);
  const double solve_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  solve_times_.push_back(solve_ms);

  // Default allocation with measured (finite) demand, for the probe law.
  const SlackEstimate real_alloc = estimate_slack(ues, geometry_, false);
  const double per_s = 1000.0 / params_.interval_ms;

  std::vector<FlowDecision> decided;
  double reserved_committed = 0.0;
  for (size_t i = 0; i < flows.size(); ++i) {
    const FlowReport& f = *flows[i];
    const Action proposal = sol.fallback ? kNoPriority : columns_[sol.choice[i]];
    FlowDecision fd;
    fd.flow = f.flow;
    fd.ue = f.ue;
    fd.direction = dir;
    fd.epoch_ms = report.t_ms;
    fd.action = stabilizer_.stabilize(f.flow, proposal, report.t_ms, f.first_seen_ms);
    const bool warm = stabilizer_.in_warmup(f.flow, report.t_ms);
    reserved_committed +=
        reserved_prbs(fd.action, loads_of(f), bpp_of(f.ue), params_.interval_ms);

    fd.enhancement_drop = params_.enable_enhancement_drop && dir == Direction::Uplink &&
                          fd.action == kBaseAndAudio;
    if (!warm) {
      if (params_.forced_probe_drop) {
        fd.probe_drop_probability = *params_.forced_probe_drop;
      } else if (params_.enable_probe_drop) {
        const auto& l = f.loads;
        double prio = 0.0, nonprio = 0.0;
        (fd.action.base ? prio : nonprio) += l.base + l.probe;
        (fd.action.enh ? prio : nonprio) += l.enh;
        (fd.action.audio ? prio : nonprio) += l.audio;
        (fd.action.count() > 0 ? prio : nonprio) += l.control;
        double share = 0.0;
        if (f.ue < ues.size() && ues[f.ue].total_load_bps > 0.0) {
          const double cap_bps =
              static_cast<double>(real_alloc.default_prbs[f.ue]) * ues[f.ue].bits_per_prb * per_s;
          share = cap_bps * nonprio / ues[f.ue].total_load_bps;
        }
        const double allocated = prio + std::min(nonprio, share);
        fd.probe_drop_probability = probe_drop_probability(l.zoom(), allocated);
      }
    }
    decided.push_back(fd);
  }

  const double loss = fairness_loss(reserved_committed, slack);
  for (size_t i = 0; i < decided.size(); ++i) {
    DecisionLogRow row;
    row.interval = report.interval;
    row.t_ms = report.t_ms;
    row.flow = decided[i].flow;
    row.direction = dir;
    row.proposed = sol.fallback ? kNoPriority : columns_[sol.choice[i]];
    row.committed = decided[i].action;
    row.fairness_loss = loss;
    row.q_agg = sol.q_agg;
    row.objective = sol.objective;
    row.solve_time_ms = solve_ms;
    row.probe_drop = decided[i].probe_drop_probability;
    row.enhancement_drop = decided[i].enhancement_drop;
    log_.push_back(row);
    out.push_back(decided[i]);
  }
}

void write_decision_log_header(std::ostream& os) {
  os << "interval,t_ms,flow,direction,proposed,committed,fairness_loss,q_agg,"
        "objective,solve_time_ms,probe_drop,enhancement_drop\n";
}

void write_decision_log_row(std::ostream& os, const DecisionLogRow& r,
                            bool with_timing) {
  os << r.interval << ',' << csv::fmt(r.t_ms) << ',' << r.flow << ','
     << to_string(r.direction) << ",\"" << r.proposed.str() << "\",\""
     << r.committed.str() << "\"," << csv::fmt(r.fairness_loss, 6) << ','
     << csv::fmt(r.q_agg, 6) << ',' << csv::fmt(r.objective, 6) << ','
     << (with_timing ? csv::fmt(r.solve_time_ms, 4) : std::string("NA")) << ','
     << csv::fmt(r.probe_drop, 4) << ',' << (r.enhancement_drop ? 1 : 0) << '\n';
}

}  // namespace streamguard
