#include "oracles.h"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace oracle {

static double clip(double x) { return x < 0 ? 0 : (x > 1 ? 1 : x); }

double qoe_gain(bool pb, bool pe, bool pa, const State& s) {
  const double qbf = clip(s.base_fps / 8.0);
  const double qef = std::min(clip(s.enh_fps / 16.0), qbf);
  const double qbd = clip(1.0 - s.base_delay / 80.0);
  const double qed = clip(1.0 - s.enh_delay / 80.0);
  const double qa = clip(1.0 - s.audio_delay / 50.0);
  const double qbase = 0.7 * qbf + 0.3 * qbd;
  const double qenh = 0.5 * qef + 0.5 * qed;
  const double q0 = 0.4 * qbase + 0.2 * qenh + 0.4 * qa;
  const double gain = 0.5 * (0.4 * pb * (1 - qbase) + 0.2 * pe * (1 - qenh) +
                             0.4 * pa * (1 - qa));
  return clip(q0 + gain);
}

double fairness_loss(double total, double u, double r) {
  const double s = total - u;
  const double excess = r > s ? r - s : 0.0;
  return clip(excess / std::max(1.0, u));
}

double objective(const Problem& p, const std::vector<size_t>& c, bool* feasible) {
  double mn = 1e300, sum = 0, r = 0;
  for (size_t f = 0; f < c.size(); ++f) {
    mn = std::min(mn, p.qoe[f][c[f]]);
    sum += p.qoe[f][c[f]];
    r += p.reserved[f][c[f]];
  }
  const double agg = p.alpha * mn + (1 - p.alpha) * sum / c.size();
  const double e = std::max(0.0, r - p.slack);
  if (feasible) *feasible = e <= (1 - p.beta) * p.nonzoom + 1e-9;
  return (1 - p.beta) * agg + p.beta * (1 - e / std::max(1.0, p.nonzoom));
}

Best brute_force(const Problem& p) {
  Best best;
  const size_t n = p.qoe.size();
  std::vector<size_t> c(n, 0);
  bool have = false;
  while (true) {
    bool ok = false;
    const double v = objective(p, c, &ok);
    if (ok && (!have || v > best.objective + 1e-12)) {
      best.choice = c;
      best.objective = v;
      have = true;
    }
    size_t i = n;
    while (i > 0) {
      --i;
      if (++c[i] < p.qoe[i].size()) break;
      c[i] = 0;
      if (i == 0) return best;
    }
    if (n == 0) return best;
  }
}

std::vector<bool> freezes(const std::vector<double>& t, double end) {
  std::vector<double> d;
  for (size_t i = 0; i < t.size(); ++i) d.push_back((i + 1 < t.size() ? t[i + 1] : end) - t[i]);
  std::vector<bool> out(t.size(), false);
  for (size_t i = 0; i < d.size(); ++i) {
    const size_t lo = i >= 30 ? i - 30 : 0;
    if (i == lo) continue;
    double m = 0;
    for (size_t k = lo; k < i; ++k) m += d[k];
    m /= double(i - lo);
    out[i] = d[i] >= std::max(3 * m, m + 150);
  }
  return out;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_dir(const std::string& tag) {
  auto d = std::filesystem::temp_directory_path() / ("streamguard_test_" + tag);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace oracle
