#include "scnav/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "scnav/types.hpp"

namespace scnav {

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

namespace {

// Continued fraction for I_x(a, b), modified Lentz.
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

void paired_check(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("paired test: groups differ in size");
}

std::vector<double> differences_of(std::span<const double> a, std::span<const double> b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

void fill_groups(StatsResult& r, std::span<const double> a, std::span<const double> b) {
  r.mean_a = mean(a);
  r.sd_a = stddev(a);
  r.mean_b = mean(b);
  r.sd_b = stddev(b);
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_tailed(double t, double df) {
  if (std::isnan(t)) return 1.0;
  if (std::isinf(t)) return 0.0;
  return std::clamp(incomplete_beta(df / 2.0, 0.5, df / (df + t * t)), 0.0, 1.0);
}

double normal_two_tailed(double z) { return std::clamp(std::erfc(std::abs(z) / std::sqrt(2.0)), 0.0, 1.0); }

StatsResult paired_t_test(std::span<const double> d) {
  if (d.size() < 2) throw ValidationError("paired t-test needs at least 2 differences");
  StatsResult r;
  r.test = "paired t-test";
  r.n = d.size();
  r.df = static_cast<double>(d.size() - 1);
  const double m = mean(d);
  const double sd = stddev(d);
  if (sd == 0.0) {
    r.statistic = m == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), m);
    r.p = m == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.statistic = m / (sd / std::sqrt(static_cast<double>(d.size())));
  r.p = student_t_two_tailed(r.statistic, r.df);
  return r;
}

StatsResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  paired_check(a, b);
  const auto d = differences_of(a, b);
  StatsResult r = paired_t_test(d);
  fill_groups(r, a, b);
  return r;
}

StatsResult wilcoxon_signed_rank(std::span<const double> differences) {
  std::vector<double> d;
  for (double x : differences)
    if (x != 0.0) d.push_back(x);
  if (d.size() < 5) throw ValidationError("Wilcoxon signed-rank needs at least 5 nonzero differences");
  const std::size_t n = d.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });
  std::vector<double> rank(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  double w_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0.0) w_plus += rank[i];

  const double nn = static_cast<double>(n);
  const double mu = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  const double dev = w_plus - mu;
  const double corrected = std::copysign(std::max(std::abs(dev) - 0.5, 0.0), dev);

  StatsResult r;
  r.test = "Wilcoxon signed-rank";
  r.n = n;
  r.statistic = w_plus;
  r.z = var > 0.0 ? corrected / std::sqrt(var) : 0.0;
  r.p = normal_two_tailed(r.z);
  return r;
}

StatsResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  paired_check(a, b);
  const auto d = differences_of(a, b);
  StatsResult r = wilcoxon_signed_rank(d);
  fill_groups(r, a, b);
  return r;
}

std::string p_band(double p) {
  if (p < 0.001) return "p < .001";
  if (p < 0.01) return "p < .01";
  if (p < 0.05) return "p < .05";
  return "n.s.";
}

}  // namespace scnav
