#pragma once

#include <span>
#include <string>
#include <vector>

namespace scnav {

struct StatsResult {
  std::string test;
  double statistic = 0.0;  // t for the t-test, W+ for Wilcoxon
  double df = 0.0;         // t-test only
  double z = 0.0;          // Wilcoxon only
  double p = 1.0;          // two-tailed
  std::size_t n = 0;
  double mean_a = 0.0, sd_a = 0.0;  // group summaries, when groups were given
  double mean_b = 0.0, sd_b = 0.0;
};

double mean(std::span<const double> xs);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev(std::span<const double> xs);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
/// Two-tailed p of Student's t with df degrees of freedom.
double student_t_two_tailed(double t, double df);
/// Two-tailed p of a standard normal deviate.
double normal_two_tailed(double z);

/// Paired-sample t-test on differences. Throws ValidationError for n < 2.
/// All-equal differences give sd 0: t = 0 and p = 1 when they are zero,
/// otherwise t = +/-inf and p = 0.
StatsResult paired_t_test(std::span<const double> differences);
StatsResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Wilcoxon signed-rank with average ranks for ties and the normal
/// approximation (tie-corrected variance, continuity correction). Zero
/// differences are dropped; fewer than 5 remaining throws ValidationError.
StatsResult wilcoxon_signed_rank(std::span<const double> differences);
StatsResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

/// Conventional reporting band: "p < .001", "p < .01", "p < .05" or "n.s.".
std::string p_band(double p);

}  // namespace scnav
