#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace abdo {

enum class PValueMethod { kExact, kNormalApprox, kChiSquare };

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n_effective = 0;
  PValueMethod method = PValueMethod::kExact;
};

/// Two-sided Wilcoxon signed-rank test on paired samples. Zero differences
/// are dropped; |d| ranks use midranks; W = min(W+, W-). The exact null
/// distribution is used for n ≤ 25 without ties, otherwise the normal
/// approximation with tie and continuity correction.
TestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y);

/// Largest n for which the exact distribution is used.
inline constexpr std::size_t kWilcoxonExactMaxN = 25;

struct BonferroniDecision {
  double adjusted_p = 1.0;
  bool significant = false;
};

std::vector<BonferroniDecision> bonferroni(std::span<const double> p_values, double alpha = 0.05);

/// Friedman test over `scores[subject][treatment]` with per-row midranks and
/// tie correction; p from χ² with k−1 degrees of freedom.
TestResult friedman(const std::vector<std::vector<double>>& scores);

/// Midranks (1-based) of `values`.
std::vector<double> midranks(std::span<const double> values);

/// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);
/// Upper tail of the χ² distribution.
double chi_square_sf(double statistic, double dof);

}  // namespace abdo
