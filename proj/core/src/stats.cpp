#include "abdo/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "abdo/error.hpp"

namespace abdo {
namespace {

// Σ (t³ − t) over tie groups of `values`.
double tie_sum(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const auto t = static_cast<double>(j - i);
    sum += t * t * t - t;
    i = j;
  }
  return sum;
}

double gamma_series(double a, double x) {
  double sum = 1.0 / a;
  double term = sum;
  for (int n = 1; n < 10000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_continued_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

TestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) {
    throw InvalidArgument("wilcoxon_signed_rank needs two samples of equal, non-zero length");
  }
  std::vector<double> diffs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (!std::isfinite(d)) throw InvalidArgument("wilcoxon_signed_rank: non-finite value");
    if (d != 0.0) diffs.push_back(d);
  }
  TestResult result;
  result.n_effective = diffs.size();
  if (diffs.empty()) return result;

  std::vector<double> magnitudes(diffs.size());
  std::transform(diffs.begin(), diffs.end(), magnitudes.begin(), [](double d) { return std::abs(d); });
  const std::vector<double> ranks = midranks(magnitudes);
  double w_plus = 0.0, w_minus = 0.0;
  for (std::size_t i = 0; i < diffs.size(); ++i) (diffs[i] > 0 ? w_plus : w_minus) += ranks[i];
  const double w = std::min(w_plus, w_minus);
  result.statistic = w;

  const std::size_t n = diffs.size();
  const double ties = tie_sum(magnitudes);
  if (n <= kWilcoxonExactMaxN && ties == 0.0) {
    // Number of subsets of {1..n} with each rank sum.
    const std::size_t max_sum = n * (n + 1) / 2;
    std::vector<double> ways(max_sum + 1, 0.0);
    ways[0] = 1.0;
    for (std::size_t r = 1; r <= n; ++r) {
      for (std::size_t s = max_sum; s >= r; --s) ways[s] += ways[s - r];
    }
    double tail = 0.0;
    const auto w_int = static_cast<std::size_t>(w);
    for (std::size_t s = 0; s <= w_int; ++s) tail += ways[s];
    result.p_value = std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(n)));
    result.method = PValueMethod::kExact;
    return result;
  }

  const auto nd = static_cast<double>(n);
  const double mean = nd * (nd + 1.0) / 4.0;
  const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - ties / 48.0;
  result.method = PValueMethod::kNormalApprox;
  if (!(var > 0.0)) return result;
  const double z = std::max(0.0, std::abs(w - mean) - 0.5) / std::sqrt(var);
  result.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return result;
}

std::vector<BonferroniDecision> bonferroni(std::span<const double> p_values, double alpha) {
  const auto m = static_cast<double>(p_values.size());
  std::vector<BonferroniDecision> out;
  out.reserve(p_values.size());
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("p-values must lie in [0, 1]");
    const double adjusted = std::min(1.0, m * p);
    out.push_back({adjusted, adjusted < alpha});
  }
  return out;
}

TestResult friedman(const std::vector<std::vector<double>>& scores) {
  const std::size_t n = scores.size();
  if (n < 2) throw InvalidArgument("friedman needs at least 2 subjects");
  const std::size_t k = scores.front().size();
  if (k < 2) throw InvalidArgument("friedman needs at least 2 treatments");
  std::vector<double> rank_sums(k, 0.0);
  double ties = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (scores[i].size() != k) {
      throw InvalidArgument("friedman: subject " + std::to_string(i) + " has missing cells");
    }
    for (double v : scores[i]) {
      if (!std::isfinite(v)) {
        throw InvalidArgument("friedman: subject " + std::to_string(i) + " has a missing value");
      }
    }
    const auto ranks = midranks(scores[i]);
    for (std::size_t j = 0; j < k; ++j) rank_sums[j] += ranks[j];
    ties += tie_sum(scores[i]);
  }
  const auto nd = static_cast<double>(n);
  const auto kd = static_cast<double>(k);
  TestResult result;
  result.n_effective = n;
  result.method = PValueMethod::kChiSquare;
  const double correction = 1.0 - ties / (nd * (kd * kd * kd - kd));
  if (correction <= 1e-12) return result;
  double sum_sq = 0.0;
  for (double r : rank_sums) sum_sq += r * r;
  double chi2 = 12.0 / (nd * kd * (kd + 1.0)) * sum_sq - 3.0 * nd * (kd + 1.0);
  chi2 = std::max(0.0, chi2 / correction);
  result.statistic = chi2;
  result.p_value = chi_square_sf(chi2, kd - 1.0);
  return result;
}

double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw InvalidArgument("gamma_q requires a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return std::clamp(1.0 - gamma_series(a, x), 0.0, 1.0);
  return std::clamp(gamma_continued_fraction(a, x), 0.0, 1.0);
}

double chi_square_sf(double statistic, double dof) {
  if (statistic <= 0.0) return 1.0;
  return gamma_q(dof / 2.0, statistic / 2.0);
}

}  // namespace abdo
