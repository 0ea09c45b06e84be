#include "abdo/gmm.hpp"

#include <boost/random/discrete_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "abdo/error.hpp"

namespace abdo {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_normal(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

inline double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

struct WeightedPoints {
  std::vector<double> values;
  std::vector<double> counts;
};

WeightedPoints subsample(std::span<const double> values, std::span<const double> counts,
                         std::size_t max_points, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  boost::random::discrete_distribution<std::size_t, double> pick(counts.begin(), counts.end());
  std::vector<std::size_t> drawn(max_points);
  for (auto& d : drawn) d = pick(engine);
  std::sort(drawn.begin(), drawn.end());
  WeightedPoints out;
  for (std::size_t i = 0; i < drawn.size();) {
    std::size_t j = i;
    while (j < drawn.size() && drawn[j] == drawn[i]) ++j;
    out.values.push_back(values[drawn[i]]);
    out.counts.push_back(static_cast<double>(j - i));
    i = j;
  }
  return out;
}

// E-step: fills responsibilities (n x K, row-major) and returns the log-likelihood.
double expectation(const WeightedPoints& pts, const GmmModel& model, std::vector<double>& resp) {
  const std::size_t k = model.size();
  std::vector<double> log_w(k), log_joint(k);
  for (std::size_t c = 0; c < k; ++c) {
    log_w[c] = model.components[c].weight > 0.0 ? std::log(model.components[c].weight) : kNegInf;
  }
  double ll = 0.0;
  for (std::size_t i = 0; i < pts.values.size(); ++i) {
    const double x = pts.values[i];
    for (std::size_t c = 0; c < k; ++c) {
      const auto& comp = model.components[c];
      log_joint[c] = log_w[c] == kNegInf ? kNegInf : log_w[c] + log_normal(x, comp.mean, comp.variance);
    }
    const double lse = log_sum_exp(log_joint);
    ll += pts.counts[i] * lse;
    for (std::size_t c = 0; c < k; ++c) {
      resp[i * k + c] = log_joint[c] == kNegInf ? 0.0 : std::exp(log_joint[c] - lse);
    }
  }
  return ll;
}

void maximization(const WeightedPoints& pts, const std::vector<double>& resp, double floor,
                  GmmModel& model) {
  const std::size_t k = model.size();
  const std::size_t n = pts.values.size();
  std::vector<double> nk(k, 0.0), sx(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      const double w = pts.counts[i] * resp[i * k + c];
      nk[c] += w;
      sx[c] += w * pts.values[i];
    }
  }
  const double total = std::accumulate(nk.begin(), nk.end(), 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    auto& comp = model.components[c];
    if (!(nk[c] > 0.0)) {
      comp.weight = 0.0;
      continue;
    }
    comp.mean = sx[c] / nk[c];
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = pts.values[i] - comp.mean;
      ss += pts.counts[i] * resp[i * k + c] * d * d;
    }
    comp.variance = std::max(ss / nk[c], floor);
    comp.weight = nk[c] / total;
  }
}

GmmModel initialise(const WeightedPoints& pts, int k, double floor) {
  const double n = std::accumulate(pts.counts.begin(), pts.counts.end(), 0.0);
  double mean = 0.0;
  for (std::size_t i = 0; i < pts.values.size(); ++i) mean += pts.counts[i] * pts.values[i];
  mean /= n;
  double var = 0.0;
  for (std::size_t i = 0; i < pts.values.size(); ++i) {
    const double d = pts.values[i] - mean;
    var += pts.counts[i] * d * d;
  }
  var /= n;

  GmmModel model;
  model.components.resize(static_cast<std::size_t>(k));
  std::size_t idx = 0;
  double cumulative = 0.0;
  for (int c = 0; c < k; ++c) {
    const double q = (static_cast<double>(c) + 0.5) / static_cast<double>(k) * n;
    while (idx + 1 < pts.values.size() && cumulative + pts.counts[idx] < q) {
      cumulative += pts.counts[idx];
      ++idx;
    }
    auto& comp = model.components[static_cast<std::size_t>(c)];
    comp.mean = pts.values[idx];
    comp.variance = std::max(var / k, floor);
    comp.weight = 1.0 / k;
  }
  return model;
}

}  // namespace

double GmmModel::log_density(double x) const {
  std::vector<double> terms(components.size());
  for (std::size_t c = 0; c < components.size(); ++c) {
    const auto& comp = components[c];
    terms[c] = comp.weight > 0.0 ? std::log(comp.weight) + log_normal(x, comp.mean, comp.variance)
                                 : kNegInf;
  }
  return log_sum_exp(terms);
}

void GmmModel::validate(double variance_floor) const {
  if (components.empty()) throw InvalidArgument("GMM has no components");
  double sum = 0.0;
  for (const auto& c : components) {
    if (!(c.variance > 0.0) || c.variance < variance_floor) {
      throw InvalidArgument("GMM variance below floor");
    }
    if (c.weight < 0.0) throw InvalidArgument("GMM weight is negative");
    sum += c.weight;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("GMM weights do not sum to 1");
}

GmmFit fit_gmm_1d(std::span<const double> samples, int k, const EmOptions& options,
                  std::uint64_t seed) {
  if (samples.empty()) throw EmptyInput("fit_gmm_1d: no samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> values, counts;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    values.push_back(sorted[i]);
    counts.push_back(static_cast<double>(j - i));
    i = j;
  }
  return fit_gmm_1d_weighted(values, counts, k, options, seed);
}

GmmFit fit_gmm_1d_weighted(std::span<const double> values, std::span<const double> counts, int k,
                           const EmOptions& options, std::uint64_t seed) {
  if (values.size() != counts.size()) throw InvalidArgument("values/counts length mismatch");
  if (values.empty()) throw EmptyInput("fit_gmm_1d: no samples");
  if (k < 1) throw InvalidArgument("fit_gmm_1d: K must be >= 1");
  if (!(options.tolerance > 0.0) || options.max_iterations < 1 || !(options.variance_floor > 0.0)) {
    throw InvalidArgument("fit_gmm_1d: invalid EM options");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument("fit_gmm_1d: non-finite sample");
  }
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (total < static_cast<double>(k)) {
    throw InsufficientData("fit_gmm_1d: " + std::to_string(static_cast<long long>(total)) +
                           " samples for K = " + std::to_string(k));
  }

  WeightedPoints pts;
  if (values.size() > options.max_points && options.max_points > 0) {
    pts = subsample(values, counts, options.max_points, seed);
  } else {
    pts.values.assign(values.begin(), values.end());
    pts.counts.assign(counts.begin(), counts.end());
  }

  GmmFit fit;
  fit.model = initialise(pts, k, options.variance_floor);
  std::vector<double> resp(pts.values.size() * static_cast<std::size_t>(k));
  double ll = expectation(pts, fit.model, resp);
  fit.log_likelihood.push_back(ll);
  for (int it = 0; it < options.max_iterations; ++it) {
    maximization(pts, resp, options.variance_floor, fit.model);
    const double next = expectation(pts, fit.model, resp);
    fit.log_likelihood.push_back(next);
    fit.iterations = it + 1;
    const double change = std::abs(next - ll) / std::max(std::abs(ll), 1e-300);
    ll = next;
    if (change < options.tolerance) {
      fit.converged = true;
      break;
    }
  }
  std::stable_sort(fit.model.components.begin(), fit.model.components.end(),
                   [](const GmmComponent& a, const GmmComponent& b) { return a.mean < b.mean; });
  return fit;
}

int assign_cluster(double sample, const GmmModel& model) {
  int best = 0;
  double best_score = kNegInf;
  for (std::size_t c = 0; c < model.size(); ++c) {
    const auto& comp = model.components[c];
    if (!(comp.weight > 0.0)) continue;
    const double score = std::log(comp.weight) + log_normal(sample, comp.mean, comp.variance);
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(c);
    }
  }
  return best;
}

std::vector<int> assign_clusters(std::span<const double> samples, const GmmModel& model) {
  std::vector<int> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out[i] = assign_cluster(samples[i], model);
  return out;
}

}  // namespace abdo
