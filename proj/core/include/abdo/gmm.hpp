#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace abdo {

struct GmmComponent {
  double mean = 0.0;
  double variance = 1.0;
  double weight = 1.0;
};

/// One-dimensional Gaussian mixture, components ordered by ascending mean.
struct GmmModel {
  std::vector<GmmComponent> components;

  std::size_t size() const noexcept { return components.size(); }
  /// log P(x) of the mixture.
  double log_density(double x) const;
  /// Throws InvalidArgument if weights do not sum to 1 or a variance is not positive.
  void validate(double variance_floor = 0.0) const;
};

struct EmOptions {
  /// Stop once |ΔLL| / |LL| drops below this.
  double tolerance = 1e-6;
  int max_iterations = 100;
  double variance_floor = 1e-4;
  /// Distinct values beyond this are subsampled (seeded) before fitting.
  std::size_t max_points = 200000;
};

struct GmmFit {
  GmmModel model;
  /// Data log-likelihood after initialisation and after every EM iteration.
  std::vector<double> log_likelihood;
  int iterations = 0;
  bool converged = false;
};

/// EM fit of a K-component mixture. Means start at evenly spaced sample
/// quantiles, variances at sample variance / K, weights uniform.
GmmFit fit_gmm_1d(std::span<const double> samples, int k, const EmOptions& options = {},
                  std::uint64_t seed = 0);

/// Same fit over distinct values with multiplicities. `values` must be
/// strictly increasing.
GmmFit fit_gmm_1d_weighted(std::span<const double> values, std::span<const double> counts, int k,
                           const EmOptions& options = {}, std::uint64_t seed = 0);

/// argmax_k π_k N(x | μ_k, σ²_k); ties resolve to the lowest index.
int assign_cluster(double sample, const GmmModel& model);
std::vector<int> assign_clusters(std::span<const double> samples, const GmmModel& model);

}  // namespace abdo
