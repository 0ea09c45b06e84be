#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <abdo/error.hpp>
#include <abdo/gmm.hpp>

namespace {

using abdo::GmmModel;

std::vector<double> two_modes(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> a(50.0, 5.0), b(200.0, 10.0);
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(i % 2 ? a(rng) : b(rng));
  return out;
}

TEST(Gmm, ConstantSamplesCollapseToFloor) {
  const std::vector<double> s(100, 37.0);
  abdo::EmOptions opt;
  const auto fit = abdo::fit_gmm_1d(s, 1, opt);
  ASSERT_EQ(fit.model.size(), 1u);
  EXPECT_DOUBLE_EQ(fit.model.components[0].mean, 37.0);
  EXPECT_DOUBLE_EQ(fit.model.components[0].variance, opt.variance_floor);
  EXPECT_DOUBLE_EQ(fit.model.components[0].weight, 1.0);
}

TEST(Gmm, RecoversTwoComponents) {
  const auto fit = abdo::fit_gmm_1d(two_modes(1, 10000), 2);
  ASSERT_EQ(fit.model.size(), 2u);
  const auto& c = fit.model.components;
  EXPECT_NEAR(c[0].mean, 50.0, 2.0);
  EXPECT_NEAR(c[1].mean, 200.0, 2.0);
  EXPECT_NEAR(c[0].weight, 0.5, 0.05);
  EXPECT_NEAR(c[1].weight, 0.5, 0.05);
  EXPECT_NEAR(std::sqrt(c[0].variance), 5.0, 0.5);
  EXPECT_NEAR(std::sqrt(c[1].variance), 10.0, 1.0);
}

TEST(Gmm, ModelInvariants) {
  const auto fit = abdo::fit_gmm_1d(two_modes(2, 3000), 3);
  double total = 0.0;
  for (const auto& c : fit.model.components) {
    total += c.weight;
    EXPECT_GE(c.variance, 1e-4);
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_NO_THROW(fit.model.validate(1e-4));
  for (std::size_t k = 1; k < fit.model.size(); ++k) {
    EXPECT_LE(fit.model.components[k - 1].mean, fit.model.components[k].mean);
  }
}

TEST(Gmm, Errors) {
  EXPECT_THROW(abdo::fit_gmm_1d(std::vector<double>{}, 1), abdo::EmptyInput);
  EXPECT_THROW(abdo::fit_gmm_1d(std::vector<double>{1.0, 2.0}, 3), abdo::InsufficientData);
  EXPECT_THROW(abdo::fit_gmm_1d(std::vector<double>{1.0, 2.0}, 0), abdo::InvalidArgument);
}

TEST(Gmm, SubsamplingIsSeeded) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1000);
  std::vector<double> s(5000);
  for (auto& x : s) x = u(rng);
  abdo::EmOptions opt;
  opt.max_points = 500;
  const auto a = abdo::fit_gmm_1d(s, 3, opt, 77);
  const auto b = abdo::fit_gmm_1d(s, 3, opt, 77);
  ASSERT_EQ(a.model.size(), b.model.size());
  for (std::size_t k = 0; k < a.model.size(); ++k) {
    EXPECT_EQ(a.model.components[k].mean, b.model.components[k].mean);
    EXPECT_EQ(a.model.components[k].variance, b.model.components[k].variance);
  }
}

TEST(GmmProperty, LogLikelihoodNonDecreasing) {
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<int> kdist(1, 7);
  std::uniform_real_distribution<double> centre(-500, 500), spread(0.5, 60);
  std::uniform_int_distribution<int> modes(1, 4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s;
    const int m = modes(rng);
    for (int j = 0; j < m; ++j) {
      std::normal_distribution<double> d(centre(rng), spread(rng));
      for (int i = 0; i < 400; ++i) s.push_back(std::round(d(rng)));
    }
    const auto fit = abdo::fit_gmm_1d(s, kdist(rng), {}, static_cast<std::uint64_t>(trial));
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
      const double prev = fit.log_likelihood[i - 1], cur = fit.log_likelihood[i];
      EXPECT_GE(cur, prev - 1e-9 * std::abs(prev)) << "trial " << trial << " iteration " << i;
    }
  }
}

TEST(Assign, PointAtMeanAndSingleComponent) {
  GmmModel m{{{0.0, 1.0, 0.5}, {100.0, 1.0, 0.5}}};
  EXPECT_EQ(abdo::assign_cluster(100.0, m), 1);
  EXPECT_EQ(abdo::assign_cluster(0.0, m), 0);
  GmmModel one{{{3.0, 2.0, 1.0}}};
  for (double x : {-1e6, 0.0, 3.0, 1e6}) EXPECT_EQ(abdo::assign_cluster(x, one), 0);
}

TEST(Assign, TieGoesToLowestIndex) {
  GmmModel m{{{-1.0, 1.0, 0.5}, {1.0, 1.0, 0.5}}};
  EXPECT_EQ(abdo::assign_cluster(0.0, m), 0);
}

TEST(Assign, MatchesBruteForcePosterior) {
  GmmModel m{{{10.0, 4.0, 0.2}, {14.0, 9.0, 0.5}, {30.0, 25.0, 0.3}}};
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-5, 50);
  std::vector<double> s(1000);
  for (auto& x : s) x = u(rng);
  const auto got = abdo::assign_clusters(s, m);
  for (std::size_t i = 0; i < s.size(); ++i) {
    int best = 0;
    double best_p = -1.0;
    for (int k = 0; k < 3; ++k) {
      const auto& c = m.components[static_cast<std::size_t>(k)];
      const double p = c.weight / std::sqrt(2 * std::numbers::pi * c.variance) *
                       std::exp(-(s[i] - c.mean) * (s[i] - c.mean) / (2 * c.variance));
      if (p > best_p) {
        best_p = p;
        best = k;
      }
    }
    EXPECT_EQ(got[i], best) << s[i];
  }
}

}  // namespace
