#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <abdo/error.hpp>
#include <abdo/resample.hpp>

namespace {

using abdo::Geometry;
using abdo::Interpolation;
using abdo::LabelMap;
using abdo::ScalarVolume;

TEST(Resample, IdentityTarget) {
  ScalarVolume v(Geometry({4, 5, 6}, {1.2, 0.9, 2.0}), 0.0f);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(std::sin(static_cast<double>(i)));
  EXPECT_EQ(abdo::resample(v, v.geometry()).values(), v.values());
  EXPECT_EQ(abdo::resample(v, v.geometry(), Interpolation::kNearest).values(), v.values());
}

TEST(Resample, ConstantStaysConstantInsideSource) {
  ScalarVolume v(Geometry({10, 10, 10}, {1, 1, 1}), 3.25f);
  abdo::Affine a = abdo::diagonal_affine({0.7, 0.7, 0.7}, {1.3, 2.1, 0.4});
  const ScalarVolume out = abdo::resample(v, Geometry::from_affine({8, 8, 8}, a));
  for (float x : out.data()) EXPECT_NEAR(x, 3.25f, 1e-6);
}

TEST(Resample, RampHalfVoxelMidpoints) {
  ScalarVolume v(Geometry({4, 1, 1}, {2, 1, 1}), 0.0f);
  for (int i = 0; i < 4; ++i) v[static_cast<std::size_t>(i)] = static_cast<float>(i);
  const Geometry target({3, 1, 1}, {2, 1, 1}, abdo::diagonal_affine({2, 1, 1}, {1.0, 0, 0}));
  const ScalarVolume out = abdo::resample(v, target);
  EXPECT_FLOAT_EQ(out[0], 0.5f);
  EXPECT_FLOAT_EQ(out[1], 1.5f);
  EXPECT_FLOAT_EQ(out[2], 2.5f);
}

TEST(Resample, TrilinearMatchesHandFormula) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScalarVolume v(Geometry({3, 3, 3}, {1, 1, 1}), 0.0f);
  for (auto& x : v.data()) x = static_cast<float>(u(rng) * 10);
  for (int trial = 0; trial < 50; ++trial) {
    const double px = u(rng) * 2, py = u(rng) * 2, pz = u(rng) * 2;
    const Geometry target({1, 1, 1}, {1, 1, 1}, abdo::diagonal_affine({1, 1, 1}, {px, py, pz}));
    const double got = abdo::resample(v, target)[0];
    const int x0 = std::min(1, static_cast<int>(px)), y0 = std::min(1, static_cast<int>(py)),
              z0 = std::min(1, static_cast<int>(pz));
    const double fx = px - x0, fy = py - y0, fz = pz - z0;
    double expect = 0.0;
    for (int dz = 0; dz < 2; ++dz)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx)
          expect += (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz) *
                    v(x0 + dx, y0 + dy, z0 + dz);
    EXPECT_NEAR(got, expect, 1e-5);
  }
}

TEST(Resample, OutOfBoundsIsZero) {
  ScalarVolume v(Geometry({2, 2, 2}, {1, 1, 1}), 5.0f);
  const Geometry target({1, 1, 1}, {1, 1, 1}, abdo::diagonal_affine({1, 1, 1}, {10, 0, 0}));
  EXPECT_EQ(abdo::resample(v, target)[0], 0.0f);
}

TEST(Resample, LabelsRejectTrilinear) {
  LabelMap l(Geometry({2, 2, 2}, {1, 1, 1}), 1);
  EXPECT_THROW(abdo::resample(l, l.geometry(), Interpolation::kTrilinear), abdo::InvalidArgument);
}

TEST(ResampleProperty, NoOvershootAndLabelContainment) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<abdo::Label> lab(0, 4);
  for (int trial = 0; trial < 40; ++trial) {
    ScalarVolume v(Geometry({6, 7, 5}, {1.0, 1.5, 2.0}), 0.0f);
    LabelMap l(v.geometry(), 0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = static_cast<float>(5 + 3 * u(rng));
      l[i] = lab(rng) == 4 ? 7 : lab(rng);
    }
    const double c = std::cos(u(rng)), s = std::sin(u(rng));
    const double n = std::hypot(c, s);
    abdo::Affine a = abdo::identity_affine();
    a[0] = {0.8 * c / n, -0.8 * s / n, 0, u(rng) * 3};
    a[1] = {0.8 * s / n, 0.8 * c / n, 0, u(rng) * 3};
    a[2] = {0, 0, 1.1, u(rng) * 3};
    const Geometry target = Geometry::from_affine({9, 9, 7}, a);
    const auto [lo, hi] = std::minmax_element(v.data().begin(), v.data().end());
    for (float x : abdo::resample(v, target).data()) {
      EXPECT_TRUE(x == 0.0f || (x >= *lo - 1e-5f && x <= *hi + 1e-5f));
    }
    const std::set<abdo::Label> in(l.data().begin(), l.data().end());
    for (auto x : abdo::resample(l, target).data()) EXPECT_TRUE(x == 0 || in.count(x));
  }
}

}  // namespace
