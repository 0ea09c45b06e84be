// Brute-force reference implementations used only by tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <abdo/metrics.hpp>
#include <abdo/volume.hpp>

namespace oracle {

using abdo::BinaryMask;
using abdo::Index3;
using abdo::Spacing;

inline std::vector<Index3> foreground(const BinaryMask& m) {
  std::vector<Index3> out;
  const auto& s = m.shape();
  for (std::int64_t z = 0; z < s[2]; ++z)
    for (std::int64_t y = 0; y < s[1]; ++y)
      for (std::int64_t x = 0; x < s[0]; ++x)
        if (m(x, y, z)) out.push_back({x, y, z});
  return out;
}

inline bool inside(const BinaryMask& m, std::int64_t x, std::int64_t y, std::int64_t z) {
  const auto& s = m.shape();
  return x >= 0 && y >= 0 && z >= 0 && x < s[0] && y < s[1] && z < s[2] && m(x, y, z);
}

inline std::vector<Index3> surface(const BinaryMask& m) {
  std::vector<Index3> out;
  for (const auto& p : foreground(m)) {
    const auto [x, y, z] = p;
    if (!inside(m, x - 1, y, z) || !inside(m, x + 1, y, z) || !inside(m, x, y - 1, z) ||
        !inside(m, x, y + 1, z) || !inside(m, x, y, z - 1) || !inside(m, x, y, z + 1)) {
      out.push_back(p);
    }
  }
  return out;
}

inline double dist(const Index3& a, const Index3& b, const Spacing& sp) {
  double s = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double d = static_cast<double>(a[k] - b[k]) * sp[k];
    s += d * d;
  }
  return std::sqrt(s);
}

inline std::vector<double> edt(const BinaryMask& m, const Spacing& sp) {
  const auto fg = foreground(m);
  std::vector<double> out(m.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const Index3 p = m.coordinates(i);
    for (const auto& q : fg) out[i] = std::min(out[i], dist(p, q, sp));
  }
  return out;
}

/// Type-7 quantile on a sorted copy.
inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline std::vector<double> directed(const std::vector<Index3>& from, const std::vector<Index3>& to,
                                    const Spacing& sp) {
  std::vector<double> out;
  for (const auto& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to) best = std::min(best, dist(p, q, sp));
    out.push_back(best);
  }
  return out;
}

inline double hd95(const BinaryMask& a, const BinaryMask& b, const Spacing& sp, bool pooled = false) {
  const auto sa = surface(a), sb = surface(b);
  auto ab = directed(sa, sb, sp);
  auto ba = directed(sb, sa, sp);
  if (pooled) {
    ab.insert(ab.end(), ba.begin(), ba.end());
    return quantile(ab, 0.95);
  }
  return std::max(quantile(ab, 0.95), quantile(ba, 0.95));
}

inline double dice(const BinaryMask& a, const BinaryMask& b) {
  double na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i] != 0;
    nb += b[i] != 0;
    both += (a[i] != 0) && (b[i] != 0);
  }
  return 2.0 * both / (na + nb);
}

/// rank = #smaller + (#equal + 1) / 2
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      less += w < v[i];
      equal += w == v[i];
    }
    out[i] = less + (equal + 1.0) / 2.0;
  }
  return out;
}

/// Two-sided exact p: fraction of the 2^n sign assignments whose
/// min(W+, W-) does not exceed the observed one.
inline double wilcoxon_exact(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> d, mag;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != y[i]) {
      d.push_back(x[i] - y[i]);
      mag.push_back(std::abs(x[i] - y[i]));
    }
  }
  const std::size_t n = d.size();
  if (n == 0) return 1.0;
  const auto r = ranks(mag);
  double total = 0, wplus = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total += r[i];
    if (d[i] > 0) wplus += r[i];
  }
  const double w = std::min(wplus, total - wplus);
  // Gray-code walk over sign assignments.
  double plus = 0;
  std::uint64_t count = 0;
  const std::uint64_t m = 1ULL << n;
  std::uint64_t prev = 0;
  for (std::uint64_t k = 0; k < m; ++k) {
    const std::uint64_t g = k ^ (k >> 1);
    if (k) {
      const std::uint64_t flipped = g ^ prev;
      const int bit = __builtin_ctzll(flipped);
      plus += (g & flipped) ? r[bit] : -r[bit];
    }
    prev = g;
    if (std::min(plus, total - plus) <= w + 1e-9) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(m);
}

/// (k-1) Σ(R_j - n(k+1)/2)² / (Σ r² - n k (k+1)² / 4)
inline double friedman_statistic(const std::vector<std::vector<double>>& scores) {
  const double n = static_cast<double>(scores.size());
  const std::size_t kk = scores.front().size();
  const double k = static_cast<double>(kk);
  std::vector<double> R(kk, 0.0);
  double a = 0.0;
  for (const auto& row : scores) {
    const auto r = ranks(row);
    for (std::size_t j = 0; j < kk; ++j) {
      R[j] += r[j];
      a += r[j] * r[j];
    }
  }
  double num = 0.0;
  for (double rj : R) num += (rj - n * (k + 1) / 2) * (rj - n * (k + 1) / 2);
  const double den = a - n * k * (k + 1) * (k + 1) / 4;
  return den <= 0 ? 0.0 : (k - 1) * num / den;
}

}  // namespace oracle
