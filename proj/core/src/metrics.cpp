#include "abdo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "abdo/error.hpp"

namespace abdo {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_grid(const BinaryMask& a, const BinaryMask& b) {
  if (a.shape() != b.shape() || !same_grid(a.geometry(), b.geometry())) {
    throw GeometryMismatch("masks do not share a geometry");
  }
}

// Lower envelope of parabolas rooted at sites q·spacing with heights f[q]
// (squared mm). Sites with infinite height are skipped.
class Envelope {
 public:
  explicit Envelope(std::size_t n) : v_(n), z_(n + 1), f_(n) {}

  void run(double* line, std::size_t n, double spacing) {
    std::copy(line, line + n, f_.begin());
    std::ptrdiff_t k = -1;
    double boundary = -kInf;
    for (std::size_t q = 0; q < n; ++q) {
      if (f_[q] == kInf) continue;
      const double xq = static_cast<double>(q) * spacing;
      while (k >= 0) {
        const std::size_t p = v_[static_cast<std::size_t>(k)];
        const double xp = static_cast<double>(p) * spacing;
        boundary = ((f_[q] + xq * xq) - (f_[p] + xp * xp)) / (2.0 * (xq - xp));
        if (boundary <= z_[static_cast<std::size_t>(k)]) {
          --k;
        } else {
          break;
        }
      }
      ++k;
      v_[static_cast<std::size_t>(k)] = q;
      z_[static_cast<std::size_t>(k)] = k == 0 ? -kInf : boundary;
      z_[static_cast<std::size_t>(k) + 1] = kInf;
    }
    if (k < 0) {
      std::fill(line, line + n, kInf);
      return;
    }
    std::size_t j = 0;
    for (std::size_t q = 0; q < n; ++q) {
      const double xq = static_cast<double>(q) * spacing;
      while (z_[j + 1] < xq) ++j;
      const std::size_t p = v_[j];
      const double d = static_cast<double>(static_cast<std::ptrdiff_t>(q) - static_cast<std::ptrdiff_t>(p)) * spacing;
      line[q] = d * d + f_[p];
    }
  }

 private:
  std::vector<std::size_t> v_;
  std::vector<double> z_;
  std::vector<double> f_;
};

// In-place squared EDT of `f` (0 at sites, +inf elsewhere) on a grid of `shape`.
void squared_edt(std::vector<double>& f, const Shape& shape, const Spacing& spacing) {
  const auto n0 = static_cast<std::size_t>(shape[0]);
  const auto n1 = static_cast<std::size_t>(shape[1]);
  const auto n2 = static_cast<std::size_t>(shape[2]);
  const std::size_t longest = std::max({n0, n1, n2});
  Envelope env(longest);
  std::vector<double> line(longest);

  for (std::size_t zy = 0; zy < n1 * n2; ++zy) env.run(f.data() + zy * n0, n0, spacing[0]);

  for (std::size_t z = 0; z < n2; ++z) {
    for (std::size_t x = 0; x < n0; ++x) {
      double* base = f.data() + z * n0 * n1 + x;
      for (std::size_t y = 0; y < n1; ++y) line[y] = base[y * n0];
      env.run(line.data(), n1, spacing[1]);
      for (std::size_t y = 0; y < n1; ++y) base[y * n0] = line[y];
    }
  }

  const std::size_t plane = n0 * n1;
  for (std::size_t xy = 0; xy < plane; ++xy) {
    double* base = f.data() + xy;
    for (std::size_t z = 0; z < n2; ++z) line[z] = base[z * plane];
    env.run(line.data(), n2, spacing[2]);
    for (std::size_t z = 0; z < n2; ++z) base[z * plane] = line[z];
  }
}

struct Box {
  Index3 lo{};
  Index3 hi{};  // exclusive
  Shape shape() const { return {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]}; }
};

Box bounding_box(const BinaryMask& a, const BinaryMask& b) {
  const Shape& s = a.shape();
  Box box{{s[0], s[1], s[2]}, {0, 0, 0}};
  std::size_t i = 0;
  for (std::int64_t z = 0; z < s[2]; ++z) {
    for (std::int64_t y = 0; y < s[1]; ++y) {
      for (std::int64_t x = 0; x < s[0]; ++x, ++i) {
        if (a[i] || b[i]) {
          const Index3 p{x, y, z};
          for (int k = 0; k < 3; ++k) {
            box.lo[k] = std::min(box.lo[k], p[k]);
            box.hi[k] = std::max(box.hi[k], p[k] + 1);
          }
        }
      }
    }
  }
  return box;
}

// Distances (mm) from every `query` voxel to the nearest `site` voxel within `box`.
std::vector<double> directed_distances(const BinaryMask& sites, const BinaryMask& query,
                                       const Box& box, const Spacing& spacing) {
  const Shape bs = box.shape();
  const std::size_t count = static_cast<std::size_t>(bs[0]) * bs[1] * bs[2];
  std::vector<double> f(count);
  std::size_t i = 0;
  for (std::int64_t z = box.lo[2]; z < box.hi[2]; ++z) {
    for (std::int64_t y = box.lo[1]; y < box.hi[1]; ++y) {
      for (std::int64_t x = box.lo[0]; x < box.hi[0]; ++x, ++i) {
        f[i] = sites(x, y, z) ? 0.0 : kInf;
      }
    }
  }
  squared_edt(f, bs, spacing);
  std::vector<double> out;
  i = 0;
  for (std::int64_t z = box.lo[2]; z < box.hi[2]; ++z) {
    for (std::int64_t y = box.lo[1]; y < box.hi[1]; ++y) {
      for (std::int64_t x = box.lo[0]; x < box.hi[0]; ++x, ++i) {
        if (query(x, y, z)) out.push_back(std::sqrt(f[i]));
      }
    }
  }
  return out;
}

}  // namespace

BinaryMask region_mask(const LabelMap& labels, Label id) {
  BinaryMask mask(labels.geometry(), std::uint8_t{0});
  for (std::size_t i = 0; i < labels.size(); ++i) mask[i] = labels[i] == id ? 1 : 0;
  return mask;
}

std::size_t count_foreground(const BinaryMask& mask) noexcept {
  return static_cast<std::size_t>(
      std::count_if(mask.data().begin(), mask.data().end(), [](std::uint8_t v) { return v != 0; }));
}

std::optional<double> dice(const BinaryMask& a, const BinaryMask& b) {
  check_grid(a, b);
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    na += x;
    nb += y;
    both += x && y;
  }
  if (na == 0 || nb == 0) return std::nullopt;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

BinaryMask surface_mask(const BinaryMask& mask) {
  const Shape& s = mask.shape();
  BinaryMask out(mask.geometry(), std::uint8_t{0});
  std::size_t i = 0;
  for (std::int64_t z = 0; z < s[2]; ++z) {
    for (std::int64_t y = 0; y < s[1]; ++y) {
      for (std::int64_t x = 0; x < s[0]; ++x, ++i) {
        if (!mask[i]) continue;
        const bool boundary = x == 0 || y == 0 || z == 0 || x == s[0] - 1 || y == s[1] - 1 ||
                              z == s[2] - 1 || !mask(x - 1, y, z) || !mask(x + 1, y, z) ||
                              !mask(x, y - 1, z) || !mask(x, y + 1, z) || !mask(x, y, z - 1) ||
                              !mask(x, y, z + 1);
        out[i] = boundary ? 1 : 0;
      }
    }
  }
  return out;
}

std::vector<Index3> extract_surface(const BinaryMask& mask) {
  const BinaryMask surface = surface_mask(mask);
  std::vector<Index3> out;
  for (std::size_t i = 0; i < surface.size(); ++i) {
    if (surface[i]) out.push_back(surface.coordinates(i));
  }
  return out;
}

DistanceMap distance_transform(const BinaryMask& mask, const Spacing& spacing) {
  std::vector<double> f(mask.size());
  bool any = false;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    f[i] = mask[i] ? 0.0 : kInf;
    any = any || mask[i];
  }
  if (!any) throw EmptyInput("distance_transform: mask is empty");
  squared_edt(f, mask.shape(), spacing);
  for (auto& v : f) v = std::sqrt(v);
  return DistanceMap(mask.geometry(), std::move(f));
}

double percentile(std::vector<double>& values, double q) {
  if (values.empty()) throw EmptyInput("percentile of an empty set");
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double a = values[lo];
  if (frac == 0.0 || lo + 1 >= values.size()) return a;
  const double b = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return a + frac * (b - a);
}

std::optional<double> hd95(const BinaryMask& a, const BinaryMask& b, const Spacing& spacing,
                           Hd95Mode mode) {
  check_grid(a, b);
  if (count_foreground(a) == 0 || count_foreground(b) == 0) return std::nullopt;
  const BinaryMask sa = surface_mask(a);
  const BinaryMask sb = surface_mask(b);
  const Box box = bounding_box(sa, sb);
  std::vector<double> d_ab = directed_distances(sb, sa, box, spacing);
  std::vector<double> d_ba = directed_distances(sa, sb, box, spacing);
  if (mode == Hd95Mode::kPooled) {
    d_ab.insert(d_ab.end(), d_ba.begin(), d_ba.end());
    return percentile(d_ab, 0.95);
  }
  return std::max(percentile(d_ab, 0.95), percentile(d_ba, 0.95));
}

double soft_dice_loss(const std::vector<ScalarVolume>& probabilities, const LabelMap& target,
                      double epsilon) {
  if (probabilities.size() < 2) {
    throw InvalidArgument("soft_dice_loss needs background plus at least one foreground class");
  }
  for (const auto& p : probabilities) {
    if (p.shape() != target.shape()) throw GeometryMismatch("probability map shape differs from target");
  }
  const std::size_t classes = probabilities.size();
  for (std::size_t i = 0; i < target.size(); ++i) {
    double sum = 0.0;
    for (const auto& p : probabilities) sum += p[i];
    if (std::abs(sum - 1.0) > 1e-6) {
      throw InvalidArgument("class probabilities do not sum to 1 at voxel " + std::to_string(i));
    }
    if (target[i] >= classes) {
      throw InvalidArgument("target label " + std::to_string(target[i]) + " has no probability map");
    }
  }
  double total = 0.0;
  for (std::size_t c = 1; c < classes; ++c) {
    double pg = 0.0, pp = 0.0, gg = 0.0;
    const auto& p = probabilities[c];
    for (std::size_t i = 0; i < target.size(); ++i) {
      const double g = target[i] == c ? 1.0 : 0.0;
      pg += p[i] * g;
      pp += static_cast<double>(p[i]) * p[i];
      gg += g;
    }
    total += (2.0 * pg + epsilon) / (pp + gg + epsilon);
  }
  return 1.0 - total / static_cast<double>(classes - 1);
}

double region_volume(const LabelMap& labels, Label id, const Spacing& spacing) {
  const auto n = static_cast<double>(std::count(labels.data().begin(), labels.data().end(), id));
  return n * spacing[0] * spacing[1] * spacing[2] / 1000.0;
}

}  // namespace abdo
