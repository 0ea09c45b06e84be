#include "abdo/resample.hpp"

#include <cmath>

namespace abdo {
namespace {

// Rows map a target voxel index (x, y, z, 1) to a continuous source index.
using IndexMap = std::array<std::array<double, 4>, 3>;

IndexMap index_map(const Geometry& source, const Geometry& target) {
  const Vec3 origin = source.to_index(target.to_world({0.0, 0.0, 0.0}));
  IndexMap m{};
  for (int c = 0; c < 3; ++c) {
    Vec3 unit{0.0, 0.0, 0.0};
    unit[c] = 1.0;
    const Vec3 p = source.to_index(target.to_world(unit));
    for (int r = 0; r < 3; ++r) m[r][c] = p[r] - origin[r];
  }
  for (int r = 0; r < 3; ++r) m[r][3] = origin[r];
  return m;
}

inline double snap(double c) {
  const double r = std::nearbyint(c);
  return std::abs(c - r) < 1e-6 ? r : c;
}

template <typename T, typename Sampler>
Volume<T> sample_grid(const Volume<T>& src, const Geometry& target, Sampler&& sample) {
  const IndexMap m = index_map(src.geometry(), target);
  Volume<T> out(target, T{});
  const auto& ts = target.shape();
  std::size_t i = 0;
  for (std::int64_t z = 0; z < ts[2]; ++z) {
    for (std::int64_t y = 0; y < ts[1]; ++y) {
      for (std::int64_t x = 0; x < ts[0]; ++x, ++i) {
        Vec3 c{};
        for (int r = 0; r < 3; ++r) {
          c[r] = snap(m[r][0] * static_cast<double>(x) + m[r][1] * static_cast<double>(y) +
                      m[r][2] * static_cast<double>(z) + m[r][3]);
        }
        out[i] = sample(c);
      }
    }
  }
  return out;
}

template <typename T>
Volume<T> resample_nearest(const Volume<T>& src, const Geometry& target) {
  if (same_grid(src.geometry(), target, 1e-12)) return Volume<T>(target, src.values());
  const auto& s = src.shape();
  return sample_grid(src, target, [&](const Vec3& c) -> T {
    Index3 idx{};
    for (int a = 0; a < 3; ++a) {
      idx[a] = static_cast<std::int64_t>(std::floor(c[a] + 0.5));
      if (idx[a] < 0 || idx[a] >= s[a]) return T{};
    }
    return src(idx[0], idx[1], idx[2]);
  });
}

}  // namespace

ScalarVolume resample(const ScalarVolume& volume, const Geometry& target, Interpolation mode) {
  if (mode == Interpolation::kNearest) return resample_nearest(volume, target);
  if (same_grid(volume.geometry(), target, 1e-12)) return ScalarVolume(target, volume.values());
  const auto& s = volume.shape();
  return sample_grid(volume, target, [&](const Vec3& c) -> float {
    std::int64_t i0[3];
    double f[3];
    for (int a = 0; a < 3; ++a) {
      if (c[a] < 0.0 || c[a] > static_cast<double>(s[a] - 1)) return 0.0f;
      i0[a] = std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(c[a])), s[a] - 1);
      f[a] = c[a] - static_cast<double>(i0[a]);
    }
    double acc = 0.0;
    for (int dz = 0; dz < 2; ++dz) {
      const double wz = dz ? f[2] : 1.0 - f[2];
      if (wz == 0.0) continue;
      for (int dy = 0; dy < 2; ++dy) {
        const double wy = dy ? f[1] : 1.0 - f[1];
        if (wy == 0.0) continue;
        for (int dx = 0; dx < 2; ++dx) {
          const double wx = dx ? f[0] : 1.0 - f[0];
          if (wx == 0.0) continue;
          acc += wx * wy * wz * volume(i0[0] + dx, i0[1] + dy, i0[2] + dz);
        }
      }
    }
    return static_cast<float>(acc);
  });
}

LabelMap resample(const LabelMap& labels, const Geometry& target, Interpolation mode) {
  if (mode == Interpolation::kTrilinear) {
    throw InvalidArgument("trilinear interpolation is not defined for label maps");
  }
  return resample_nearest(labels, target);
}

}  // namespace abdo
