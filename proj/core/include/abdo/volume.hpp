#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "abdo/error.hpp"
#include "abdo/geometry.hpp"

namespace abdo {

using Label = std::uint32_t;

/// Dense 3D array of `T` on a Geometry. Storage is x fastest, z slowest.
template <typename T>
class Volume {
 public:
  using value_type = T;

  Volume() : geometry_(), data_(1) {}
  explicit Volume(Geometry geometry, T fill = T{})
      : geometry_(std::move(geometry)), data_(geometry_.voxel_count(), fill) {}
  Volume(Geometry geometry, std::vector<T> data)
      : geometry_(std::move(geometry)), data_(std::move(data)) {
    if (data_.size() != geometry_.voxel_count()) {
      throw InvalidArgument("volume data size does not match geometry shape");
    }
  }

  const Geometry& geometry() const noexcept { return geometry_; }
  const Shape& shape() const noexcept { return geometry_.shape(); }
  const Spacing& spacing() const noexcept { return geometry_.spacing(); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  std::size_t index(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept {
    const auto& s = geometry_.shape();
    return static_cast<std::size_t>((z * s[1] + y) * s[0] + x);
  }
  Index3 coordinates(std::size_t linear) const noexcept {
    const auto& s = geometry_.shape();
    const auto l = static_cast<std::int64_t>(linear);
    return {l % s[0], (l / s[0]) % s[1], l / (s[0] * s[1])};
  }

  T& operator()(std::int64_t x, std::int64_t y, std::int64_t z) noexcept {
    return data_[index(x, y, z)];
  }
  const T& operator()(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept {
    return data_[index(x, y, z)];
  }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  bool operator==(const Volume& other) const {
    return same_grid(geometry_, other.geometry_) && data_ == other.data_;
  }

 private:
  Geometry geometry_;
  std::vector<T> data_;
};

/// Intensities. Single precision keeps full-size synthetic volumes small.
using ScalarVolume = Volume<float>;
/// Integer labels; 0 is background.
using LabelMap = Volume<Label>;

/// Per-axis start offset (source index of output voxel 0) used by
/// center_crop_pad. Odd crops drop the extra voxel on the high side; odd pads
/// add it on the high side.
inline Index3 center_crop_pad_offset(const Shape& input, const Shape& target) {
  Index3 offset{};
  for (int a = 0; a < 3; ++a) {
    const std::int64_t diff = input[a] - target[a];
    offset[a] = diff >= 0 ? diff / 2 : -((-diff) / 2);
  }
  return offset;
}

/// Symmetric crop or zero-pad to `target_shape`. Spacing is unchanged and the
/// affine is translated so retained voxels keep their world positions.
template <typename T>
Volume<T> center_crop_pad(const Volume<T>& input, const Shape& target_shape) {
  for (auto n : target_shape) {
    if (n < 1) throw InvalidArgument("center_crop_pad target shape components must be >= 1");
  }
  const Shape& in = input.shape();
  const Index3 offset = center_crop_pad_offset(in, target_shape);
  Volume<T> out(input.geometry().reframed(target_shape, offset), T{});

  // Overlapping index range in output coordinates.
  Index3 lo{}, hi{};
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::max<std::int64_t>(0, -offset[a]);
    hi[a] = std::min<std::int64_t>(target_shape[a], in[a] - offset[a]);
  }
  if (hi[0] <= lo[0] || hi[1] <= lo[1] || hi[2] <= lo[2]) return out;
  for (std::int64_t z = lo[2]; z < hi[2]; ++z) {
    for (std::int64_t y = lo[1]; y < hi[1]; ++y) {
      const T* src = &input(lo[0] + offset[0], y + offset[1], z + offset[2]);
      std::copy(src, src + (hi[0] - lo[0]), &out(lo[0], y, z));
    }
  }
  return out;
}

}  // namespace abdo
