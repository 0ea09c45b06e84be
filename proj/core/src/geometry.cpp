#include "abdo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "abdo/error.hpp"

namespace abdo {

Affine identity_affine() { return diagonal_affine({1.0, 1.0, 1.0}); }

Affine diagonal_affine(const Spacing& spacing, const Vec3& origin) {
  Affine a{};
  for (int i = 0; i < 3; ++i) {
    a[i][i] = spacing[i];
    a[i][3] = origin[i];
  }
  a[3][3] = 1.0;
  return a;
}

Geometry::Geometry() : Geometry({1, 1, 1}, {1.0, 1.0, 1.0}) {}

Geometry::Geometry(const Shape& shape, const Spacing& spacing)
    : Geometry(shape, spacing, diagonal_affine(spacing)) {}

Geometry::Geometry(const Shape& shape, const Spacing& spacing, const Affine& affine)
    : shape_(shape), spacing_(spacing), affine_(affine) {
  validate_and_invert();
}

Geometry Geometry::from_affine(const Shape& shape, const Affine& affine) {
  Spacing spacing{};
  for (int c = 0; c < 3; ++c) {
    spacing[c] = std::sqrt(affine[0][c] * affine[0][c] + affine[1][c] * affine[1][c] +
                           affine[2][c] * affine[2][c]);
  }
  return Geometry(shape, spacing, affine);
}

void Geometry::validate_and_invert() {
  for (int i = 0; i < 3; ++i) {
    if (shape_[i] < 1) {
      throw InvalidArgument("geometry shape components must be >= 1");
    }
    if (!(spacing_[i] > 0.0) || !std::isfinite(spacing_[i])) {
      throw InvalidArgument("geometry spacing components must be positive and finite");
    }
  }
  for (int c = 0; c < 3; ++c) {
    const double norm = std::sqrt(affine_[0][c] * affine_[0][c] + affine_[1][c] * affine_[1][c] +
                                  affine_[2][c] * affine_[2][c]);
    if (std::abs(norm - spacing_[c]) > 1e-6 * spacing_[c]) {
      std::ostringstream os;
      os << "affine column " << c << " has norm " << norm << " but spacing is " << spacing_[c];
      throw InvalidArgument(os.str());
    }
  }
  affine_[3] = {0.0, 0.0, 0.0, 1.0};

  const auto& m = affine_;
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  const double scale = spacing_[0] * spacing_[1] * spacing_[2];
  invertible_ = std::abs(det) > 1e-12 * scale;
  if (!invertible_) return;
  const double inv = 1.0 / det;
  inverse_[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv;
  inverse_[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv;
  inverse_[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv;
  inverse_[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv;
  inverse_[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv;
  inverse_[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv;
  inverse_[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv;
  inverse_[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv;
  inverse_[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv;
}

std::size_t Geometry::voxel_count() const noexcept {
  return static_cast<std::size_t>(shape_[0]) * static_cast<std::size_t>(shape_[1]) *
         static_cast<std::size_t>(shape_[2]);
}

double Geometry::voxel_volume_mm3() const noexcept {
  return spacing_[0] * spacing_[1] * spacing_[2];
}

bool Geometry::contains(const Index3& idx) const noexcept {
  for (int i = 0; i < 3; ++i) {
    if (idx[i] < 0 || idx[i] >= shape_[i]) return false;
  }
  return true;
}

Vec3 Geometry::to_world(const Vec3& index) const noexcept {
  Vec3 w{};
  for (int r = 0; r < 3; ++r) {
    w[r] = affine_[r][0] * index[0] + affine_[r][1] * index[1] + affine_[r][2] * index[2] +
           affine_[r][3];
  }
  return w;
}

Vec3 Geometry::to_index(const Vec3& world) const {
  if (!invertible_) throw GeometryMismatch("geometry affine is not invertible");
  const Vec3 d{world[0] - affine_[0][3], world[1] - affine_[1][3], world[2] - affine_[2][3]};
  Vec3 idx{};
  for (int r = 0; r < 3; ++r) {
    idx[r] = inverse_[r][0] * d[0] + inverse_[r][1] * d[1] + inverse_[r][2] * d[2];
  }
  return idx;
}

Geometry Geometry::reframed(const Shape& new_shape, const Index3& offset) const {
  Affine a = affine_;
  const Vec3 origin = to_world({static_cast<double>(offset[0]), static_cast<double>(offset[1]),
                                static_cast<double>(offset[2])});
  for (int r = 0; r < 3; ++r) a[r][3] = origin[r];
  return Geometry(new_shape, spacing_, a);
}

bool same_grid(const Geometry& a, const Geometry& b, double rel_tol) noexcept {
  if (a.shape() != b.shape()) return false;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      const double x = a.affine()[r][c];
      const double y = b.affine()[r][c];
      const double scale = std::max({1.0, std::abs(x), std::abs(y)});
      if (std::abs(x - y) > rel_tol * scale) return false;
    }
  }
  return true;
}

}  // namespace abdo
