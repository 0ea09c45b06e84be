#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace abdo {

using Shape = std::array<std::int64_t, 3>;
using Index3 = std::array<std::int64_t, 3>;
using Spacing = std::array<double, 3>;
using Vec3 = std::array<double, 3>;
using Affine = std::array<std::array<double, 4>, 4>;

Affine identity_affine();
Affine diagonal_affine(const Spacing& spacing, const Vec3& origin = {0.0, 0.0, 0.0});

/// Voxel grid: shape (x, y, z; x fastest), spacing in mm and the
/// grid-to-world affine in mm. The upper-left 3x3 block of the affine must
/// have column norms equal to the spacing.
class Geometry {
 public:
  Geometry();
  explicit Geometry(const Shape& shape, const Spacing& spacing = {1.0, 1.0, 1.0});
  Geometry(const Shape& shape, const Spacing& spacing, const Affine& affine);

  /// Spacing taken from the column norms of `affine`.
  static Geometry from_affine(const Shape& shape, const Affine& affine);

  const Shape& shape() const noexcept { return shape_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  const Affine& affine() const noexcept { return affine_; }

  std::size_t voxel_count() const noexcept;
  double voxel_volume_mm3() const noexcept;
  bool invertible() const noexcept { return invertible_; }
  bool contains(const Index3& idx) const noexcept;

  Vec3 to_world(const Vec3& index) const noexcept;
  /// Continuous voxel index of a world point. Throws GeometryMismatch when
  /// the affine is singular.
  Vec3 to_index(const Vec3& world) const;

  /// Grid of `new_shape` whose voxel 0 sits at voxel `offset` of this grid.
  Geometry reframed(const Shape& new_shape, const Index3& offset) const;

 private:
  void validate_and_invert();

  Shape shape_;
  Spacing spacing_;
  Affine affine_;
  std::array<std::array<double, 3>, 3> inverse_{};
  bool invertible_ = false;
};

/// Same shape and affines equal within `rel_tol` (scaled by entry magnitude).
bool same_grid(const Geometry& a, const Geometry& b, double rel_tol = 1e-6) noexcept;

}  // namespace abdo
