#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "abdo/volume.hpp"

namespace abdo {

/// One region of a label map; non-zero bytes are foreground.
using BinaryMask = Volume<std::uint8_t>;
/// Distances in mm.
using DistanceMap = Volume<double>;

BinaryMask region_mask(const LabelMap& labels, Label id);
std::size_t count_foreground(const BinaryMask& mask) noexcept;

/// 2|A∩B| / (|A|+|B|). Empty when either mask is empty; throws
/// GeometryMismatch for different grids.
std::optional<double> dice(const BinaryMask& a, const BinaryMask& b);

/// Foreground voxels with at least one 6-neighbour that is background or
/// outside the grid.
BinaryMask surface_mask(const BinaryMask& mask);
std::vector<Index3> extract_surface(const BinaryMask& mask);

/// Exact Euclidean distance (mm) from every voxel centre to the nearest
/// foreground voxel centre. Separable lower-envelope transform with
/// per-axis spacing. Throws EmptyInput for an empty mask.
DistanceMap distance_transform(const BinaryMask& mask, const Spacing& spacing);

enum class Hd95Mode {
  /// max(P95(d_AB), P95(d_BA))
  kMaxOfDirected,
  /// P95 of d_AB ∪ d_BA
  kPooled,
};

/// Percentile with linear interpolation between order statistics
/// (position q·(n-1)). `values` is reordered.
double percentile(std::vector<double>& values, double q);

/// 95th percentile of voxel-centre surface distances in mm. Empty when either
/// mask is empty.
std::optional<double> hd95(const BinaryMask& a, const BinaryMask& b, const Spacing& spacing,
                           Hd95Mode mode = Hd95Mode::kMaxOfDirected);

/// 1 − mean over classes 1..C−1 of (2Σpg + ε) / (Σp² + Σg² + ε).
/// `probabilities[c]` holds the class-c probability per voxel; they must sum
/// to 1 within 1e-6 at every voxel.
double soft_dice_loss(const std::vector<ScalarVolume>& probabilities, const LabelMap& target,
                      double epsilon = 1e-5);

/// Voxel count × voxel volume, in mL.
double region_volume(const LabelMap& labels, Label id, const Spacing& spacing);

struct RegionMetrics {
  std::optional<double> dice;
  std::optional<double> hd95_mm;
  double volume_ml = 0.0;
};

}  // namespace abdo
