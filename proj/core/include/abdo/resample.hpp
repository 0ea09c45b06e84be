#pragma once

#include "abdo/volume.hpp"

namespace abdo {

enum class Interpolation { kNearest, kTrilinear };

/// Samples `volume` at the world position of every voxel of `target`.
/// Positions outside the source grid read as 0.
ScalarVolume resample(const ScalarVolume& volume, const Geometry& target,
                      Interpolation mode = Interpolation::kTrilinear);

/// Label maps are always sampled with nearest neighbour; requesting
/// trilinear throws InvalidArgument.
LabelMap resample(const LabelMap& labels, const Geometry& target,
                  Interpolation mode = Interpolation::kNearest);

}  // namespace abdo
