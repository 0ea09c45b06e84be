#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "abdo/clustering.hpp"
#include "abdo/rng.hpp"
#include "abdo/volume.hpp"

namespace abdo {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const noexcept { return v >= lo && v <= hi; }
};

/// Randomisation ranges of the synthetic generator. Defaults follow the
/// public SynthSeg configuration.
struct GenerationConfig {
  Range gmm_mean_range{0.0, 255.0};
  Range gmm_std_range{0.0, 35.0};
  Range rotation_range{-15.0, 15.0};       // degrees, each axis
  Range scale_range{0.85, 1.15};           // each axis
  Range shear_range{-0.012, 0.012};        // each off-diagonal term
  Range translation_range{-20.0, 20.0};    // voxels, each axis
  int deformation_grid = 10;               // control points per axis
  double deformation_std_max = 4.0;        // voxels
  int bias_grid = 4;
  double bias_std_max = 0.5;               // log-intensity
  double gamma_log_std = 0.25;
  double noise_std_max = 0.08;             // on the [0,1] scale
  double slice_spacing_max = 9.0;          // mm
  double arm_removal_probability = 0.5;
  std::vector<Label> arm_labels;
  Shape target_shape{300, 300, 250};
  double target_spacing = 1.5;             // mm, isotropic

  void validate() const;
  /// Every augmentation disabled: identity spatial transform, no bias,
  /// gamma, noise or resolution loss, arms never removed.
  static GenerationConfig no_augmentation();
};

struct IntensityParams {
  double mean = 0.0;
  double stddev = 0.0;
};

/// One concrete draw of every randomised quantity of a training pair.
struct DrawnParams {
  std::uint64_t seed = 0;
  bool arms_removed = false;
  Vec3 rotation_deg{};
  Vec3 scale{1.0, 1.0, 1.0};
  std::array<double, 6> shear{};  // xy, xz, yx, yz, zx, zy
  Vec3 translation{};
  double deformation_std = 0.0;
  double bias_std = 0.0;
  double log_gamma = 0.0;
  double noise_std = 0.0;
  int resolution_axis = 0;
  double slice_spacing = 0.0;
  std::map<Label, int> clusters_per_label;
  std::map<Label, IntensityParams> intensities;
  bool constant_image = false;

  /// Throws InvalidArgument naming the first field outside its range.
  void check_ranges(const GenerationConfig& config) const;
  std::string to_json() const;
};

struct TrainingPair {
  ScalarVolume image;  // [0, 1]
  LabelMap target;     // coarse labels, deformed like the image
  LabelMap fine;       // fine labels the image was rendered from
  DrawnParams params;
};

struct DisplacementField {
  Shape shape{1, 1, 1};
  /// Per-voxel (dx, dy, dz) in voxels; source = voxel + displacement.
  std::vector<std::array<float, 3>> vectors;
};

struct SpatialTransform {
  Vec3 rotation_deg{};
  Vec3 scale{1.0, 1.0, 1.0};
  std::array<double, 6> shear{};
  Vec3 translation{};
  /// Row-major 3x3 linear part applied about the volume centre.
  std::array<std::array<double, 3>, 3> linear{};
  double deformation_std = 0.0;
  int grid = 0;
  /// Control-point displacements, per axis, G³ values each (x fastest).
  std::array<std::vector<double>, 3> control;
  DisplacementField field;
};

struct ArmRemoval {
  LabelMap labels;
  bool removed = false;
};

struct BiasDraw {
  ScalarVolume image;
  double stddev = 0.0;
  std::vector<double> control;  // log-field control values, G³
};

struct GammaDraw {
  ScalarVolume image;
  double log_gamma = 0.0;
  bool constant_input = false;
};

struct NoiseDraw {
  ScalarVolume image;
  double stddev = 0.0;
};

struct ResolutionDraw {
  ScalarVolume image;
  int axis = 0;
  double slice_spacing = 0.0;
};

/// Trilinear (corner-aligned) upsampling of a G³ control grid to `shape`.
std::vector<float> upsample_control_grid(std::span<const double> control, int grid,
                                         const Shape& shape);

/// With `probability`, every voxel whose label is in `arm_labels` becomes 0.
ArmRemoval remove_arms(const LabelMap& labels, const std::vector<Label>& arm_labels,
                       double probability, Rng& rng);

SpatialTransform sample_spatial_transform(const Shape& shape, const GenerationConfig& config,
                                          Rng& rng);

/// Nearest-neighbour pullback; sources outside the grid read as 0.
LabelMap warp_labels(const LabelMap& labels, const DisplacementField& field);

/// Each voxel drawn independently from N(μ, σ²) of its label.
ScalarVolume synthesize_intensities(const LabelMap& fine,
                                    const std::map<Label, IntensityParams>& params, Rng& rng);

BiasDraw apply_bias_field(const ScalarVolume& image, const GenerationConfig& config, Rng& rng);

/// Min-max normalisation to [0,1]; a constant image maps to zeros.
ScalarVolume normalize_min_max(const ScalarVolume& image, bool* constant = nullptr);
/// Normalise then raise to exp(log_gamma).
ScalarVolume gamma_transform(const ScalarVolume& image, double log_gamma, bool* constant = nullptr);
GammaDraw apply_gamma_contrast(const ScalarVolume& image, const GenerationConfig& config, Rng& rng);

ScalarVolume add_noise(const ScalarVolume& image, double stddev, Rng& rng);
NoiseDraw apply_noise(const ScalarVolume& image, const GenerationConfig& config, Rng& rng);

/// Blur along `axis` with σ = 2r/π·√(2 ln 2) voxels (r = slice_spacing /
/// target_spacing), resample to the coarse spacing and back. A no-op for r = 1.
ScalarVolume degrade_resolution(const ScalarVolume& image, int axis, double slice_spacing,
                                double target_spacing);
ResolutionDraw simulate_resolution(const ScalarVolume& image, const GenerationConfig& config,
                                   Rng& rng);

/// Where fine labels come from. With a cache, K is drawn from it; with a CT,
/// clustering runs on the fly; with neither, every label is its own fine label.
struct ClusterSource {
  const ClusterCache* cache = nullptr;
  const ScalarVolume* ct = nullptr;
  ClusteringConfig clustering;
};

/// Full pipeline for one pair, fully determined by (inputs, config, seed).
TrainingPair generate_training_pair(const LabelMap& coarse_labels, const ClusterSource& source,
                                    const GenerationConfig& config, std::uint64_t seed);

}  // namespace abdo
