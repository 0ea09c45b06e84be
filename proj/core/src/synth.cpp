#include "abdo/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "abdo/error.hpp"
#include "abdo/resample.hpp"

namespace abdo {
namespace {

// Sub-stream ids: each stage draws from its own stream so that changing one
// range never shifts the draws of another stage.
enum Stage : std::uint64_t {
  kStageClusters = 1,
  kStageArms = 2,
  kStageSpatial = 3,
  kStageIntensity = 4,
  kStageSynthesis = 5,
  kStageBias = 6,
  kStageGamma = 7,
  kStageNoise = 8,
  kStageResolution = 9,
};

struct AxisWeights {
  std::vector<std::int64_t> index;
  std::vector<double> frac;
};

AxisWeights axis_weights(std::int64_t n, int grid) {
  AxisWeights w{std::vector<std::int64_t>(static_cast<std::size_t>(n)),
                std::vector<double>(static_cast<std::size_t>(n))};
  for (std::int64_t i = 0; i < n; ++i) {
    if (grid == 1 || n == 1) continue;
    const double u = static_cast<double>(i) * (grid - 1) / static_cast<double>(n - 1);
    auto j = static_cast<std::int64_t>(std::floor(u));
    j = std::min<std::int64_t>(j, grid - 2);
    w.index[static_cast<std::size_t>(i)] = j;
    w.frac[static_cast<std::size_t>(i)] = u - static_cast<double>(j);
  }
  return w;
}

inline double lerp_at(const double* base, std::size_t stride, const AxisWeights& w,
                      std::size_t i, int grid) {
  if (grid == 1) return base[0];
  const auto j = static_cast<std::size_t>(w.index[i]);
  const double f = w.frac[i];
  const double a = base[j * stride];
  return f == 0.0 ? a : a + f * (base[(j + 1) * stride] - a);
}

Range nonnegative(double hi) { return {0.0, hi}; }

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

Geometry respaced(const Geometry& g, double spacing) {
  Shape shape{};
  Affine a = g.affine();
  for (int c = 0; c < 3; ++c) {
    const double ratio = spacing / g.spacing()[c];
    shape[c] = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::llround(static_cast<double>(g.shape()[c]) / ratio)));
    for (int r = 0; r < 3; ++r) a[r][c] *= ratio;
  }
  return Geometry(shape, {spacing, spacing, spacing}, a);
}

std::array<std::array<double, 3>, 3> matmul(const std::array<std::array<double, 3>, 3>& a,
                                            const std::array<std::array<double, 3>, 3>& b) {
  std::array<std::array<double, 3>, 3> c{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
    }
  }
  return c;
}

}  // namespace

void GenerationConfig::validate() const {
  for (const auto& [range, name] :
       {std::pair{gmm_mean_range, "gmm_mean_range"}, std::pair{gmm_std_range, "gmm_std_range"},
        std::pair{rotation_range, "rotation_range"}, std::pair{scale_range, "scale_range"},
        std::pair{shear_range, "shear_range"}, std::pair{translation_range, "translation_range"}}) {
    require(range.lo <= range.hi, std::string(name) + " must satisfy lo <= hi");
  }
  require(gmm_std_range.lo >= 0.0, "gmm_std_range must be non-negative");
  require(scale_range.lo > 0.0, "scale_range must be positive");
  require(deformation_grid >= 2, "deformation_grid must be >= 2");
  require(bias_grid >= 2, "bias_grid must be >= 2");
  require(deformation_std_max >= 0.0, "deformation_std_max must be >= 0");
  require(bias_std_max >= 0.0, "bias_std_max must be >= 0");
  require(gamma_log_std >= 0.0, "gamma_log_std must be >= 0");
  require(noise_std_max >= 0.0, "noise_std_max must be >= 0");
  require(slice_spacing_max >= 0.0, "slice_spacing_max must be >= 0");
  require(arm_removal_probability >= 0.0 && arm_removal_probability <= 1.0,
          "arm_removal_probability must lie in [0, 1]");
  require(target_spacing > 0.0, "target_spacing must be > 0");
  for (auto n : target_shape) require(n >= 1, "target_shape components must be >= 1");
}

GenerationConfig GenerationConfig::no_augmentation() {
  GenerationConfig c;
  c.rotation_range = {0.0, 0.0};
  c.scale_range = {1.0, 1.0};
  c.shear_range = {0.0, 0.0};
  c.translation_range = {0.0, 0.0};
  c.deformation_std_max = 0.0;
  c.bias_std_max = 0.0;
  c.gamma_log_std = 0.0;
  c.noise_std_max = 0.0;
  c.slice_spacing_max = 0.0;
  c.arm_removal_probability = 0.0;
  return c;
}

void DrawnParams::check_ranges(const GenerationConfig& c) const {
  auto in = [](const Range& r, double v, const std::string& name) {
    if (!r.contains(v)) {
      std::ostringstream os;
      os << name << " = " << v << " outside [" << r.lo << ", " << r.hi << "]";
      throw InvalidArgument(os.str());
    }
  };
  for (int a = 0; a < 3; ++a) {
    in(c.rotation_range, rotation_deg[a], "rotation_deg");
    in(c.scale_range, scale[a], "scale");
    in(c.translation_range, translation[a], "translation");
  }
  for (double s : shear) in(c.shear_range, s, "shear");
  in(nonnegative(c.deformation_std_max), deformation_std, "deformation_std");
  in(nonnegative(c.bias_std_max), bias_std, "bias_std");
  in(nonnegative(c.noise_std_max), noise_std, "noise_std");
  in({0.0, 2.0}, resolution_axis, "resolution_axis");
  in({c.target_spacing, std::max(c.target_spacing, c.slice_spacing_max)}, slice_spacing,
     "slice_spacing");
  for (const auto& [label, p] : intensities) {
    in(c.gmm_mean_range, p.mean, "intensity mean of fine label " + std::to_string(label));
    in(c.gmm_std_range, p.stddev, "intensity std of fine label " + std::to_string(label));
  }
}

std::string DrawnParams::to_json() const {
  using nlohmann::json;
  json clusters = json::object();
  for (const auto& [label, k] : clusters_per_label) clusters[std::to_string(label)] = k;
  json intens = json::object();
  for (const auto& [label, p] : intensities) {
    intens[std::to_string(label)] = json{{"mean", p.mean}, {"std", p.stddev}};
  }
  const json j{{"seed", seed},
               {"arms_removed", arms_removed},
               {"rotation_deg", rotation_deg},
               {"scale", scale},
               {"shear", shear},
               {"translation_voxels", translation},
               {"deformation_std", deformation_std},
               {"bias_std", bias_std},
               {"log_gamma", log_gamma},
               {"noise_std", noise_std},
               {"resolution_axis", resolution_axis},
               {"slice_spacing_mm", slice_spacing},
               {"clusters_per_label", std::move(clusters)},
               {"intensities", std::move(intens)},
               {"constant_image", constant_image}};
  return j.dump(2);
}

std::vector<float> upsample_control_grid(std::span<const double> control, int grid,
                                         const Shape& shape) {
  const auto g = static_cast<std::size_t>(grid);
  if (grid < 1 || control.size() != g * g * g) {
    throw InvalidArgument("control grid size does not match grid^3");
  }
  const auto n0 = static_cast<std::size_t>(shape[0]);
  const auto n1 = static_cast<std::size_t>(shape[1]);
  const auto n2 = static_cast<std::size_t>(shape[2]);
  const AxisWeights wx = axis_weights(shape[0], grid);
  const AxisWeights wy = axis_weights(shape[1], grid);
  const AxisWeights wz = axis_weights(shape[2], grid);

  std::vector<double> px(n0 * g * g);
  for (std::size_t z = 0; z < g; ++z) {
    for (std::size_t y = 0; y < g; ++y) {
      const double* row = control.data() + (z * g + y) * g;
      for (std::size_t x = 0; x < n0; ++x) px[(z * g + y) * n0 + x] = lerp_at(row, 1, wx, x, grid);
    }
  }
  std::vector<double> pxy(n0 * n1 * g);
  for (std::size_t z = 0; z < g; ++z) {
    for (std::size_t y = 0; y < n1; ++y) {
      for (std::size_t x = 0; x < n0; ++x) {
        pxy[(z * n1 + y) * n0 + x] = lerp_at(px.data() + z * g * n0 + x, n0, wy, y, grid);
      }
    }
  }
  std::vector<float> out(n0 * n1 * n2);
  for (std::size_t z = 0; z < n2; ++z) {
    for (std::size_t y = 0; y < n1; ++y) {
      for (std::size_t x = 0; x < n0; ++x) {
        out[(z * n1 + y) * n0 + x] =
            static_cast<float>(lerp_at(pxy.data() + y * n0 + x, n0 * n1, wz, z, grid));
      }
    }
  }
  return out;
}

ArmRemoval remove_arms(const LabelMap& labels, const std::vector<Label>& arm_labels,
                       double probability, Rng& rng) {
  ArmRemoval out{labels, rng.bernoulli(probability)};
  if (!out.removed || arm_labels.empty()) return out;
  for (auto& l : out.labels.data()) {
    if (std::find(arm_labels.begin(), arm_labels.end(), l) != arm_labels.end()) l = 0;
  }
  return out;
}

SpatialTransform sample_spatial_transform(const Shape& shape, const GenerationConfig& config,
                                          Rng& rng) {
  SpatialTransform t;
  for (auto& r : t.rotation_deg) r = rng.uniform(config.rotation_range.lo, config.rotation_range.hi);
  for (auto& s : t.scale) s = rng.uniform(config.scale_range.lo, config.scale_range.hi);
  for (auto& s : t.shear) s = rng.uniform(config.shear_range.lo, config.shear_range.hi);
  for (auto& v : t.translation) {
    v = rng.uniform(config.translation_range.lo, config.translation_range.hi);
  }
  t.deformation_std = rng.uniform(0.0, config.deformation_std_max);
  t.grid = config.deformation_grid;
  const auto g3 = static_cast<std::size_t>(t.grid) * t.grid * t.grid;
  for (auto& axis : t.control) {
    axis.resize(g3);
    for (auto& c : axis) c = rng.normal(0.0, t.deformation_std);
  }

  constexpr double deg = std::numbers::pi / 180.0;
  const double ax = t.rotation_deg[0] * deg, ay = t.rotation_deg[1] * deg, az = t.rotation_deg[2] * deg;
  const std::array<std::array<double, 3>, 3> rx{{{1, 0, 0},
                                                  {0, std::cos(ax), -std::sin(ax)},
                                                  {0, std::sin(ax), std::cos(ax)}}};
  const std::array<std::array<double, 3>, 3> ry{{{std::cos(ay), 0, std::sin(ay)},
                                                  {0, 1, 0},
                                                  {-std::sin(ay), 0, std::cos(ay)}}};
  const std::array<std::array<double, 3>, 3> rz{{{std::cos(az), -std::sin(az), 0},
                                                  {std::sin(az), std::cos(az), 0},
                                                  {0, 0, 1}}};
  const auto& sh = t.shear;
  const std::array<std::array<double, 3>, 3> shear{{{1, sh[0], sh[1]}, {sh[2], 1, sh[3]}, {sh[4], sh[5], 1}}};
  const std::array<std::array<double, 3>, 3> scale{
      {{t.scale[0], 0, 0}, {0, t.scale[1], 0}, {0, 0, t.scale[2]}}};
  t.linear = matmul(matmul(matmul(rz, ry), rx), matmul(shear, scale));

  t.field.shape = shape;
  const std::size_t count = static_cast<std::size_t>(shape[0]) * shape[1] * shape[2];
  t.field.vectors.assign(count, {0.0f, 0.0f, 0.0f});
  if (t.deformation_std > 0.0) {
    for (int a = 0; a < 3; ++a) {
      const auto v = upsample_control_grid(t.control[a], t.grid, shape);
      for (std::size_t i = 0; i < count; ++i) t.field.vectors[i][a] = v[i];
    }
  }

  const Vec3 centre{(shape[0] - 1) / 2.0, (shape[1] - 1) / 2.0, (shape[2] - 1) / 2.0};
  const auto& m = t.linear;
  std::size_t i = 0;
  for (std::int64_t z = 0; z < shape[2]; ++z) {
    for (std::int64_t y = 0; y < shape[1]; ++y) {
      for (std::int64_t x = 0; x < shape[0]; ++x, ++i) {
        auto& d = t.field.vectors[i];
        const Vec3 p{static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
        const Vec3 q{p[0] + d[0] - centre[0], p[1] + d[1] - centre[1], p[2] + d[2] - centre[2]};
        for (int r = 0; r < 3; ++r) {
          const double src = m[r][0] * q[0] + m[r][1] * q[1] + m[r][2] * q[2] + centre[r] +
                             t.translation[r];
          d[r] = static_cast<float>(src - p[r]);
        }
      }
    }
  }
  return t;
}

LabelMap warp_labels(const LabelMap& labels, const DisplacementField& field) {
  const Shape& s = labels.shape();
  if (field.shape != s || field.vectors.size() != labels.size()) {
    throw GeometryMismatch("displacement field shape does not match the label map");
  }
  LabelMap out(labels.geometry(), Label{0});
  std::size_t i = 0;
  for (std::int64_t z = 0; z < s[2]; ++z) {
    for (std::int64_t y = 0; y < s[1]; ++y) {
      for (std::int64_t x = 0; x < s[0]; ++x, ++i) {
        const auto& d = field.vectors[i];
        const auto sx = static_cast<std::int64_t>(std::floor(static_cast<double>(x) + d[0] + 0.5));
        const auto sy = static_cast<std::int64_t>(std::floor(static_cast<double>(y) + d[1] + 0.5));
        const auto sz = static_cast<std::int64_t>(std::floor(static_cast<double>(z) + d[2] + 0.5));
        if (sx < 0 || sy < 0 || sz < 0 || sx >= s[0] || sy >= s[1] || sz >= s[2]) continue;
        out[i] = labels(sx, sy, sz);
      }
    }
  }
  return out;
}

ScalarVolume synthesize_intensities(const LabelMap& fine,
                                    const std::map<Label, IntensityParams>& params, Rng& rng) {
  const Label max_label = fine.size() == 0 ? 0 : *std::max_element(fine.data().begin(), fine.data().end());
  std::vector<IntensityParams> lookup(static_cast<std::size_t>(max_label) + 1);
  std::vector<char> known(lookup.size(), 0);
  for (const auto& [label, p] : params) {
    if (label <= max_label) {
      lookup[label] = p;
      known[label] = 1;
    }
  }
  for (Label l : fine.data()) {
    if (!known[l]) {
      throw InvalidArgument("no intensity parameters for fine label " + std::to_string(l));
    }
  }
  ScalarVolume out(fine.geometry(), 0.0f);
  NormalDistribution unit(0.0, 1.0);
  auto& engine = rng.engine();
  for (std::size_t i = 0; i < fine.size(); ++i) {
    const auto& p = lookup[fine[i]];
    const double z = unit(engine);
    out[i] = static_cast<float>(p.stddev == 0.0 ? p.mean : p.mean + p.stddev * z);
  }
  return out;
}

BiasDraw apply_bias_field(const ScalarVolume& image, const GenerationConfig& config, Rng& rng) {
  BiasDraw out{image, rng.uniform(0.0, config.bias_std_max), {}};
  const auto g = static_cast<std::size_t>(config.bias_grid);
  out.control.resize(g * g * g);
  for (auto& c : out.control) c = rng.normal(0.0, out.stddev);
  if (out.stddev == 0.0) return out;
  const auto field = upsample_control_grid(out.control, config.bias_grid, image.shape());
  for (std::size_t i = 0; i < out.image.size(); ++i) {
    out.image[i] *= std::exp(field[i]);
  }
  return out;
}

ScalarVolume normalize_min_max(const ScalarVolume& image, bool* constant) {
  const auto [lo_it, hi_it] = std::minmax_element(image.data().begin(), image.data().end());
  const double lo = *lo_it, hi = *hi_it;
  if (constant) *constant = !(hi > lo);
  ScalarVolume out(image.geometry(), 0.0f);
  if (!(hi > lo)) return out;
  const double inv = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < image.size(); ++i) {
    out[i] = static_cast<float>(std::clamp((image[i] - lo) * inv, 0.0, 1.0));
  }
  return out;
}

ScalarVolume gamma_transform(const ScalarVolume& image, double log_gamma, bool* constant) {
  ScalarVolume out = normalize_min_max(image, constant);
  if (log_gamma == 0.0) return out;
  const auto exponent = static_cast<float>(std::exp(log_gamma));
  for (auto& v : out.data()) v = std::pow(v, exponent);
  return out;
}

GammaDraw apply_gamma_contrast(const ScalarVolume& image, const GenerationConfig& config, Rng& rng) {
  GammaDraw out;
  out.log_gamma = rng.normal(0.0, config.gamma_log_std);
  out.image = gamma_transform(image, out.log_gamma, &out.constant_input);
  return out;
}

ScalarVolume add_noise(const ScalarVolume& image, double stddev, Rng& rng) {
  ScalarVolume out = image;
  if (stddev == 0.0) return out;
  NormalDistribution noise(0.0, stddev);
  auto& engine = rng.engine();
  for (auto& v : out.data()) {
    v = static_cast<float>(std::clamp(static_cast<double>(v) + noise(engine), 0.0, 1.0));
  }
  return out;
}

NoiseDraw apply_noise(const ScalarVolume& image, const GenerationConfig& config, Rng& rng) {
  NoiseDraw out;
  out.stddev = rng.uniform(0.0, config.noise_std_max);
  out.image = add_noise(image, out.stddev, rng);
  return out;
}

ScalarVolume degrade_resolution(const ScalarVolume& image, int axis, double slice_spacing,
                                double target_spacing) {
  if (axis < 0 || axis > 2) throw InvalidArgument("resolution axis must be 0, 1 or 2");
  const double ratio = slice_spacing / target_spacing;
  if (!(ratio > 1.0 + 1e-9)) return image;

  const Shape& s = image.shape();
  const auto n = static_cast<std::size_t>(s[axis]);
  std::size_t stride = 1;
  for (int a = 0; a < axis; ++a) stride *= static_cast<std::size_t>(s[a]);
  const std::size_t lines = image.size() / n;

  const double sigma = 2.0 * ratio / std::numbers::pi * std::sqrt(2.0 * std::numbers::ln2);
  const auto radius = static_cast<std::int64_t>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (std::int64_t k = -radius; k <= radius; ++k) {
    kernel[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * (k * k) / (sigma * sigma));
  }
  const std::size_t m = static_cast<std::size_t>(std::floor(static_cast<double>(n - 1) / ratio)) + 1;

  ScalarVolume out(image.geometry(), 0.0f);
  std::vector<double> line(n), blurred(n), coarse(m);
  const auto& src = image.data();
  for (std::size_t l = 0; l < lines; ++l) {
    // Line start: lines enumerate every voxel whose `axis` coordinate is 0.
    const std::size_t outer = l / stride, inner = l % stride;
    const std::size_t start = outer * stride * n + inner;
    for (std::size_t i = 0; i < n; ++i) line[i] = src[start + i * stride];
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0, wsum = 0.0;
      const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(i) - radius);
      const auto hi = std::min<std::int64_t>(static_cast<std::int64_t>(n) - 1, static_cast<std::int64_t>(i) + radius);
      for (std::int64_t j = lo; j <= hi; ++j) {
        const double w = kernel[static_cast<std::size_t>(j - static_cast<std::int64_t>(i) + radius)];
        acc += w * line[static_cast<std::size_t>(j)];
        wsum += w;
      }
      blurred[i] = acc / wsum;
    }
    for (std::size_t j = 0; j < m; ++j) {
      const double u = static_cast<double>(j) * ratio;
      const auto i0 = std::min<std::size_t>(static_cast<std::size_t>(u), n - 1);
      const double f = u - static_cast<double>(i0);
      coarse[j] = (f == 0.0 || i0 + 1 >= n) ? blurred[i0] : blurred[i0] + f * (blurred[i0 + 1] - blurred[i0]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double u = static_cast<double>(i) / ratio;
      const auto j0 = static_cast<std::size_t>(u);
      double v;
      if (j0 + 1 >= m) {
        v = coarse[m - 1];
      } else {
        const double f = u - static_cast<double>(j0);
        v = f == 0.0 ? coarse[j0] : coarse[j0] + f * (coarse[j0 + 1] - coarse[j0]);
      }
      out[start + i * stride] = static_cast<float>(v);
    }
  }
  return out;
}

ResolutionDraw simulate_resolution(const ScalarVolume& image, const GenerationConfig& config,
                                   Rng& rng) {
  ResolutionDraw out;
  out.axis = static_cast<int>(rng.index(3));
  out.slice_spacing =
      rng.uniform(config.target_spacing, std::max(config.target_spacing, config.slice_spacing_max));
  out.image = degrade_resolution(image, out.axis, out.slice_spacing, config.target_spacing);
  return out;
}

TrainingPair generate_training_pair(const LabelMap& coarse_labels, const ClusterSource& source,
                                    const GenerationConfig& config, std::uint64_t seed) {
  config.validate();
  TrainingPair pair;
  DrawnParams& params = pair.params;
  params.seed = seed;

  // Fine labels are selected on the input grid; every later spatial stage is
  // a nearest-neighbour pullback applied identically to coarse and fine maps.
  ClusteredLabels clustered;
  const std::uint64_t cluster_seed = derive_seed(seed, kStageClusters);
  if (source.cache != nullptr) {
    clustered = source.cache->draw(coarse_labels, cluster_seed);
  } else if (source.ct != nullptr) {
    clustered = cluster_labelmap(*source.ct, coarse_labels, source.clustering, cluster_seed);
  } else {
    clustered.fine = coarse_labels;
    std::map<Label, std::size_t> counts;
    for (Label l : coarse_labels.data()) ++counts[l];
    Label next = 1;
    std::map<Label, Label> remap;
    for (const auto& [label, count] : counts) {
      remap[label] = next;
      clustered.table.parents[label] = ParentClusters{1, 1, count, {{next, GmmComponent{}}}};
      ++next;
    }
    for (auto& l : clustered.fine.data()) l = remap[l];
  }
  for (const auto& [label, p] : clustered.table.parents) params.clusters_per_label[label] = p.requested_k;

  LabelMap coarse = coarse_labels;
  LabelMap fine = std::move(clustered.fine);
  {
    Rng rng = Rng::stream(seed, kStageArms);
    const ArmRemoval arms = remove_arms(coarse, config.arm_labels, config.arm_removal_probability, rng);
    params.arms_removed = arms.removed;
    if (arms.removed && !config.arm_labels.empty()) {
      for (std::size_t i = 0; i < coarse.size(); ++i) {
        if (arms.labels[i] != coarse[i]) fine[i] = 0;
      }
      coarse = arms.labels;
    }
  }

  const auto& sp = coarse.spacing();
  if (std::abs(sp[0] - config.target_spacing) > 1e-6 * config.target_spacing ||
      std::abs(sp[1] - config.target_spacing) > 1e-6 * config.target_spacing ||
      std::abs(sp[2] - config.target_spacing) > 1e-6 * config.target_spacing) {
    const Geometry g = respaced(coarse.geometry(), config.target_spacing);
    coarse = resample(coarse, g);
    fine = resample(fine, g);
  }
  coarse = center_crop_pad(coarse, config.target_shape);
  fine = center_crop_pad(fine, config.target_shape);

  {
    Rng rng = Rng::stream(seed, kStageSpatial);
    SpatialTransform t = sample_spatial_transform(config.target_shape, config, rng);
    params.rotation_deg = t.rotation_deg;
    params.scale = t.scale;
    params.shear = t.shear;
    params.translation = t.translation;
    params.deformation_std = t.deformation_std;
    coarse = warp_labels(coarse, t.field);
    fine = warp_labels(fine, t.field);
  }

  {
    Rng rng = Rng::stream(seed, kStageIntensity);
    const Label fine_count = static_cast<Label>(clustered.table.fine_label_count());
    for (Label l = 0; l <= fine_count; ++l) {
      IntensityParams p;
      p.mean = rng.uniform(config.gmm_mean_range.lo, config.gmm_mean_range.hi);
      p.stddev = rng.uniform(config.gmm_std_range.lo, config.gmm_std_range.hi);
      params.intensities[l] = p;
    }
  }

  ScalarVolume image;
  {
    Rng rng = Rng::stream(seed, kStageSynthesis);
    image = synthesize_intensities(fine, params.intensities, rng);
  }
  {
    Rng rng = Rng::stream(seed, kStageBias);
    BiasDraw bias = apply_bias_field(image, config, rng);
    params.bias_std = bias.stddev;
    image = std::move(bias.image);
  }
  {
    Rng rng = Rng::stream(seed, kStageGamma);
    GammaDraw gamma = apply_gamma_contrast(image, config, rng);
    params.log_gamma = gamma.log_gamma;
    params.constant_image = gamma.constant_input;
    image = std::move(gamma.image);
  }
  {
    Rng rng = Rng::stream(seed, kStageNoise);
    NoiseDraw noise = apply_noise(image, config, rng);
    params.noise_std = noise.stddev;
    image = std::move(noise.image);
  }
  {
    Rng rng = Rng::stream(seed, kStageResolution);
    ResolutionDraw res = simulate_resolution(image, config, rng);
    params.resolution_axis = res.axis;
    params.slice_spacing = res.slice_spacing;
    image = std::move(res.image);
  }
  bool constant = false;
  pair.image = normalize_min_max(image, &constant);
  params.constant_image = params.constant_image || constant;
  pair.target = std::move(coarse);
  pair.fine = std::move(fine);
  return pair;
}

}  // namespace abdo
