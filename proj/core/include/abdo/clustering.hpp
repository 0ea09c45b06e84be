#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "abdo/gmm.hpp"
#include "abdo/volume.hpp"

namespace abdo {

struct ClusteringConfig {
  std::vector<int> k_foreground_choices{1, 2, 3};
  std::vector<int> k_background_choices{3, 4, 5, 6, 7};
  double em_tolerance = 1e-6;
  int em_max_iters = 100;
  double variance_floor = 1e-4;
  /// Seeds EM subsampling only; the K draws use the seed passed per call.
  std::uint64_t seed = 0;
  std::size_t max_em_points = 200000;
  /// When set, background voxels below this intensity are left out of the
  /// background fit (they are still assigned a cluster).
  std::optional<double> background_fit_min;

  void validate() const;
  EmOptions em_options() const;
};

struct FineLabel {
  Label id = 0;
  GmmComponent component;
};

struct ParentClusters {
  int requested_k = 1;
  /// Equal to requested_k unless the label had fewer voxels.
  int k = 1;
  std::size_t voxel_count = 0;
  std::vector<FineLabel> fine;
};

/// Original label id -> fine labels. Fine ids are numbered from 1 in order of
/// (original label, component mean); fine id 0 is left free for voxels with
/// no anatomy (padding, removed arms, out-of-view).
struct ClusterTable {
  std::map<Label, ParentClusters> parents;

  std::size_t fine_label_count() const;
  std::optional<Label> parent_of(Label fine_id) const;
};

struct ClusteredLabels {
  LabelMap fine;
  ClusterTable table;
};

/// Per-label EM clustering of CT intensities. K for label 0 is drawn from
/// k_background_choices and for every other label from k_foreground_choices,
/// using a stream seeded by `rng_seed`.
ClusteredLabels cluster_labelmap(const ScalarVolume& ct, const LabelMap& labels,
                                 const ClusteringConfig& config, std::uint64_t rng_seed);

/// Models for every K choice of every label, fitted once, plus a per-voxel
/// packed cluster index (mixed radix over the label's choices). `draw`
/// reproduces cluster_labelmap bitwise for the same seeds without refitting.
struct ClusterCache {
  struct Entry {
    Label label = 0;
    std::size_t voxel_count = 0;
    std::vector<int> requested_k;
    std::vector<int> effective_k;
    std::vector<GmmModel> models;
    std::vector<std::uint32_t> strides;
  };

  ClusteringConfig config;
  std::vector<Entry> entries;
  LabelMap codes;

  ClusteredLabels draw(const LabelMap& labels, std::uint64_t rng_seed) const;
};

ClusterCache precompute_clusters(const ScalarVolume& ct, const LabelMap& labels,
                                 const ClusteringConfig& config);

std::string cluster_table_to_json(const ClusterTable& table);
ClusterTable cluster_table_from_json(std::string_view text);

/// Writes `<stem>.json` (models) and `<stem>_codes.nii.gz` (packed indices).
void save_cluster_cache(const ClusterCache& cache, const std::filesystem::path& stem);
ClusterCache load_cluster_cache(const std::filesystem::path& stem);

}  // namespace abdo
