#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "abdo/metrics.hpp"
#include "abdo/stats.hpp"
#include "abdo/volume.hpp"

namespace abdo {

/// Source label id → canonical region id (1-based index into `regions`).
using LabelMapping = std::map<Label, Label>;

/// Canonical vocabulary plus the ground-truth and prediction mappings onto it.
///
///   regions = ["liver", "spleen"]
///   [gt]
///   liver = [1]
///   spleen = [2]
///   [pred]
///   liver = [6, 7]
///   spleen = [1]
struct RegionMap {
  std::vector<std::string> regions;
  LabelMapping gt;
  LabelMapping pred;
};

RegionMap parse_region_map(std::string_view toml_text);
RegionMap load_region_map(const std::filesystem::path& path);

struct CaseKey {
  std::string dataset;
  std::string subject;
  std::string sequence;
  std::string method;

  auto operator<=>(const CaseKey&) const = default;
};

struct EvaluationCase {
  CaseKey key;
  std::filesystem::path region_map;
  std::filesystem::path gt;
  std::filesystem::path pred;
  std::size_t line = 0;
};

struct EvaluationPlan {
  std::vector<EvaluationCase> cases;
  std::map<std::filesystem::path, RegionMap> region_maps;
};

/// Manifest columns: dataset,subject,sequence,method,region_map,gt,pred.
/// Relative paths resolve against the manifest's directory. Cases keep input
/// order.
EvaluationPlan load_manifest(const std::filesystem::path& path);

/// Rewrites mapped ids to their canonical id; unmapped labels become 0.
LabelMap harmonize_labels(const LabelMap& labels, const LabelMapping& mapping);

struct EvaluationRecord {
  CaseKey key;
  std::string region;
  std::optional<double> dice;
  std::optional<double> hd95_mm;
  double gt_volume_ml = 0.0;
  double pred_volume_ml = 0.0;
};

/// Per canonical region of harmonized maps. `pred` is resampled onto the
/// ground-truth grid with nearest neighbour when the grids differ.
std::vector<EvaluationRecord> evaluate_case(const LabelMap& gt, const LabelMap& pred,
                                            const std::vector<std::string>& regions,
                                            const CaseKey& key,
                                            Hd95Mode mode = Hd95Mode::kMaxOfDirected);

struct EvaluateOptions {
  std::size_t workers = 1;
  Hd95Mode hd95_mode = Hd95Mode::kMaxOfDirected;
  std::function<void(const std::string&)> log;
};

/// Loads, harmonizes and evaluates every case. Output is sorted by
/// (dataset, subject, sequence, method, region).
std::vector<EvaluationRecord> evaluate_plan(const EvaluationPlan& plan,
                                            const EvaluateOptions& options = {});

void sort_records(std::vector<EvaluationRecord>& records);

enum class SummaryMetric { kDice, kHd95 };

std::string_view metric_name(SummaryMetric metric) noexcept;

struct SummaryCell {
  std::string dataset;
  std::string region;
  std::string method;
  SummaryMetric metric = SummaryMetric::kDice;
  std::size_t n = 0;
  std::size_t n_missing = 0;
  std::optional<double> mean;
  /// Sample standard deviation; empty when n < 2.
  std::optional<double> stddev;
  bool best = false;
  bool significant = false;
};

struct SummaryTable {
  /// Sorted by (dataset, region, metric, method).
  std::vector<SummaryCell> cells;
  /// False when no (dataset, region) has two or more methods.
  bool has_significance = false;
};

/// Mean/std over non-missing values per (dataset, region, method). Best is the
/// highest mean Dice or lowest mean HD95. A best method is significant when its
/// paired Wilcoxon test against every other method, pairing on
/// (subject, sequence), stays below `alpha` after Bonferroni over those
/// comparisons.
SummaryTable summarize(const std::vector<EvaluationRecord>& records, double alpha = 0.05);

struct VolumeTrajectory {
  std::string dataset;
  std::string subject;
  std::string region;
  std::string method;
  /// One entry per sequence of the dataset; empty where no volume exists.
  std::vector<std::optional<double>> volumes_ml;
};

struct FriedmanEntry {
  std::string dataset;
  std::string region;
  std::string method;
  /// "volume" or "dice".
  std::string metric;
  std::size_t subjects_used = 0;
  std::size_t subjects_dropped = 0;
  /// Empty when fewer than 2 complete subjects or 2 sequences remain.
  std::optional<TestResult> result;
};

struct RepeatabilityReport {
  std::map<std::string, std::vector<std::string>> sequences;
  std::vector<VolumeTrajectory> trajectories;
  std::vector<FriedmanEntry> friedman;
};

/// Predicted volume per subject across sequences. A prediction of 0 mL counts
/// as missing. Sequences are ordered by `sequence_order` first, then
/// alphabetically.
RepeatabilityReport repeatability_report(const std::vector<EvaluationRecord>& records,
                                         const std::vector<std::string>& sequence_order = {});

}  // namespace abdo
