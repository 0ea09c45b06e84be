#include "abdo/bench.hpp"

#include <toml.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "abdo/csv.hpp"
#include "abdo/error.hpp"
#include "abdo/nifti.hpp"
#include "abdo/resample.hpp"

namespace abdo {
namespace {

LabelMapping parse_side(const toml::table& root, const std::string& side,
                        const std::vector<std::string>& regions) {
  const auto* table = root[side].as_table();
  if (table == nullptr) throw InvalidArgument("region map lacks a [" + side + "] table");
  LabelMapping mapping;
  for (const auto& [k, node] : *table) {
    const std::string name(k.str());
    const auto it = std::find(regions.begin(), regions.end(), name);
    if (it == regions.end()) {
      throw InvalidArgument("region map [" + side + "] names unknown region '" + name + "'");
    }
    const auto canonical = static_cast<Label>(it - regions.begin() + 1);
    const auto* ids = node.as_array();
    if (ids == nullptr || ids->empty()) {
      throw InvalidArgument("region map [" + side + "]." + name + " must be a non-empty array");
    }
    for (const auto& id : *ids) {
      const auto v = id.value_exact<std::int64_t>();
      if (!v || *v < 1) {
        throw InvalidArgument("region map [" + side + "]." + name + " ids must be positive integers");
      }
      if (!mapping.emplace(static_cast<Label>(*v), canonical).second) {
        throw InvalidArgument("region map [" + side + "] maps label " + std::to_string(*v) +
                              " twice");
      }
    }
  }
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const bool covered = std::any_of(mapping.begin(), mapping.end(),
                                     [&](const auto& kv) { return kv.second == r + 1; });
    if (!covered) throw InvalidArgument("region map [" + side + "] does not cover '" + regions[r] + "'");
  }
  return mapping;
}

std::vector<std::size_t> count_labels(const LabelMap& labels, std::size_t regions) {
  std::vector<std::size_t> counts(regions + 1, 0);
  for (Label v : labels.data()) {
    if (v <= regions) ++counts[v];
  }
  return counts;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::optional<double> sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

using PairKey = std::pair<std::string, std::string>;  // (subject, sequence)

std::map<PairKey, double> values_by_pair(const std::vector<const EvaluationRecord*>& rows,
                                         SummaryMetric metric) {
  std::map<PairKey, double> out;
  for (const auto* r : rows) {
    const auto& v = metric == SummaryMetric::kDice ? r->dice : r->hd95_mm;
    if (v) out[{r->key.subject, r->key.sequence}] = *v;
  }
  return out;
}

}  // namespace

RegionMap parse_region_map(std::string_view toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "invalid region map: " << e.description() << " (" << e.source().begin << ")";
    throw InvalidArgument(os.str());
  }
  for (const auto& [k, node] : root) {
    const std::string key(k.str());
    if (key != "regions" && key != "gt" && key != "pred") {
      throw InvalidArgument("unknown region map key '" + key + "'");
    }
  }
  RegionMap map;
  const auto* regions = root["regions"].as_array();
  if (regions == nullptr || regions->empty()) {
    throw InvalidArgument("region map needs a non-empty 'regions' array");
  }
  for (const auto& r : *regions) {
    const auto name = r.value<std::string>();
    if (!name || name->empty()) throw InvalidArgument("region names must be non-empty strings");
    if (std::find(map.regions.begin(), map.regions.end(), *name) != map.regions.end()) {
      throw InvalidArgument("duplicate region '" + *name + "'");
    }
    map.regions.push_back(*name);
  }
  map.gt = parse_side(root, "gt", map.regions);
  map.pred = parse_side(root, "pred", map.regions);
  return map;
}

RegionMap load_region_map(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open region map " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  try {
    return parse_region_map(ss.str());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

EvaluationPlan load_manifest(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  static constexpr const char* kColumns[] = {"dataset", "subject", "sequence", "method",
                                             "region_map", "gt", "pred"};
  std::size_t col[7];
  for (std::size_t i = 0; i < 7; ++i) {
    try {
      col[i] = table.column(kColumns[i]);
    } catch (const ParseError&) {
      throw InvalidArgument(path.string() + ": missing column '" + kColumns[i] + "'");
    }
  }
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : (base / fp).lexically_normal();
  };

  EvaluationPlan plan;
  std::map<CaseKey, std::size_t> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const CsvRow& row = table.rows[r];
    const std::size_t line = table.lines[r];
    const std::string where = path.string() + " line " + std::to_string(line);
    EvaluationCase c;
    c.key = {row[col[0]], row[col[1]], row[col[2]], row[col[3]]};
    c.line = line;
    for (std::size_t i = 0; i < 7; ++i) {
      if (row[col[i]].empty()) throw InvalidArgument(where + ": empty '" + kColumns[i] + "'");
    }
    if (const auto [it, fresh] = seen.emplace(c.key, line); !fresh) {
      throw InvalidArgument(where + ": duplicate case (first seen on line " +
                            std::to_string(it->second) + ")");
    }
    c.region_map = resolve(row[col[4]]);
    c.gt = resolve(row[col[5]]);
    c.pred = resolve(row[col[6]]);
    if (!plan.region_maps.count(c.region_map)) {
      try {
        plan.region_maps.emplace(c.region_map, load_region_map(c.region_map));
      } catch (const Error& e) {
        throw InvalidArgument(where + ": " + e.what());
      }
    }
    plan.cases.push_back(std::move(c));
  }
  return plan;
}

LabelMap harmonize_labels(const LabelMap& labels, const LabelMapping& mapping) {
  LabelMap out(labels.geometry(), Label{0});
  Label cached_src = 0, cached_dst = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Label v = labels[i];
    if (v == 0) continue;
    if (v != cached_src) {
      const auto it = mapping.find(v);
      cached_src = v;
      cached_dst = it == mapping.end() ? 0 : it->second;
    }
    out[i] = cached_dst;
  }
  return out;
}

std::vector<EvaluationRecord> evaluate_case(const LabelMap& gt, const LabelMap& pred,
                                            const std::vector<std::string>& regions,
                                            const CaseKey& key, Hd95Mode mode) {
  if (!gt.geometry().invertible()) throw GeometryMismatch("ground-truth affine is not invertible");
  const LabelMap aligned = same_grid(gt.geometry(), pred.geometry())
                               ? pred
                               : resample(pred, gt.geometry(), Interpolation::kNearest);
  const Spacing& spacing = gt.spacing();
  const double voxel_ml = spacing[0] * spacing[1] * spacing[2] / 1000.0;
  const auto gt_counts = count_labels(gt, regions.size());
  const auto pred_counts = count_labels(aligned, regions.size());

  std::vector<EvaluationRecord> out;
  out.reserve(regions.size());
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const auto id = static_cast<Label>(r + 1);
    EvaluationRecord rec;
    rec.key = key;
    rec.region = regions[r];
    rec.gt_volume_ml = static_cast<double>(gt_counts[id]) * voxel_ml;
    rec.pred_volume_ml = static_cast<double>(pred_counts[id]) * voxel_ml;
    if (gt_counts[id] > 0 && pred_counts[id] > 0) {
      const BinaryMask a = region_mask(gt, id);
      const BinaryMask b = region_mask(aligned, id);
      rec.dice = dice(a, b);
      rec.hd95_mm = hd95(a, b, spacing, mode);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void sort_records(std::vector<EvaluationRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.key, a.region) < std::tie(b.key, b.region);
  });
}

std::vector<EvaluationRecord> evaluate_plan(const EvaluationPlan& plan,
                                            const EvaluateOptions& options) {
  const std::size_t n = plan.cases.size();
  std::vector<std::vector<EvaluationRecord>> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto log = [&](const std::string& msg) {
    if (!options.log) return;
    std::lock_guard lock(log_mutex);
    options.log(msg);
  };

  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const EvaluationCase& c = plan.cases[i];
      try {
        const RegionMap& map = plan.region_maps.at(c.region_map);
        const LabelMap gt = harmonize_labels(read_label_nifti(c.gt), map.gt);
        const LabelMap pred = harmonize_labels(read_label_nifti(c.pred), map.pred);
        if (!same_grid(gt.geometry(), pred.geometry())) {
          log("line " + std::to_string(c.line) + ": resampling " + c.pred.string() +
              " onto the ground-truth grid");
        }
        results[i] = evaluate_case(gt, pred, map.regions, c.key, options.hd95_mode);
      } catch (...) {
        errors[i] = std::current_exception();
        next = n;
      }
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, std::max<std::size_t>(n, 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw Error("manifest line " + std::to_string(plan.cases[i].line) + ": " + e.what());
    }
  }
  std::vector<EvaluationRecord> records;
  for (auto& r : results) {
    records.insert(records.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
  }
  sort_records(records);
  return records;
}

std::string_view metric_name(SummaryMetric metric) noexcept {
  return metric == SummaryMetric::kDice ? "dice" : "hd95_mm";
}

SummaryTable summarize(const std::vector<EvaluationRecord>& records, double alpha) {
  // (dataset, region) → method → rows
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::vector<const EvaluationRecord*>>>
      groups;
  for (const auto& r : records) groups[{r.key.dataset, r.region}][r.key.method].push_back(&r);

  SummaryTable table;
  for (const auto& [group, methods] : groups) {
    if (methods.size() >= 2) table.has_significance = true;
    for (SummaryMetric metric : {SummaryMetric::kDice, SummaryMetric::kHd95}) {
      const std::size_t first = table.cells.size();
      std::vector<std::map<PairKey, double>> paired;
      for (const auto& [method, rows] : methods) {
        SummaryCell cell;
        cell.dataset = group.first;
        cell.region = group.second;
        cell.method = method;
        cell.metric = metric;
        std::vector<double> values;
        for (const auto* r : rows) {
          const auto& v = metric == SummaryMetric::kDice ? r->dice : r->hd95_mm;
          if (v) values.push_back(*v);
        }
        cell.n = values.size();
        cell.n_missing = rows.size() - values.size();
        if (!values.empty()) {
          cell.mean = mean_of(values);
          cell.stddev = sample_std(values, *cell.mean);
        }
        table.cells.push_back(std::move(cell));
        paired.push_back(values_by_pair(rows, metric));
      }

      std::optional<double> best;
      for (std::size_t i = first; i < table.cells.size(); ++i) {
        const auto& m = table.cells[i].mean;
        if (!m) continue;
        if (!best || (metric == SummaryMetric::kDice ? *m > *best : *m < *best)) best = *m;
      }
      if (!best) continue;
      for (std::size_t i = first; i < table.cells.size(); ++i) {
        SummaryCell& cell = table.cells[i];
        if (!cell.mean || *cell.mean != *best) continue;
        cell.best = true;
        if (methods.size() < 2) continue;
        std::vector<double> p_values;
        const auto& mine = paired[i - first];
        for (std::size_t j = 0; j < paired.size(); ++j) {
          if (j == i - first) continue;
          std::vector<double> x, y;
          for (const auto& [k, v] : mine) {
            if (const auto it = paired[j].find(k); it != paired[j].end()) {
              x.push_back(v);
              y.push_back(it->second);
            }
          }
          p_values.push_back(x.empty() ? 1.0 : wilcoxon_signed_rank(x, y).p_value);
        }
        const auto decisions = bonferroni(p_values, alpha);
        cell.significant = std::all_of(decisions.begin(), decisions.end(),
                                       [](const auto& d) { return d.significant; });
      }
    }
  }
  return table;
}

RepeatabilityReport repeatability_report(const std::vector<EvaluationRecord>& records,
                                         const std::vector<std::string>& sequence_order) {
  RepeatabilityReport report;
  std::map<std::string, std::set<std::string>> present;
  for (const auto& r : records) present[r.key.dataset].insert(r.key.sequence);
  for (const auto& [dataset, seqs] : present) {
    std::vector<std::string> ordered;
    for (const auto& s : sequence_order) {
      if (seqs.count(s) && std::find(ordered.begin(), ordered.end(), s) == ordered.end()) {
        ordered.push_back(s);
      }
    }
    for (const auto& s : seqs) {
      if (std::find(ordered.begin(), ordered.end(), s) == ordered.end()) ordered.push_back(s);
    }
    report.sequences[dataset] = std::move(ordered);
  }

  // (dataset, region, method) → subject → per-sequence (volume, dice)
  using Cells = std::vector<std::pair<std::optional<double>, std::optional<double>>>;
  std::map<std::tuple<std::string, std::string, std::string>, std::map<std::string, Cells>> grid;
  for (const auto& r : records) {
    const auto& seqs = report.sequences[r.key.dataset];
    const auto pos = static_cast<std::size_t>(std::find(seqs.begin(), seqs.end(), r.key.sequence) - seqs.begin());
    Cells& cells = grid[{r.key.dataset, r.region, r.key.method}][r.key.subject];
    cells.resize(seqs.size());
    if (r.pred_volume_ml > 0.0) cells[pos].first = r.pred_volume_ml;
    cells[pos].second = r.dice;
  }

  for (const auto& [key, subjects] : grid) {
    const auto& [dataset, region, method] = key;
    const std::size_t k = report.sequences[dataset].size();
    for (const auto& [subject, cells] : subjects) {
      VolumeTrajectory t{dataset, subject, region, method, {}};
      for (const auto& c : cells) t.volumes_ml.push_back(c.first);
      report.trajectories.push_back(std::move(t));
    }
    for (const bool volume : {true, false}) {
      FriedmanEntry entry{dataset, region, method, volume ? "volume" : "dice", 0, 0, std::nullopt};
      std::vector<std::vector<double>> scores;
      for (const auto& [subject, cells] : subjects) {
        std::vector<double> row;
        for (const auto& c : cells) {
          const auto& v = volume ? c.first : c.second;
          if (v) row.push_back(*v);
        }
        if (row.size() == k) {
          scores.push_back(std::move(row));
        } else {
          ++entry.subjects_dropped;
        }
      }
      entry.subjects_used = scores.size();
      if (scores.size() >= 2 && k >= 2) entry.result = friedman(scores);
      report.friedman.push_back(std::move(entry));
    }
  }
  return report;
}

}  // namespace abdo
