#include "abdo/clustering.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_map>

#include "abdo/error.hpp"
#include "abdo/nifti.hpp"
#include "abdo/rng.hpp"

namespace abdo {
namespace {

using nlohmann::json;

struct Histogram {
  std::vector<double> values;
  std::vector<double> counts;
  std::size_t total = 0;
};

// Voxel intensities grouped by label, as sorted distinct values with counts.
std::map<Label, Histogram> label_histograms(const ScalarVolume& ct, const LabelMap& labels) {
  std::unordered_map<Label, std::vector<float>> buckets;
  Label last = std::numeric_limits<Label>::max();
  std::vector<float>* bucket = nullptr;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != last || bucket == nullptr) {
      last = labels[i];
      bucket = &buckets[last];
    }
    bucket->push_back(ct[i]);
  }
  std::map<Label, Histogram> out;
  for (auto& [label, v] : buckets) {
    std::sort(v.begin(), v.end());
    Histogram h;
    h.total = v.size();
    for (std::size_t i = 0; i < v.size();) {
      std::size_t j = i;
      while (j < v.size() && v[j] == v[i]) ++j;
      h.values.push_back(v[i]);
      h.counts.push_back(static_cast<double>(j - i));
      i = j;
    }
    out.emplace(label, std::move(h));
    std::vector<float>().swap(v);
  }
  return out;
}

struct LabelFit {
  int requested_k;
  int k;
  GmmModel model;
};

LabelFit fit_label(const Histogram& hist, Label label, int requested_k,
                   const ClusteringConfig& config) {
  LabelFit fit{requested_k, static_cast<int>(std::min<std::size_t>(requested_k, hist.total)), {}};
  std::span<const double> values = hist.values;
  std::span<const double> counts = hist.counts;
  if (label == 0 && config.background_fit_min) {
    const auto first = std::lower_bound(hist.values.begin(), hist.values.end(),
                                        *config.background_fit_min);
    const auto offset = static_cast<std::size_t>(first - hist.values.begin());
    double kept = 0.0;
    for (std::size_t i = offset; i < hist.counts.size(); ++i) kept += hist.counts[i];
    if (kept >= fit.k) {
      values = values.subspan(offset);
      counts = counts.subspan(offset);
    }
  }
  const std::uint64_t seed =
      derive_seed(config.seed, static_cast<std::uint64_t>(label) * 1024u + static_cast<std::uint64_t>(fit.k));
  fit.model = fit_gmm_1d_weighted(values, counts, fit.k, config.em_options(), seed).model;
  return fit;
}

// argmax_k of log π_k + log N(x | μ_k, σ²_k) with per-component constants hoisted.
class Assigner {
 public:
  explicit Assigner(const GmmModel& model) {
    for (const auto& c : model.components) {
      if (!(c.weight > 0.0)) {
        offset_.push_back(-std::numeric_limits<double>::infinity());
      } else {
        offset_.push_back(std::log(c.weight) - 0.5 * std::log(2.0 * std::numbers::pi * c.variance));
      }
      mean_.push_back(c.mean);
      inv2var_.push_back(0.5 / c.variance);
    }
  }
  int operator()(double x) const {
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < mean_.size(); ++c) {
      const double d = x - mean_[c];
      const double score = offset_[c] - inv2var_[c] * d * d;
      if (score > best_score) {
        best_score = score;
        best = static_cast<int>(c);
      }
    }
    return best;
  }

 private:
  std::vector<double> offset_, mean_, inv2var_;
};

const std::vector<int>& choices_for(Label label, const ClusteringConfig& config) {
  return label == 0 ? config.k_background_choices : config.k_foreground_choices;
}

void check_same_grid(const ScalarVolume& ct, const LabelMap& labels) {
  if (!same_grid(ct.geometry(), labels.geometry())) {
    throw GeometryMismatch("CT and label map do not share a geometry");
  }
}

json component_json(Label id, const GmmComponent& c) {
  return json{{"id", id}, {"mean", c.mean}, {"variance", c.variance}, {"weight", c.weight}};
}

json config_json(const ClusteringConfig& c) {
  json j{{"k_foreground_choices", c.k_foreground_choices},
         {"k_background_choices", c.k_background_choices},
         {"em_tolerance", c.em_tolerance},
         {"em_max_iters", c.em_max_iters},
         {"variance_floor", c.variance_floor},
         {"seed", c.seed},
         {"max_em_points", c.max_em_points}};
  if (c.background_fit_min) j["background_fit_min"] = *c.background_fit_min;
  return j;
}

ClusteringConfig config_from_json(const json& j) {
  ClusteringConfig c;
  c.k_foreground_choices = j.at("k_foreground_choices").get<std::vector<int>>();
  c.k_background_choices = j.at("k_background_choices").get<std::vector<int>>();
  c.em_tolerance = j.at("em_tolerance").get<double>();
  c.em_max_iters = j.at("em_max_iters").get<int>();
  c.variance_floor = j.at("variance_floor").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.max_em_points = j.at("max_em_points").get<std::size_t>();
  if (j.contains("background_fit_min")) c.background_fit_min = j.at("background_fit_min").get<double>();
  return c;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

void ClusteringConfig::validate() const {
  auto check_set = [](const std::vector<int>& s, const char* name) {
    if (s.empty()) throw InvalidArgument(std::string(name) + " must not be empty");
    std::set<int> seen;
    for (int k : s) {
      if (k < 1) throw InvalidArgument(std::string(name) + " entries must be >= 1");
      if (!seen.insert(k).second) throw InvalidArgument(std::string(name) + " has duplicates");
    }
  };
  check_set(k_foreground_choices, "k_foreground_choices");
  check_set(k_background_choices, "k_background_choices");
  if (!(em_tolerance > 0.0)) throw InvalidArgument("em_tolerance must be > 0");
  if (em_max_iters < 1) throw InvalidArgument("em_max_iters must be >= 1");
  if (!(variance_floor > 0.0)) throw InvalidArgument("variance_floor must be > 0");
}

EmOptions ClusteringConfig::em_options() const {
  EmOptions o;
  o.tolerance = em_tolerance;
  o.max_iterations = em_max_iters;
  o.variance_floor = variance_floor;
  o.max_points = max_em_points;
  return o;
}

std::size_t ClusterTable::fine_label_count() const {
  std::size_t n = 0;
  for (const auto& [label, p] : parents) n += p.fine.size();
  return n;
}

std::optional<Label> ClusterTable::parent_of(Label fine_id) const {
  for (const auto& [label, p] : parents) {
    for (const auto& f : p.fine) {
      if (f.id == fine_id) return label;
    }
  }
  return std::nullopt;
}

ClusteredLabels cluster_labelmap(const ScalarVolume& ct, const LabelMap& labels,
                                 const ClusteringConfig& config, std::uint64_t rng_seed) {
  config.validate();
  check_same_grid(ct, labels);
  const auto histograms = label_histograms(ct, labels);

  Rng rng(rng_seed);
  ClusteredLabels out{LabelMap(labels.geometry(), Label{0}), {}};
  struct Slot {
    Assigner assign;
    Label base;
  };
  std::unordered_map<Label, Slot> slots;
  Label next_id = 1;
  for (const auto& [label, hist] : histograms) {
    const auto& choices = choices_for(label, config);
    const int requested = choices[rng.index(choices.size())];
    LabelFit fit = fit_label(hist, label, requested, config);
    ParentClusters parent{fit.requested_k, fit.k, hist.total, {}};
    for (const auto& comp : fit.model.components) {
      parent.fine.push_back({next_id + static_cast<Label>(parent.fine.size()), comp});
    }
    slots.emplace(label, Slot{Assigner(fit.model), next_id});
    next_id += static_cast<Label>(fit.k);
    out.table.parents.emplace(label, std::move(parent));
  }

  const Slot* slot = nullptr;
  Label last = std::numeric_limits<Label>::max();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != last || slot == nullptr) {
      last = labels[i];
      slot = &slots.at(last);
    }
    out.fine[i] = slot->base + static_cast<Label>(slot->assign(ct[i]));
  }
  return out;
}

ClusterCache precompute_clusters(const ScalarVolume& ct, const LabelMap& labels,
                                 const ClusteringConfig& config) {
  config.validate();
  check_same_grid(ct, labels);
  const auto histograms = label_histograms(ct, labels);

  ClusterCache cache;
  cache.config = config;
  cache.codes = LabelMap(labels.geometry(), Label{0});
  std::unordered_map<Label, std::size_t> entry_of;
  std::vector<std::vector<Assigner>> assigners;
  for (const auto& [label, hist] : histograms) {
    ClusterCache::Entry e;
    e.label = label;
    e.voxel_count = hist.total;
    std::uint64_t stride = 1;
    std::vector<Assigner> per_choice;
    for (int requested : choices_for(label, config)) {
      LabelFit fit = fit_label(hist, label, requested, config);
      e.requested_k.push_back(fit.requested_k);
      e.effective_k.push_back(fit.k);
      e.strides.push_back(static_cast<std::uint32_t>(stride));
      per_choice.emplace_back(fit.model);
      e.models.push_back(std::move(fit.model));
      stride *= static_cast<std::uint64_t>(e.effective_k.back());
      if (stride > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidArgument("cluster choice sets too large to pack into 32-bit codes");
      }
    }
    entry_of.emplace(label, cache.entries.size());
    cache.entries.push_back(std::move(e));
    assigners.push_back(std::move(per_choice));
  }

  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t e = entry_of.at(labels[i]);
    const auto& entry = cache.entries[e];
    Label code = 0;
    for (std::size_t c = 0; c < entry.models.size(); ++c) {
      code += static_cast<Label>(assigners[e][c](ct[i])) * entry.strides[c];
    }
    cache.codes[i] = code;
  }
  return cache;
}

ClusteredLabels ClusterCache::draw(const LabelMap& labels, std::uint64_t rng_seed) const {
  if (!same_grid(labels.geometry(), codes.geometry())) {
    throw GeometryMismatch("label map does not match the cluster cache grid");
  }
  Rng rng(rng_seed);
  ClusteredLabels out{LabelMap(labels.geometry(), Label{0}), {}};
  struct Slot {
    std::uint32_t stride;
    std::uint32_t k;
    Label base;
  };
  std::unordered_map<Label, Slot> slots;
  Label next_id = 1;
  for (const auto& e : entries) {
    const auto& choices = choices_for(e.label, config);
    const std::size_t ci = rng.index(choices.size());
    const auto& model = e.models.at(ci);
    ParentClusters parent{e.requested_k.at(ci), e.effective_k.at(ci), e.voxel_count, {}};
    for (const auto& comp : model.components) {
      parent.fine.push_back({next_id + static_cast<Label>(parent.fine.size()), comp});
    }
    slots.emplace(e.label, Slot{e.strides.at(ci), static_cast<std::uint32_t>(e.effective_k.at(ci)),
                                next_id});
    next_id += static_cast<Label>(e.effective_k.at(ci));
    out.table.parents.emplace(e.label, std::move(parent));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = slots.find(labels[i]);
    if (it == slots.end()) {
      throw InvalidArgument("label " + std::to_string(labels[i]) + " is not in the cluster cache");
    }
    const Slot& s = it->second;
    out.fine[i] = s.base + (codes[i] / s.stride) % s.k;
  }
  return out;
}

std::string cluster_table_to_json(const ClusterTable& table) {
  json labels = json::array();
  for (const auto& [label, p] : table.parents) {
    json fine = json::array();
    for (const auto& f : p.fine) fine.push_back(component_json(f.id, f.component));
    labels.push_back(json{{"label", label},
                          {"requested_k", p.requested_k},
                          {"k", p.k},
                          {"voxel_count", p.voxel_count},
                          {"fine", std::move(fine)}});
  }
  return json{{"labels", std::move(labels)}}.dump(2);
}

ClusterTable cluster_table_from_json(std::string_view text) {
  ClusterTable table;
  try {
    const json j = json::parse(text);
    for (const auto& entry : j.at("labels")) {
      ParentClusters p;
      p.requested_k = entry.at("requested_k").get<int>();
      p.k = entry.at("k").get<int>();
      p.voxel_count = entry.at("voxel_count").get<std::size_t>();
      for (const auto& f : entry.at("fine")) {
        p.fine.push_back({f.at("id").get<Label>(),
                          {f.at("mean").get<double>(), f.at("variance").get<double>(),
                           f.at("weight").get<double>()}});
      }
      table.parents.emplace(entry.at("label").get<Label>(), std::move(p));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("cluster table JSON: ") + e.what(), 0);
  }
  return table;
}

void save_cluster_cache(const ClusterCache& cache, const std::filesystem::path& stem) {
  json entries = json::array();
  for (const auto& e : cache.entries) {
    json choices = json::array();
    for (std::size_t c = 0; c < e.models.size(); ++c) {
      json comps = json::array();
      for (const auto& comp : e.models[c].components) {
        comps.push_back(json{{"mean", comp.mean}, {"variance", comp.variance}, {"weight", comp.weight}});
      }
      choices.push_back(json{{"requested_k", e.requested_k[c]},
                             {"k", e.effective_k[c]},
                             {"stride", e.strides[c]},
                             {"components", std::move(comps)}});
    }
    entries.push_back(json{{"label", e.label}, {"voxel_count", e.voxel_count}, {"choices", std::move(choices)}});
  }
  std::filesystem::path codes_path = stem;
  codes_path += "_codes.nii.gz";
  const json j{{"config", config_json(cache.config)},
               {"codes", codes_path.filename().string()},
               {"entries", std::move(entries)}};
  std::filesystem::path json_path = stem;
  json_path += ".json";
  std::ofstream os(json_path);
  if (!os) throw IoError("cannot write " + json_path.string());
  os << j.dump(2) << '\n';
  if (!os) throw IoError("cannot write " + json_path.string());
  write_nifti(cache.codes, codes_path);
}

ClusterCache load_cluster_cache(const std::filesystem::path& stem) {
  std::filesystem::path json_path = stem;
  json_path += ".json";
  ClusterCache cache;
  std::string codes_name;
  try {
    const json j = json::parse(read_text(json_path));
    cache.config = config_from_json(j.at("config"));
    codes_name = j.at("codes").get<std::string>();
    for (const auto& je : j.at("entries")) {
      ClusterCache::Entry e;
      e.label = je.at("label").get<Label>();
      e.voxel_count = je.at("voxel_count").get<std::size_t>();
      for (const auto& jc : je.at("choices")) {
        e.requested_k.push_back(jc.at("requested_k").get<int>());
        e.effective_k.push_back(jc.at("k").get<int>());
        e.strides.push_back(jc.at("stride").get<std::uint32_t>());
        GmmModel m;
        for (const auto& comp : jc.at("components")) {
          m.components.push_back({comp.at("mean").get<double>(), comp.at("variance").get<double>(),
                                  comp.at("weight").get<double>()});
        }
        e.models.push_back(std::move(m));
      }
      cache.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ParseError(json_path.string() + ": " + e.what(), 0);
  }
  cache.codes = read_label_nifti(json_path.parent_path() / codes_name);
  return cache;
}

}  // namespace abdo
