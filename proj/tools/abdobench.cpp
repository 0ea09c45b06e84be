// abdobench: synthetic training data generation and segmentation evaluation.

#include <CLI11.hpp>
#include <json.hpp>

#include <abdo/bench.hpp>
#include <abdo/clustering.hpp>
#include <abdo/config.hpp>
#include <abdo/error.hpp>
#include <abdo/nifti.hpp>
#include <abdo/report.hpp>
#include <abdo/rng.hpp>
#include <abdo/synth.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Subject {
  std::string stem;
  fs::path labels;
};

std::string nifti_stem(const fs::path& p) {
  std::string name = p.filename().string();
  for (const char* ext : {".nii.gz", ".nii"}) {
    const std::string e(ext);
    if (name.size() > e.size() && name.compare(name.size() - e.size(), e.size(), e) == 0) {
      return name.substr(0, name.size() - e.size());
    }
  }
  return {};
}

std::vector<Subject> list_subjects(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw abdo::IoError("not a directory: " + dir.string());
  std::vector<Subject> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string stem = nifti_stem(entry.path());
    if (!stem.empty()) out.push_back({stem, entry.path()});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.stem < b.stem; });
  if (out.empty()) throw abdo::InvalidArgument("no .nii or .nii.gz files in " + dir.string());
  return out;
}

fs::path find_volume(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".nii.gz", ".nii"}) {
    const fs::path p = dir / (stem + ext);
    if (fs::exists(p)) return p;
  }
  throw abdo::IoError("no image named " + stem + ".nii[.gz] in " + dir.string());
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

abdo::PipelineConfig load_config(const std::string& path) {
  return path.empty() ? abdo::PipelineConfig{} : abdo::load_pipeline_config(path);
}

void log_line(const std::string& msg) { std::cerr << msg << '\n'; }

int run_cluster(const fs::path& labels_dir, const fs::path& ct_dir, const fs::path& out_dir,
                const std::string& config_path) {
  const auto config = load_config(config_path);
  fs::create_directories(out_dir);
  for (const auto& s : list_subjects(labels_dir)) {
    const auto t0 = std::chrono::steady_clock::now();
    const abdo::LabelMap labels = abdo::read_label_nifti(s.labels);
    const abdo::ScalarVolume ct = abdo::read_scalar_nifti(find_volume(ct_dir, s.stem));
    const abdo::ClusterCache cache = abdo::precompute_clusters(ct, labels, config.clustering);
    abdo::save_cluster_cache(cache, out_dir / s.stem);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "%s: %zu labels clustered in %.1f s\n", s.stem.c_str(), cache.entries.size(), secs);
  }
  return 0;
}

int run_generate(const fs::path& labels_dir, const std::string& ct_dir, const std::string& cache_dir,
                 const std::string& config_path, std::uint64_t seed, std::size_t count,
                 std::size_t start, const fs::path& out_dir) {
  if (!ct_dir.empty() && !cache_dir.empty()) {
    throw abdo::InvalidArgument("--ct-dir and --cluster-cache are mutually exclusive");
  }
  const auto config = load_config(config_path);
  const auto subjects = list_subjects(labels_dir);
  fs::create_directories(out_dir);

  std::optional<std::string> loaded_stem;
  abdo::LabelMap labels;
  abdo::ScalarVolume ct;
  abdo::ClusterCache cache;
  for (std::size_t i = start; i < start + count; ++i) {
    const Subject& s = subjects[i % subjects.size()];
    if (loaded_stem != s.stem) {
      labels = abdo::read_label_nifti(s.labels);
      if (!ct_dir.empty()) ct = abdo::read_scalar_nifti(find_volume(ct_dir, s.stem));
      if (!cache_dir.empty()) cache = abdo::load_cluster_cache(fs::path(cache_dir) / s.stem);
      loaded_stem = s.stem;
    }
    abdo::ClusterSource source;
    source.clustering = config.clustering;
    if (!ct_dir.empty()) source.ct = &ct;
    if (!cache_dir.empty()) source.cache = &cache;

    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t pair_seed = abdo::derive_seed(seed, i);
    const abdo::TrainingPair pair = abdo::generate_training_pair(labels, source, config.generation, pair_seed);

    char prefix[32];
    std::snprintf(prefix, sizeof prefix, "pair_%06zu", i);
    abdo::write_nifti(pair.image, out_dir / (std::string(prefix) + "_img.nii.gz"));
    abdo::write_nifti(pair.target, out_dir / (std::string(prefix) + "_seg.nii.gz"));
    nlohmann::ordered_json meta;
    meta["index"] = i;
    meta["subject"] = s.stem;
    meta["master_seed"] = seed;
    meta["params"] = nlohmann::json::parse(pair.params.to_json());
    abdo::write_text_file(out_dir / (std::string(prefix) + "_params.json"), meta.dump(2) + "\n");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "%s from %s in %.1f s\n", prefix, s.stem.c_str(), secs);
  }
  return 0;
}

abdo::SummaryTable summarize_and_log(const std::vector<abdo::EvaluationRecord>& records, double alpha) {
  abdo::SummaryTable summary = abdo::summarize(records, alpha);
  std::fprintf(stderr, "%zu records, %zu summary rows\n", records.size(), summary.cells.size());
  return summary;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic MRI training data generation and abdominal segmentation benchmarking"};
  app.require_subcommand(1);

  std::string labels_dir, ct_dir, cache_dir, config_path, out_dir, manifest, records, out, order;
  std::string hd95_mode = "max";
  std::uint64_t seed = 0;
  std::size_t count = 1, start = 0, workers = 1;
  double alpha = 0.05;

  auto* cluster = app.add_subcommand("cluster", "Fit per-label intensity mixtures and cache them");
  cluster->add_option("--labels-dir", labels_dir, "Directory of label maps")->required();
  cluster->add_option("--ct-dir", ct_dir, "Directory of CT images named like the label maps")->required();
  cluster->add_option("--out-dir", out_dir, "Cache directory")->required();
  cluster->add_option("--config", config_path, "TOML config");

  auto* generate = app.add_subcommand("generate", "Generate synthetic image/label pairs");
  generate->add_option("--labels-dir", labels_dir, "Directory of label maps")->required();
  generate->add_option("--ct-dir", ct_dir, "CT images for on-the-fly clustering");
  generate->add_option("--cluster-cache", cache_dir, "Directory written by `cluster`");
  generate->add_option("--config", config_path, "TOML config");
  generate->add_option("--seed", seed, "Master seed");
  generate->add_option("--count", count, "Number of pairs")->check(CLI::PositiveNumber);
  generate->add_option("--start-index", start, "Index of the first pair");
  generate->add_option("--out-dir", out_dir, "Output directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate predictions listed in a manifest");
  evaluate->add_option("--manifest", manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out-dir", out_dir, "Report directory")->required();
  evaluate->add_option("--workers", workers, "Parallel cases")->check(CLI::PositiveNumber);
  evaluate->add_option("--alpha", alpha, "Significance level");
  evaluate->add_option("--hd95-mode", hd95_mode, "max (of directed) or pooled")
      ->check(CLI::IsMember({"max", "pooled"}));
  evaluate->add_option("--sequence-order", order, "Comma-separated sequence order for repeatability");

  auto* stats = app.add_subcommand("stats", "Summary table from records.csv");
  stats->add_option("--records", records, "records.csv")->required()->check(CLI::ExistingFile);
  stats->add_option("--out", out, "summary.csv")->required();
  stats->add_option("--alpha", alpha, "Significance level");

  auto* report = app.add_subcommand("report", "All reports from records.csv");
  report->add_option("--records", records, "records.csv")->required()->check(CLI::ExistingFile);
  report->add_option("--out-dir", out_dir, "Report directory")->required();
  report->add_option("--alpha", alpha, "Significance level");
  report->add_option("--sequence-order", order, "Comma-separated sequence order for repeatability");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cluster) return run_cluster(labels_dir, ct_dir, out_dir, config_path);
    if (*generate) return run_generate(labels_dir, ct_dir, cache_dir, config_path, seed, count, start, out_dir);
    if (*evaluate) {
      const abdo::EvaluationPlan plan = abdo::load_manifest(manifest);
      abdo::EvaluateOptions options;
      options.workers = workers;
      options.hd95_mode = hd95_mode == "pooled" ? abdo::Hd95Mode::kPooled : abdo::Hd95Mode::kMaxOfDirected;
      options.log = log_line;
      const auto recs = abdo::evaluate_plan(plan, options);
      const auto summary = summarize_and_log(recs, alpha);
      const auto repeat = abdo::repeatability_report(recs, split_list(order));
      for (const auto& p : abdo::emit_reports(recs, summary, repeat, out_dir)) log_line("wrote " + p.string());
      return 0;
    }
    if (*stats) {
      const auto recs = abdo::read_records_csv(records);
      abdo::write_text_file(out, abdo::summary_to_csv(summarize_and_log(recs, alpha)));
      return 0;
    }
    if (*report) {
      const auto recs = abdo::read_records_csv(records);
      const auto summary = summarize_and_log(recs, alpha);
      const auto repeat = abdo::repeatability_report(recs, split_list(order));
      for (const auto& p : abdo::emit_reports(recs, summary, repeat, out_dir)) log_line("wrote " + p.string());
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
