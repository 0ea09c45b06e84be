#include "abdo/config.hpp"

#include <toml.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "abdo/error.hpp"

namespace abdo {
namespace {

std::string where(const toml::node& node) {
  std::ostringstream os;
  os << node.source().begin;
  return os.str();
}

double as_double(const toml::node& node, const std::string& key) {
  if (auto v = node.value<double>()) return *v;
  throw InvalidArgument("config key '" + key + "' must be a number (" + where(node) + ")");
}

std::int64_t as_int(const toml::node& node, const std::string& key) {
  if (auto v = node.value_exact<std::int64_t>()) return *v;
  throw InvalidArgument("config key '" + key + "' must be an integer (" + where(node) + ")");
}

const toml::array& as_array(const toml::node& node, const std::string& key, std::size_t size) {
  const auto* arr = node.as_array();
  if (arr == nullptr || (size != 0 && arr->size() != size)) {
    throw InvalidArgument("config key '" + key + "' must be an array" +
                          (size ? " of " + std::to_string(size) + " values" : std::string()) + " (" +
                          where(node) + ")");
  }
  return *arr;
}

Range as_range(const toml::node& node, const std::string& key) {
  const auto& arr = as_array(node, key, 2);
  return {as_double(*arr.get(0), key), as_double(*arr.get(1), key)};
}

template <typename T>
std::vector<T> as_int_list(const toml::node& node, const std::string& key) {
  std::vector<T> out;
  for (const auto& item : as_array(node, key, 0)) {
    const auto v = as_int(item, key);
    if (v < 0) throw InvalidArgument("config key '" + key + "' entries must be non-negative");
    out.push_back(static_cast<T>(v));
  }
  return out;
}

void apply_generation(const toml::table& t, GenerationConfig& c) {
  for (const auto& [k, node] : t) {
    const std::string key(k.str());
    if (key == "gmm_mean_range") c.gmm_mean_range = as_range(node, key);
    else if (key == "gmm_std_range") c.gmm_std_range = as_range(node, key);
    else if (key == "rotation_range") c.rotation_range = as_range(node, key);
    else if (key == "scale_range") c.scale_range = as_range(node, key);
    else if (key == "shear_range") c.shear_range = as_range(node, key);
    else if (key == "translation_range") c.translation_range = as_range(node, key);
    else if (key == "deformation_grid") c.deformation_grid = static_cast<int>(as_int(node, key));
    else if (key == "deformation_std_max") c.deformation_std_max = as_double(node, key);
    else if (key == "bias_grid") c.bias_grid = static_cast<int>(as_int(node, key));
    else if (key == "bias_std_max") c.bias_std_max = as_double(node, key);
    else if (key == "gamma_log_std") c.gamma_log_std = as_double(node, key);
    else if (key == "noise_std_max") c.noise_std_max = as_double(node, key);
    else if (key == "slice_spacing_max") c.slice_spacing_max = as_double(node, key);
    else if (key == "arm_removal_probability") c.arm_removal_probability = as_double(node, key);
    else if (key == "arm_labels") c.arm_labels = as_int_list<Label>(node, key);
    else if (key == "target_spacing") c.target_spacing = as_double(node, key);
    else if (key == "target_shape") {
      const auto& arr = as_array(node, key, 3);
      for (std::size_t i = 0; i < 3; ++i) c.target_shape[i] = as_int(*arr.get(i), key);
    } else {
      throw InvalidArgument("unknown [generation] key '" + key + "' (" + where(node) + ")");
    }
  }
  c.validate();
}

void apply_clustering(const toml::table& t, ClusteringConfig& c) {
  for (const auto& [k, node] : t) {
    const std::string key(k.str());
    if (key == "k_foreground_choices") c.k_foreground_choices = as_int_list<int>(node, key);
    else if (key == "k_background_choices") c.k_background_choices = as_int_list<int>(node, key);
    else if (key == "em_tolerance") c.em_tolerance = as_double(node, key);
    else if (key == "em_max_iters") c.em_max_iters = static_cast<int>(as_int(node, key));
    else if (key == "variance_floor") c.variance_floor = as_double(node, key);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(as_int(node, key));
    else if (key == "max_em_points") c.max_em_points = static_cast<std::size_t>(as_int(node, key));
    else if (key == "background_fit_min") c.background_fit_min = as_double(node, key);
    else throw InvalidArgument("unknown [clustering] key '" + key + "' (" + where(node) + ")");
  }
  c.validate();
}

}  // namespace

PipelineConfig parse_pipeline_config(std::string_view toml_text) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "invalid TOML: " << e.description() << " (" << e.source().begin << ")";
    throw InvalidArgument(os.str());
  }
  PipelineConfig config;
  for (const auto& [k, node] : root) {
    const std::string key(k.str());
    const auto* table = node.as_table();
    if (table == nullptr) throw InvalidArgument("top-level config key '" + key + "' must be a table");
    if (key == "generation") apply_generation(*table, config.generation);
    else if (key == "clustering") apply_clustering(*table, config.clustering);
    else throw InvalidArgument("unknown config table [" + key + "]");
  }
  return config;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_pipeline_config(ss.str());
}

}  // namespace abdo
