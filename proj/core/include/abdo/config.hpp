#pragma once

#include <filesystem>
#include <string_view>

#include "abdo/clustering.hpp"
#include "abdo/synth.hpp"

namespace abdo {

/// Settings read from a TOML file with optional `[generation]` and
/// `[clustering]` tables. Keys left out keep their defaults; unknown keys
/// are rejected.
struct PipelineConfig {
  GenerationConfig generation;
  ClusteringConfig clustering;
};

PipelineConfig parse_pipeline_config(std::string_view toml_text);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

}  // namespace abdo
