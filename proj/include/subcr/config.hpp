#pragma once

#include "subcr/pipeline.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace subcr {

struct DatasetConfig {
  std::string name;
  std::filesystem::path edges;
  std::filesystem::path attributes;
  std::optional<std::filesystem::path> labels;
  /// Replace attribute values by 0/1 presence before training.
  bool binarize = false;
};

struct InjectionConfig {
  /// Inject when the dataset ships without labels.
  bool enabled = true;
  std::int64_t anomalies = 150;
  std::int64_t clique_size = 15;
  std::int64_t candidate_pool = 50;
};

struct SweepGrid {
  std::vector<std::int64_t> subgraph_size;
  std::vector<std::int64_t> embedding_dim;
  std::vector<double> gamma;

  bool empty() const { return subgraph_size.empty() && embedding_dim.empty() && gamma.empty(); }
};

struct RunConfig {
  TrainConfig train;
  DatasetConfig dataset;
  InjectionConfig injection;
  std::filesystem::path out_dir = "runs";
  std::optional<std::filesystem::path> diffusion_cache;
  SweepGrid sweep;

  /// Effective configuration as written into summary.json.
  nlohmann::json to_json() const;
};

/// Parses the TOML schema documented in configs/README.md. Unknown keys are
/// rejected so typos do not silently fall back to defaults.
RunConfig parse_run_config(std::string_view toml_text, const std::string& source_name = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

/// Resolves relative dataset paths against `data_dir`.
void resolve_dataset_paths(RunConfig& config, const std::filesystem::path& data_dir);

}  // namespace subcr
