#pragma once

#include "subcr/config.hpp"
#include "subcr/eval.hpp"
#include "subcr/injector.hpp"

#include <functional>
#include <optional>
#include <string>

namespace subcr {

/// Loads the dataset, applies optional binarization and, when the files carry
/// no labels and injection is enabled, injects anomalies seeded by the run seed.
AttributedGraph prepare_graph(const RunConfig& config);

/// Default cache file for a graph/config pair inside `cache_dir`.
std::filesystem::path default_diffusion_cache(const std::filesystem::path& cache_dir, const RunConfig& config,
                                              const AttributedGraph& g);

/// Reads the diffusion cache when it matches (N, alpha, truncation), otherwise
/// computes the diffusion and writes the cache. `source` reports which happened.
DiffusionMatrix obtain_diffusion(const TrainConfig& config, const AttributedGraph& g,
                                 const std::optional<std::filesystem::path>& cache, std::string* source = nullptr);

struct RunOutcome {
  TrainResult training;
  ScoreReport report;
  std::optional<double> auc;
  double seconds = 0.0;
};

/// Train, infer and (when labels exist) compute AUC.
RunOutcome run_pipeline(const TrainConfig& config, const AttributedGraph& g, const DiffusionMatrix* diffusion,
                        const EpochCallback& on_epoch = {});

/// FNV-1a 64 over the graph structure and attributes.
std::string graph_fingerprint(const AttributedGraph& g);

}  // namespace subcr
