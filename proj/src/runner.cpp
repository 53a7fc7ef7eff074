#include "subcr/runner.hpp"

#include "subcr/error.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>

namespace subcr {

namespace {

struct Fnv {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void pod(const T& v) {
    bytes(&v, sizeof(T));
  }
};

std::optional<std::int64_t> expected_truncation(const TrainConfig& config, const AttributedGraph& g) {
  const bool dense = config.diffusion == DiffusionMethod::kDense ||
                     (config.diffusion == DiffusionMethod::kAuto && g.num_nodes() <= config.dense_diffusion_limit);
  return dense ? config.diffusion_topk : config.diffusion_topk.value_or(128);
}

}  // namespace

std::string graph_fingerprint(const AttributedGraph& g) {
  Fnv f;
  f.pod(g.num_nodes());
  f.pod(g.num_features());
  for (const auto& [u, v] : g.edge_list()) {
    f.pod(u);
    f.pod(v);
  }
  f.bytes(g.attributes().data(), static_cast<std::size_t>(g.attributes().size()) * sizeof(double));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(f.h));
  return buf;
}

AttributedGraph prepare_graph(const RunConfig& config) {
  const auto& d = config.dataset;
  if (d.edges.empty() || d.attributes.empty()) throw UsageError("dataset edges/attributes paths are not set");
  std::optional<std::filesystem::path> labels;
  if (d.labels && std::filesystem::exists(*d.labels)) labels = d.labels;
  auto g = load_graph(d.edges, d.attributes, labels);
  if (d.binarize) g = binarize_attributes(g);
  if (!g.labels() && config.injection.enabled) {
    const auto plan = InjectionPlan::for_total(config.injection.anomalies, config.train.seed,
                                               config.injection.clique_size, config.injection.candidate_pool);
    g = inject(g, plan).graph;
  }
  return g;
}

std::filesystem::path default_diffusion_cache(const std::filesystem::path& cache_dir, const RunConfig& config,
                                              const AttributedGraph& g) {
  const auto& t = config.train;
  const std::string name = (config.dataset.name.empty() ? std::string("graph") : config.dataset.name) + "-" +
                           graph_fingerprint(g) + "-a" + format_double(t.alpha) + "-" + to_string(t.diffusion) +
                           "-k" + std::to_string(t.diffusion_topk.value_or(0)) + ".bin";
  return cache_dir / name;
}

DiffusionMatrix obtain_diffusion(const TrainConfig& config, const AttributedGraph& g,
                                 const std::optional<std::filesystem::path>& cache, std::string* source) {
  if (cache && std::filesystem::exists(*cache)) {
    auto s = load_diffusion(*cache);
    if (s.size() == g.num_nodes() && s.alpha() == config.alpha && s.truncation() == expected_truncation(config, g)) {
      if (source) *source = "cache:" + cache->string();
      return s;
    }
  }
  auto s = build_diffusion(config, g);
  if (cache) {
    if (cache->has_parent_path()) std::filesystem::create_directories(cache->parent_path());
    save_diffusion(s, *cache);
  }
  if (source) *source = "computed";
  return s;
}

RunOutcome run_pipeline(const TrainConfig& config, const AttributedGraph& g, const DiffusionMatrix* diffusion,
                        const EpochCallback& on_epoch) {
  const auto start = std::chrono::steady_clock::now();
  RunOutcome outcome;
  outcome.training = train(config, g, diffusion, on_epoch);
  outcome.report = infer(outcome.training.params, config, g, diffusion);
  if (g.labels()) outcome.auc = compute_auc(outcome.report.combined, *g.labels());
  outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return outcome;
}

}  // namespace subcr
