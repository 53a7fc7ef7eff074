#include "subcr/config.hpp"

#include "subcr/error.hpp"

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace subcr {

namespace {

using Keys = std::set<std::string>;

void reject_unknown(const toml::table& table, const Keys& allowed, const std::string& section) {
  for (const auto& [key, value] : table) {
    if (!allowed.count(std::string(key.str()))) {
      throw ConfigError("unknown key '" + std::string(key.str()) + "' in [" + section + "]");
    }
  }
}

const toml::table* section(const toml::table& root, const char* name) {
  const auto* node = root.get(name);
  if (!node) return nullptr;
  if (!node->is_table()) throw ConfigError(std::string("[") + name + "] must be a table");
  return node->as_table();
}

template <typename T>
void read(const toml::table& t, const char* key, T& out) {
  const auto* node = t.get(key);
  if (!node) return;
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = node->value<double>()) {
      out = *v;
      return;
    }
  } else if constexpr (std::is_same_v<T, bool>) {
    if (auto v = node->value<bool>()) {
      out = *v;
      return;
    }
  } else if constexpr (std::is_integral_v<T>) {
    if (node->is_integer()) {
      out = static_cast<T>(node->as_integer()->get());
      return;
    }
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = node->value<std::string>()) {
      out = *v;
      return;
    }
  }
  throw ConfigError(std::string("config key '") + key + "' has the wrong type");
}

template <typename T>
std::vector<T> read_list(const toml::table& t, const char* key) {
  std::vector<T> out;
  const auto* node = t.get(key);
  if (!node) return out;
  const auto* arr = node->as_array();
  if (!arr) throw ConfigError(std::string("sweep key '") + key + "' must be an array");
  for (const auto& item : *arr) {
    if constexpr (std::is_same_v<T, double>) {
      auto v = item.value<double>();
      if (!v) throw ConfigError(std::string("sweep key '") + key + "' must hold numbers");
      out.push_back(*v);
    } else {
      if (!item.is_integer()) throw ConfigError(std::string("sweep key '") + key + "' must hold integers");
      out.push_back(static_cast<T>(item.as_integer()->get()));
    }
  }
  return out;
}

}  // namespace

RunConfig parse_run_config(std::string_view toml_text, const std::string& source_name) {
  toml::table root;
  try {
    root = toml::parse(toml_text, source_name);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source_name << ":" << e.source().begin.line << ": " << e.description();
    throw ConfigError(msg.str());
  }
  reject_unknown(root, {"dataset", "injection", "model", "train", "sampler", "diffusion", "inference", "output",
                        "sweep"},
                 "root");
  RunConfig c;
  auto& t = c.train;

  if (const auto* s = section(root, "dataset")) {
    reject_unknown(*s, {"name", "edges", "attributes", "labels", "binarize"}, "dataset");
    std::string edges, attributes, labels;
    read(*s, "name", c.dataset.name);
    read(*s, "edges", edges);
    read(*s, "attributes", attributes);
    read(*s, "labels", labels);
    read(*s, "binarize", c.dataset.binarize);
    c.dataset.edges = edges;
    c.dataset.attributes = attributes;
    if (!labels.empty()) c.dataset.labels = labels;
  }
  if (const auto* s = section(root, "injection")) {
    reject_unknown(*s, {"enabled", "anomalies", "clique_size", "candidate_pool"}, "injection");
    read(*s, "enabled", c.injection.enabled);
    read(*s, "anomalies", c.injection.anomalies);
    read(*s, "clique_size", c.injection.clique_size);
    read(*s, "candidate_pool", c.injection.candidate_pool);
  }
  if (const auto* s = section(root, "model")) {
    reject_unknown(*s, {"subgraph_size", "embedding_dim", "share_weights"}, "model");
    read(*s, "subgraph_size", t.subgraph_size);
    read(*s, "embedding_dim", t.embedding_dim);
    read(*s, "share_weights", t.share_weights);
  }
  if (const auto* s = section(root, "train")) {
    reject_unknown(*s, {"batch_size", "epochs", "lr", "gamma", "seed", "variant", "negatives", "inter_per_node_mean"},
                   "train");
    std::string variant = to_string(t.variant);
    std::string negatives = "rotate";
    read(*s, "batch_size", t.batch_size);
    read(*s, "epochs", t.epochs);
    read(*s, "lr", t.lr);
    read(*s, "gamma", t.gamma);
    read(*s, "seed", t.seed);
    read(*s, "variant", variant);
    read(*s, "negatives", negatives);
    read(*s, "inter_per_node_mean", t.inter_per_node_mean);
    t.variant = parse_variant(variant);
    if (negatives == "rotate") {
      t.negatives = NegativeMode::kRotate;
    } else if (negatives == "fresh") {
      t.negatives = NegativeMode::kFresh;
    } else {
      throw ConfigError("negatives must be 'rotate' or 'fresh'");
    }
  }
  if (const auto* s = section(root, "sampler")) {
    reject_unknown(*s, {"restart_prob"}, "sampler");
    read(*s, "restart_prob", t.restart_prob);
  }
  if (const auto* s = section(root, "diffusion")) {
    reject_unknown(*s, {"alpha", "method", "tol", "max_iter", "topk", "dense_limit", "dense_cap", "cache"},
                   "diffusion");
    std::string method = to_string(t.diffusion);
    std::string cache;
    std::int64_t topk = 0;
    read(*s, "alpha", t.alpha);
    read(*s, "method", method);
    read(*s, "tol", t.diffusion_tol);
    read(*s, "max_iter", t.diffusion_max_iter);
    read(*s, "topk", topk);
    read(*s, "dense_limit", t.dense_diffusion_limit);
    read(*s, "dense_cap", t.dense_diffusion_cap);
    read(*s, "cache", cache);
    t.diffusion = parse_diffusion_method(method);
    if (topk > 0) t.diffusion_topk = topk;
    if (!cache.empty()) c.diffusion_cache = cache;
  }
  if (const auto* s = section(root, "inference")) {
    reject_unknown(*s, {"rounds", "normalization"}, "inference");
    std::string normalization = to_string(t.normalization);
    read(*s, "rounds", t.rounds);
    read(*s, "normalization", normalization);
    t.normalization = parse_normalization(normalization);
  }
  if (const auto* s = section(root, "output")) {
    reject_unknown(*s, {"dir"}, "output");
    std::string dir;
    read(*s, "dir", dir);
    if (!dir.empty()) c.out_dir = dir;
  }
  if (const auto* s = section(root, "sweep")) {
    reject_unknown(*s, {"subgraph_size", "embedding_dim", "gamma"}, "sweep");
    c.sweep.subgraph_size = read_list<std::int64_t>(*s, "subgraph_size");
    c.sweep.embedding_dim = read_list<std::int64_t>(*s, "embedding_dim");
    c.sweep.gamma = read_list<double>(*s, "gamma");
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str(), path.string());
}

void resolve_dataset_paths(RunConfig& config, const std::filesystem::path& data_dir) {
  auto resolve = [&](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative()) p = data_dir / p;
  };
  resolve(config.dataset.edges);
  resolve(config.dataset.attributes);
  if (config.dataset.labels) resolve(*config.dataset.labels);
}

nlohmann::json RunConfig::to_json() const {
  const auto& t = train;
  nlohmann::json j;
  j["dataset"] = {{"name", dataset.name},
                  {"edges", dataset.edges.string()},
                  {"attributes", dataset.attributes.string()},
                  {"labels", dataset.labels ? dataset.labels->string() : std::string()},
                  {"binarize", dataset.binarize}};
  j["injection"] = {{"enabled", injection.enabled},
                    {"anomalies", injection.anomalies},
                    {"clique_size", injection.clique_size},
                    {"candidate_pool", injection.candidate_pool}};
  j["model"] = {{"subgraph_size", t.subgraph_size}, {"embedding_dim", t.embedding_dim},
                {"share_weights", t.share_weights}};
  j["train"] = {{"batch_size", t.batch_size},
                {"epochs", t.epochs},
                {"lr", t.lr},
                {"gamma", t.gamma},
                {"effective_gamma", t.effective_gamma()},
                {"seed", t.seed},
                {"variant", to_string(t.variant)},
                {"negatives", t.negatives == NegativeMode::kRotate ? "rotate" : "fresh"},
                {"inter_per_node_mean", t.inter_per_node_mean}};
  j["sampler"] = {{"restart_prob", t.restart_prob}};
  j["diffusion"] = {{"alpha", t.alpha},
                    {"method", to_string(t.diffusion)},
                    {"tol", t.diffusion_tol},
                    {"max_iter", t.diffusion_max_iter},
                    {"topk", t.diffusion_topk ? *t.diffusion_topk : 0},
                    {"dense_limit", t.dense_diffusion_limit},
                    {"cache", diffusion_cache ? diffusion_cache->string() : std::string()}};
  j["inference"] = {{"rounds", t.rounds}, {"normalization", to_string(t.normalization)}};
  j["output"] = {{"dir", out_dir.string()}};
  return j;
}

}  // namespace subcr
