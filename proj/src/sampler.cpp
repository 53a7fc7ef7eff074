#include "subcr/sampler.hpp"

#include "subcr/error.hpp"

#include <algorithm>
#include <cmath>

namespace subcr {

namespace {

// Stream offset separating fresh-negative draws from positive walks.
constexpr std::uint64_t kNegativeStream = 0x4E45470000000000ULL;

}  // namespace

const SubgraphView& ViewPairBatch::local_neg(std::size_t b) const {
  return mode_ == NegativeMode::kFresh ? local_fresh_[b] : local_pos[negative_slot(b)];
}

const SubgraphView& ViewPairBatch::global_neg(std::size_t b) const {
  return mode_ == NegativeMode::kFresh ? global_fresh_[b] : global_pos[negative_slot(b)];
}

std::vector<NodeId> rwr_sample(const AttributedGraph& g, NodeId target, std::int64_t size,
                               double restart_prob, Rng& rng,
                               std::optional<std::int64_t> step_budget) {
  if (size < 1) throw ConfigError("subgraph size must be >= 1");
  if (!(restart_prob > 0.0 && restart_prob <= 1.0)) {
    throw ConfigError("restart probability must lie in (0, 1]");
  }
  if (target < 0 || target >= g.num_nodes()) throw DimensionError("target out of range");
  const std::int64_t budget =
      step_budget.value_or(static_cast<std::int64_t>(std::ceil(
          10.0 * static_cast<double>(size) * std::max(1.0, g.average_degree()))));

  std::vector<NodeId> visited{target};
  visited.reserve(static_cast<std::size_t>(size));
  NodeId current = target;
  for (std::int64_t step = 0; step < budget && static_cast<std::int64_t>(visited.size()) < size;
       ++step) {
    const auto nbrs = g.neighbors(current);
    if (nbrs.empty() || rng.bernoulli(restart_prob)) {
      current = target;
      continue;
    }
    current = nbrs[rng.below(nbrs.size())];
    if (std::find(visited.begin(), visited.end(), current) == visited.end()) {
      visited.push_back(current);
    }
  }
  visited.resize(static_cast<std::size_t>(size), target);
  return visited;
}

RowMatrix local_adjacency(const AttributedGraph& g, std::span<const NodeId> node_ids) {
  const auto p = static_cast<Eigen::Index>(node_ids.size());
  RowMatrix a = RowMatrix::Identity(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i + 1; j < p; ++j) {
      if (node_ids[i] != node_ids[j] && g.has_edge(node_ids[i], node_ids[j])) {
        a(i, j) = 1.0;
        a(j, i) = 1.0;
      }
    }
  }
  const Eigen::VectorXd degree = a.rowwise().sum();
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      if (a(i, j) != 0.0) a(i, j) = 1.0 / std::sqrt(degree[i] * degree[j]);
    }
  }
  return a;
}

std::pair<SubgraphView, SubgraphView> build_view_pair(const AttributedGraph& g,
                                                      const DiffusionMatrix* diffusion,
                                                      std::span<const NodeId> node_ids) {
  if (node_ids.empty()) throw DimensionError("empty subgraph");
  const auto p = static_cast<Eigen::Index>(node_ids.size());
  const NodeId target = node_ids.front();
  RowMatrix x(p, g.num_features());
  for (Eigen::Index k = 0; k < p; ++k) {
    if (node_ids[k] == target) {
      x.row(k).setZero();
    } else {
      x.row(k) = g.attributes().row(node_ids[k]);
    }
  }

  SubgraphView local{{node_ids.begin(), node_ids.end()}, local_adjacency(g, node_ids), x};
  SubgraphView global{{node_ids.begin(), node_ids.end()}, RowMatrix(), std::move(x)};
  if (diffusion) {
    global.adjacency = diffusion->block(node_ids);
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) {
        if (i != j && node_ids[i] == node_ids[j]) global.adjacency(i, j) = 0.0;
      }
    }
  }
  return {std::move(local), std::move(global)};
}

ViewPairBatch make_batch(const AttributedGraph& g, const DiffusionMatrix* diffusion,
                         std::span<const NodeId> targets, const SamplerConfig& config,
                         std::uint64_t seed, std::uint64_t round) {
  if (targets.size() < 2) {
    throw ConfigError("a batch needs at least two targets so every node has a negative");
  }
  ViewPairBatch batch;
  batch.seed = seed;
  batch.round = round;
  batch.mode_ = config.negatives;
  batch.targets.assign(targets.begin(), targets.end());
  batch.target_attributes.resize(static_cast<Eigen::Index>(targets.size()), g.num_features());
  const auto budget = static_cast<std::int64_t>(
      std::ceil(config.budget_factor * static_cast<double>(config.subgraph_size) *
                std::max(1.0, g.average_degree())));

  for (std::size_t b = 0; b < targets.size(); ++b) {
    const NodeId t = targets[b];
    Rng rng = Rng::keyed(seed, round, static_cast<std::uint64_t>(t));
    const auto ids = rwr_sample(g, t, config.subgraph_size, config.restart_prob, rng, budget);
    auto [local, global] = build_view_pair(g, diffusion, ids);
    batch.local_pos.push_back(std::move(local));
    batch.global_pos.push_back(std::move(global));
    batch.target_attributes.row(static_cast<Eigen::Index>(b)) = g.attributes().row(t);

    if (config.negatives == NegativeMode::kFresh) {
      Rng neg_rng = Rng::keyed(seed, round ^ kNegativeStream, static_cast<std::uint64_t>(t));
      NodeId other = t;
      if (g.num_nodes() > 1) {
        other = static_cast<NodeId>(neg_rng.below(static_cast<std::uint64_t>(g.num_nodes() - 1)));
        if (other >= t) ++other;
      }
      const auto neg_ids =
          rwr_sample(g, other, config.subgraph_size, config.restart_prob, neg_rng, budget);
      auto [neg_local, neg_global] = build_view_pair(g, diffusion, neg_ids);
      batch.local_fresh_.push_back(std::move(neg_local));
      batch.global_fresh_.push_back(std::move(neg_global));
    }
  }
  return batch;
}

}  // namespace subcr
