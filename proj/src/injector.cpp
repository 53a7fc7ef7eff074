#include "subcr/injector.hpp"

#include "subcr/error.hpp"

#include <algorithm>
#include <numeric>

namespace subcr {

namespace {

std::vector<std::uint8_t> current_labels(const AttributedGraph& g) {
  if (g.labels()) return *g.labels();
  return std::vector<std::uint8_t>(static_cast<std::size_t>(g.num_nodes()), 0);
}

std::vector<NodeId> unlabeled_nodes(const std::vector<std::uint8_t>& labels) {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 0) out.push_back(static_cast<NodeId>(i));
  }
  return out;
}

/// First `count` entries of a partial Fisher-Yates shuffle of `pool`.
std::vector<NodeId> choose(std::vector<NodeId> pool, std::int64_t count, Rng& rng) {
  const auto n = pool.size();
  for (std::size_t i = 0; i < static_cast<std::size_t>(count); ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

}  // namespace

InjectionPlan InjectionPlan::for_total(std::int64_t total_anomalies, std::uint64_t seed,
                                       std::int64_t clique_size, std::int64_t candidate_pool) {
  if (total_anomalies < 0 || total_anomalies % 2 != 0) {
    throw ConfigError("anomaly total must be even and non-negative");
  }
  const auto half = total_anomalies / 2;
  if (clique_size < 2 || half % clique_size != 0) {
    throw ConfigError("half of the anomaly total (" + std::to_string(half) +
                      ") is not a multiple of the clique size " + std::to_string(clique_size));
  }
  return InjectionPlan{clique_size, half / clique_size, half, candidate_pool, seed};
}

InjectionResult inject_structural(const AttributedGraph& g, std::int64_t clique_size,
                                  std::int64_t num_cliques, Rng& rng) {
  if (clique_size < 0 || num_cliques < 0) throw ConfigError("negative clique parameters");
  auto labels = current_labels(g);
  const auto pool = unlabeled_nodes(labels);
  const auto needed = clique_size * num_cliques;
  if (needed > static_cast<std::int64_t>(pool.size())) {
    throw CapacityError("structural injection needs " + std::to_string(needed) +
                        " unlabeled nodes, only " + std::to_string(pool.size()) + " available");
  }
  const auto chosen = choose(pool, needed, rng);

  InjectionResult result;
  std::vector<Edge> extra;
  for (std::int64_t c = 0; c < num_cliques; ++c) {
    std::vector<NodeId> members(chosen.begin() + c * clique_size,
                                chosen.begin() + (c + 1) * clique_size);
    for (std::size_t a = 0; a < members.size(); ++a) {
      labels[members[a]] = 1;
      for (std::size_t b = a + 1; b < members.size(); ++b) extra.emplace_back(members[a], members[b]);
    }
    result.cliques.push_back(std::move(members));
  }
  result.graph = g.with_edges(extra).with_labels(std::move(labels));
  return result;
}

InjectionResult inject_attribute(const AttributedGraph& g, std::int64_t count,
                                 std::int64_t candidate_pool, Rng& rng) {
  if (candidate_pool < 1) throw ConfigError("candidate pool must be >= 1");
  if (count < 0) throw ConfigError("negative anomaly count");
  InjectionResult result;
  if (count == 0) {
    result.graph = g;
    return result;
  }
  auto labels = current_labels(g);
  const auto pool = unlabeled_nodes(labels);
  if (count > static_cast<std::int64_t>(pool.size())) {
    throw CapacityError("attribute injection needs " + std::to_string(count) +
                        " unlabeled nodes, only " + std::to_string(pool.size()) + " available");
  }
  const auto chosen = choose(pool, count, rng);
  const RowMatrix& original = g.attributes();
  RowMatrix x = original;

  std::vector<NodeId> others(static_cast<std::size_t>(g.num_nodes()));
  std::iota(others.begin(), others.end(), NodeId{0});
  for (NodeId v : chosen) {
    std::vector<NodeId> rest;
    rest.reserve(others.size() - 1);
    for (NodeId u : others) {
      if (u != v) rest.push_back(u);
    }
    const auto k = std::min<std::int64_t>(candidate_pool, static_cast<std::int64_t>(rest.size()));
    auto candidates = choose(std::move(rest), k, rng);

    NodeId best = candidates.front();
    double best_dist = -1.0;
    for (NodeId u : candidates) {
      const double dist = (original.row(u) - original.row(v)).squaredNorm();
      if (dist > best_dist) {
        best_dist = dist;
        best = u;
      }
    }
    x.row(v) = original.row(best);
    labels[v] = 1;
    result.attribute_nodes.push_back(v);
    result.donors.push_back(best);
    result.candidates.push_back(std::move(candidates));
  }
  result.graph = g.with_attributes(std::move(x)).with_labels(std::move(labels));
  return result;
}

InjectionResult inject(const AttributedGraph& g, const InjectionPlan& plan) {
  Rng rng(plan.seed);
  auto structural = inject_structural(g, plan.clique_size, plan.num_cliques, rng);
  auto attribute =
      inject_attribute(structural.graph, plan.num_attribute_anomalies, plan.candidate_pool, rng);
  attribute.cliques = std::move(structural.cliques);
  if (!attribute.graph.labels()) {
    attribute.graph = attribute.graph.with_labels(
        std::vector<std::uint8_t>(static_cast<std::size_t>(g.num_nodes()), 0));
  }
  return attribute;
}

}  // namespace subcr
