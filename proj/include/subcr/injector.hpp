#pragma once

#include "subcr/graph.hpp"
#include "subcr/rng.hpp"

#include <cstdint>
#include <vector>

namespace subcr {

/// Parameters of the clique + attribute-swap perturbation.
struct InjectionPlan {
  std::int64_t clique_size = 15;
  std::int64_t num_cliques = 5;
  std::int64_t num_attribute_anomalies = 75;
  std::int64_t candidate_pool = 50;
  std::uint64_t seed = 0;

  std::int64_t total() const { return clique_size * num_cliques + num_attribute_anomalies; }

  /// Even structural/attribute split of `total_anomalies` with fixed clique
  /// size; `total_anomalies / 2` must be a multiple of `clique_size`.
  static InjectionPlan for_total(std::int64_t total_anomalies, std::uint64_t seed,
                                 std::int64_t clique_size = 15, std::int64_t candidate_pool = 50);
};

struct InjectionResult {
  AttributedGraph graph;
  std::vector<std::vector<NodeId>> cliques;
  std::vector<NodeId> attribute_nodes;
  /// Candidate set examined for each entry of `attribute_nodes`.
  std::vector<std::vector<NodeId>> candidates;
  /// Index of the node whose row was copied, per attribute anomaly.
  std::vector<NodeId> donors;
};

/// Picks `num_cliques` disjoint groups of `clique_size` unlabeled nodes and
/// connects each group completely. Existing edges are kept.
InjectionResult inject_structural(const AttributedGraph& g, std::int64_t clique_size,
                                  std::int64_t num_cliques, Rng& rng);

/// For `count` unlabeled nodes, replaces the attribute row with the row of the
/// farthest (Euclidean) of `candidate_pool` uniformly drawn other nodes.
InjectionResult inject_attribute(const AttributedGraph& g, std::int64_t count,
                                 std::int64_t candidate_pool, Rng& rng);

/// Structural injection followed by attribute injection on the remaining
/// unlabeled nodes, both drawn from one generator seeded by `plan.seed`.
InjectionResult inject(const AttributedGraph& g, const InjectionPlan& plan);

}  // namespace subcr
