#pragma once

#include "subcr/graph.hpp"

#include <cstdint>

namespace subcr {

/// Citation-style graph: homophilous communities with heavy-tailed degrees and
/// sparse binary bag-of-words attributes drawn from per-community topics.
struct SyntheticSpec {
  NodeId nodes = 2708;
  std::int64_t edges = 5278;
  Eigen::Index features = 1433;
  int communities = 7;
  /// Probability that an edge stays inside a community.
  double homophily = 0.8;
  /// Words set per node.
  int words_per_node = 18;
  /// Fraction of a node's words drawn from its community's topic block.
  double topic_fraction = 0.7;
  std::uint64_t seed = 0;
};

AttributedGraph make_synthetic_graph(const SyntheticSpec& spec);

}  // namespace subcr
