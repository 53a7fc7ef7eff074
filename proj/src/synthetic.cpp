#include "subcr/synthetic.hpp"

#include "subcr/error.hpp"
#include "subcr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace subcr {

namespace {

/// Index drawn proportionally to `cumulative` (inclusive prefix sums).
std::size_t draw(const std::vector<double>& cumulative, Rng& rng) {
  const double u = rng.uniform() * cumulative.back();
  return static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
}

}  // namespace

AttributedGraph make_synthetic_graph(const SyntheticSpec& spec) {
  if (spec.nodes < 2 || spec.communities < 1 || spec.features < spec.communities) {
    throw ConfigError("synthetic graph needs >= 2 nodes and at least one feature per community");
  }
  const auto max_edges = spec.nodes * (spec.nodes - 1) / 2;
  if (spec.edges > max_edges / 2) throw ConfigError("too many edges requested for a sparse graph");
  Rng rng(spec.seed);
  const auto n = static_cast<std::size_t>(spec.nodes);

  std::vector<int> community(n);
  std::vector<std::vector<NodeId>> members(static_cast<std::size_t>(spec.communities));
  for (std::size_t i = 0; i < n; ++i) {
    community[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.communities)));
    members[community[i]].push_back(static_cast<NodeId>(i));
  }

  // Pareto(2.5) activity weights give a heavy-tailed degree distribution.
  std::vector<double> weight(n);
  for (auto& w : weight) w = std::pow(1.0 - rng.uniform(), -1.0 / 1.5);
  std::vector<double> global_cum(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) global_cum[i] = acc += weight[i];
  std::vector<std::vector<double>> community_cum(members.size());
  for (std::size_t c = 0; c < members.size(); ++c) {
    acc = 0.0;
    for (NodeId v : members[c]) community_cum[c].push_back(acc += weight[v]);
  }

  std::set<Edge> edges;
  while (static_cast<std::int64_t>(edges.size()) < spec.edges) {
    const auto u = static_cast<NodeId>(draw(global_cum, rng));
    NodeId v;
    const auto& own = members[community[u]];
    if (rng.bernoulli(spec.homophily) && own.size() > 1) {
      v = own[draw(community_cum[community[u]], rng)];
    } else {
      v = static_cast<NodeId>(draw(global_cum, rng));
    }
    if (u == v) continue;
    edges.insert({std::min(u, v), std::max(u, v)});
  }

  const auto block = spec.features / spec.communities;
  RowMatrix x = RowMatrix::Zero(spec.nodes, spec.features);
  for (std::size_t i = 0; i < n; ++i) {
    for (int w = 0; w < spec.words_per_node; ++w) {
      Eigen::Index word;
      if (rng.bernoulli(spec.topic_fraction)) {
        word = community[i] * block + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(block)));
      } else {
        word = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(spec.features)));
      }
      x(static_cast<Eigen::Index>(i), word) = 1.0;
    }
  }
  const std::vector<Edge> edge_list(edges.begin(), edges.end());
  return AttributedGraph::build(spec.nodes, edge_list, std::move(x));
}

}  // namespace subcr
