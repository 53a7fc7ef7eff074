#pragma once

#include "subcr/diffusion.hpp"
#include "subcr/graph.hpp"
#include "subcr/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace subcr {

/// P-node subgraph around a target. Row/column k corresponds to node_ids[k];
/// node_ids[0] is the target and every row holding the target id is zeroed in
/// `attributes` (row 0 always, plus padding repeats).
struct SubgraphView {
  std::vector<NodeId> node_ids;
  RowMatrix adjacency;
  RowMatrix attributes;

  NodeId target() const { return node_ids.front(); }
};

enum class NegativeMode { kRotate, kFresh };

struct SamplerConfig {
  std::int64_t subgraph_size = 4;
  double restart_prob = 0.1;
  /// Walk budget is budget_factor * P * max(1, average degree) steps.
  double budget_factor = 10.0;
  NegativeMode negatives = NegativeMode::kRotate;
};

/// Paired local/global views for a batch of targets. Negatives for slot b are
/// the views of another node's subgraph, scored against target b.
class ViewPairBatch {
 public:
  std::vector<NodeId> targets;
  std::vector<SubgraphView> local_pos;
  std::vector<SubgraphView> global_pos;
  /// B x F unmasked target rows.
  RowMatrix target_attributes;
  std::uint64_t seed = 0;
  std::uint64_t round = 0;

  std::size_t size() const { return targets.size(); }
  NegativeMode negative_mode() const { return mode_; }
  /// Slot whose positive views serve as negatives for `b` (rotation mode).
  std::size_t negative_slot(std::size_t b) const { return (b + 1) % targets.size(); }

  const SubgraphView& local_neg(std::size_t b) const;
  const SubgraphView& global_neg(std::size_t b) const;

 private:
  friend ViewPairBatch make_batch(const AttributedGraph&, const DiffusionMatrix*,
                                  std::span<const NodeId>, const SamplerConfig&, std::uint64_t,
                                  std::uint64_t);
  NegativeMode mode_ = NegativeMode::kRotate;
  std::vector<SubgraphView> local_fresh_;
  std::vector<SubgraphView> global_fresh_;
};

/// Random walk with restart from `target`, collecting first visits until
/// `size` distinct nodes are found or the step budget runs out; the shortfall
/// is padded with the target id.
std::vector<NodeId> rwr_sample(const AttributedGraph& g, NodeId target, std::int64_t size,
                               double restart_prob, Rng& rng,
                               std::optional<std::int64_t> step_budget = std::nullopt);

/// Local view: induced binary adjacency plus self-loops, symmetrically
/// normalized. Positions repeating the same node are not linked to each other.
RowMatrix local_adjacency(const AttributedGraph& g, std::span<const NodeId> node_ids);

/// Builds both views over the same node list. `diffusion` may be null when the
/// global view is not needed; the global adjacency is then left empty.
std::pair<SubgraphView, SubgraphView> build_view_pair(const AttributedGraph& g,
                                                      const DiffusionMatrix* diffusion,
                                                      std::span<const NodeId> node_ids);

/// Samples one subgraph per target from the generator keyed by
/// (seed, round, target). Requires at least two targets.
ViewPairBatch make_batch(const AttributedGraph& g, const DiffusionMatrix* diffusion,
                         std::span<const NodeId> targets, const SamplerConfig& config,
                         std::uint64_t seed, std::uint64_t round);

}  // namespace subcr
