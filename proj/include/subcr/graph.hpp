#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace subcr {

using NodeId = std::int64_t;
using Edge = std::pair<NodeId, NodeId>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, std::int64_t>;

/// Undirected attributed graph in CSR form with dense node attributes.
///
/// Adjacency is symmetric, duplicate-free and carries no self-loops; each
/// neighbor list is sorted ascending. Instances are immutable once built.
class AttributedGraph {
 public:
  AttributedGraph() = default;

  /// Symmetrizes and deduplicates `edges`, dropping self-loops. Throws
  /// MalformedInput for ids outside [0, num_nodes) and DimensionError when
  /// attribute or label sizes disagree with `num_nodes`.
  static AttributedGraph build(NodeId num_nodes, std::span<const Edge> edges, RowMatrix attributes,
                               std::optional<std::vector<std::uint8_t>> labels = std::nullopt);

  NodeId num_nodes() const { return static_cast<NodeId>(offsets_.size()) - 1; }
  /// Number of undirected edges.
  std::int64_t num_edges() const { return static_cast<std::int64_t>(neighbors_.size()) / 2; }
  Eigen::Index num_features() const { return attributes_.cols(); }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {neighbors_.data() + offsets_[v], neighbors_.data() + offsets_[v + 1]};
  }
  std::int64_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }
  bool has_edge(NodeId u, NodeId v) const;
  double average_degree() const;

  const RowMatrix& attributes() const { return attributes_; }
  const std::optional<std::vector<std::uint8_t>>& labels() const { return labels_; }

  /// Edges with u < v in ascending (u, v) order.
  std::vector<Edge> edge_list() const;

  /// Copies with one component replaced; the structure is re-validated.
  AttributedGraph with_attributes(RowMatrix attributes) const;
  AttributedGraph with_labels(std::optional<std::vector<std::uint8_t>> labels) const;
  AttributedGraph with_edges(std::span<const Edge> extra_edges) const;

  bool operator==(const AttributedGraph& other) const;

 private:
  std::vector<std::int64_t> offsets_{0};
  std::vector<NodeId> neighbors_;
  RowMatrix attributes_;
  std::optional<std::vector<std::uint8_t>> labels_;
};

struct NormalizedAdjacency {
  SparseRowMatrix matrix;
  bool self_loops_added = false;
  /// Rows that are entirely zero (isolated nodes without self-loops).
  std::vector<NodeId> zero_rows;
};

/// D^{-1/2} (A + I?) D^{-1/2} over the whole graph or the subgraph induced by
/// `node_subset` (row/column k of the result is node_subset[k]).
NormalizedAdjacency sym_norm_adjacency(const AttributedGraph& g,
                                       std::optional<std::span<const NodeId>> node_subset,
                                       bool add_self_loops);

/// Replaces every nonzero attribute by 1.
AttributedGraph binarize_attributes(const AttributedGraph& g);

// ---- file formats -----------------------------------------------------------

std::vector<Edge> read_edge_list(const std::filesystem::path& path);
RowMatrix read_attributes(const std::filesystem::path& path);
std::vector<std::uint8_t> read_labels(const std::filesystem::path& path);

AttributedGraph load_graph(const std::filesystem::path& edge_list_path,
                           const std::filesystem::path& attributes_path,
                           const std::optional<std::filesystem::path>& labels_path = std::nullopt);

void write_edge_list(const AttributedGraph& g, const std::filesystem::path& path);
void write_attributes(const RowMatrix& attributes, const std::filesystem::path& path);
void write_labels(std::span<const std::uint8_t> labels, const std::filesystem::path& path);

/// Writes all three files (labels only when present).
void export_graph(const AttributedGraph& g, const std::filesystem::path& edge_list_path,
                  const std::filesystem::path& attributes_path,
                  const std::optional<std::filesystem::path>& labels_path = std::nullopt);

/// Rewrites an edge list with arbitrary integer ids into dense 0..N-1 ids,
/// assigned in ascending order of the original id. The id map file holds one
/// "new_id original_id" pair per line. Returns the number of distinct ids.
NodeId remap_edge_list(const std::filesystem::path& in_path, const std::filesystem::path& out_path,
                       const std::filesystem::path& id_map_path);

/// Shortest round-trip text form of a double.
std::string format_double(double value);

}  // namespace subcr
