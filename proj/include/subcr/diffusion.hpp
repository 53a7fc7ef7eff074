#pragma once

#include "subcr/graph.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <variant>

namespace subcr {

/// Personalized PageRank diffusion S = alpha (I - (1 - alpha) T)^{-1}, stored
/// dense or, after top-k truncation, as sparse rows.
class DiffusionMatrix {
 public:
  DiffusionMatrix() = default;
  DiffusionMatrix(RowMatrix dense, double alpha);
  DiffusionMatrix(SparseRowMatrix sparse, double alpha, std::int64_t truncation);

  NodeId size() const;
  double alpha() const { return alpha_; }
  std::optional<std::int64_t> truncation() const { return truncation_; }
  bool is_sparse() const { return std::holds_alternative<SparseRowMatrix>(storage_); }

  double value(NodeId row, NodeId col) const;

  /// Dense |ids| x |ids| block with entry (a, b) = max(S[ids[a], ids[b]],
  /// S[ids[b], ids[a]]), which is symmetric even after truncation.
  RowMatrix block(std::span<const NodeId> ids) const;

  RowMatrix to_dense() const;
  const RowMatrix& dense() const { return std::get<RowMatrix>(storage_); }
  const SparseRowMatrix& sparse() const { return std::get<SparseRowMatrix>(storage_); }

 private:
  std::variant<RowMatrix, SparseRowMatrix> storage_;
  double alpha_ = 0.15;
  std::optional<std::int64_t> truncation_;
};

/// T = D^{-1/2} A D^{-1/2}; isolated nodes receive a self-loop first.
SparseRowMatrix transition_matrix(const AttributedGraph& g);

/// Closed-form diffusion by a dense Cholesky solve.
DiffusionMatrix compute_ppr(const AttributedGraph& g, double alpha, NodeId max_nodes = 25000);

struct IterativeOptions {
  double tol = 1e-8;
  int max_iter = 1000;
  /// Keep only the top-k entries of every row (diagonal always kept).
  std::optional<std::int64_t> top_k;
  /// Columns advanced together per power-iteration block.
  NodeId block_size = 256;
};

/// Power iteration X <- alpha I + (1 - alpha) T X, column block by column
/// block, until the largest entrywise change drops below `tol`. Never holds
/// more than one block densely when `top_k` is set.
DiffusionMatrix compute_ppr_iterative(const AttributedGraph& g, double alpha,
                                      const IterativeOptions& options);

inline DiffusionMatrix compute_ppr_iterative(const AttributedGraph& g, double alpha, double tol,
                                             int max_iter) {
  return compute_ppr_iterative(g, alpha, IterativeOptions{tol, max_iter, std::nullopt, 256});
}

/// sum_{k=0..steps} alpha (1 - alpha)^k T^k, evaluated exactly (dense).
DiffusionMatrix ppr_truncated_series(const AttributedGraph& g, double alpha, int steps);

/// Keeps each row's k largest entries (ties to the lower column) plus the
/// diagonal. Input may be dense or sparse.
DiffusionMatrix sparsify_topk(const DiffusionMatrix& s, std::int64_t k);

/// Binary cache: "SUBCRDIF", u32 version, u32 format (0 dense, 1 sparse),
/// u64 N, f64 alpha, u64 truncation (0 = none), then a row-major payload:
/// N*N doubles (dense) or, per row, u64 nnz followed by nnz (u64 col, f64 value).
void save_diffusion(const DiffusionMatrix& s, const std::filesystem::path& path);
DiffusionMatrix load_diffusion(const std::filesystem::path& path);

}  // namespace subcr
