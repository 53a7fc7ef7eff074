#pragma once

#include "subcr/graph.hpp"
#include "subcr/rng.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace subcr::nn {

using Matrix = RowMatrix;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
};

/// 2-D dense tensor handle. Copies share the underlying node; results of ops
/// on inputs that require grad keep their parents alive for `backward`.
/// Scalars are 1x1.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor scalar(double v, bool requires_grad = false);

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  std::array<Eigen::Index, 2> shape() const { return {rows(), cols()}; }
  bool defined() const { return static_cast<bool>(node_); }

  const Matrix& value() const { return node_->value; }
  /// In-place write used by the optimizer; shape must not change.
  Matrix& mutable_value() { return node_->value; }
  /// Gradient buffer; empty until `backward` reaches this tensor.
  const Matrix& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() == value().size() && value().size() > 0; }
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() { node_->grad.resize(0, 0); }
  double item() const;

  const std::shared_ptr<Node>& node() const { return node_; }
  static Tensor from_node(std::shared_ptr<Node> node);

 private:
  std::shared_ptr<Node> node_;
};

std::string shape_string(const Tensor& t);

// ---- forward ops --------------------------------------------------------------
// None of these broadcast: shapes must match exactly unless stated otherwise.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log(const Tensor& a);
/// Clamps into [lo, hi]; gradient is passed only where the input was inside.
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor transpose(const Tensor& a);
/// 1 x cols column-wise mean.
Tensor mean_rows(const Tensor& a);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& a, Eigen::Index begin, Eigen::Index end);
/// Row-major reinterpretation to rows x cols.
Tensor reshape(const Tensor& a, Eigen::Index rows, Eigen::Index cols);
/// 1x1 sum of all entries.
Tensor sum(const Tensor& a);
/// 1x1 sum of squared differences.
Tensor squared_error(const Tensor& a, const Tensor& b);

// Explicit batched forms used by the model.

/// Adds the 1 x cols `row` to every row of `a`.
Tensor add_row(const Tensor& a, const Tensor& row);
/// rows x 1 vector of per-row dot products.
Tensor row_dot(const Tensor& a, const Tensor& b);
/// Row i of the output is row index[i] of `a`.
Tensor gather_rows(const Tensor& a, std::span<const Eigen::Index> index);
/// `a` is blocks.size() stacked P-row blocks; block k is left-multiplied by
/// the constant blocks[k] (P x P).
Tensor block_matmul(std::span<const Matrix> blocks, const Tensor& a);
/// Constant sparse matrix times `b`.
Tensor sparse_matmul(std::shared_ptr<const SparseRowMatrix> a, const Tensor& b);
/// Mean over each consecutive `block_rows`-row block -> num_blocks x cols.
Tensor block_mean_rows(const Tensor& a, Eigen::Index block_rows);
/// Per block, rows 1..block_rows-1 flattened into one row ->
/// num_blocks x ((block_rows - 1) * cols).
Tensor block_tail_flatten(const Tensor& a, Eigen::Index block_rows);

/// Reverse-mode accumulation from a 1x1 `loss` into every reachable tensor
/// that requires grad. Gradients accumulate across calls until zero_grad.
void backward(const Tensor& loss);

// ---- optimisation -------------------------------------------------------------

struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::int64_t step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update of `values` given `grads`. Moment buffers
/// are created on the first call.
void adam_step(std::span<Matrix* const> values, std::span<const Matrix> grads, AdamState& state);

/// Same, reading gradients from the tensors themselves (missing grads count as zero).
void adam_step(std::span<Tensor> params, AdamState& state);

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng);

// ---- checkpoints --------------------------------------------------------------

using NamedMatrix = std::pair<std::string, Matrix>;

/// "SUBCRCKP", u32 version, u64 count, then per entry: u64 name length, name
/// bytes, u64 rows, u64 cols, rows*cols row-major doubles (little endian).
void save_checkpoint(std::span<const NamedMatrix> params, const std::filesystem::path& path);
std::vector<NamedMatrix> load_checkpoint(const std::filesystem::path& path);

}  // namespace subcr::nn
