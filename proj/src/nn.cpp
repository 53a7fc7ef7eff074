#include "subcr/nn.hpp"

#include "subcr/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <unordered_set>

namespace subcr::nn {

namespace {

using NodePtr = std::shared_ptr<Node>;

void accumulate(const NodePtr& node, const Matrix& delta) {
  if (!node->requires_grad) return;
  if (node->grad.size() == 0) {
    node->grad = delta;
  } else {
    node->grad += delta;
  }
}

Tensor make_result(Matrix value, const char* op, std::vector<NodePtr> parents,
                   std::function<void(Node&)> backward_fn) {
  if (!value.allFinite()) {
    throw NumericalError(std::string("non-finite value produced by ") + op);
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  node->requires_grad =
      std::any_of(parents.begin(), parents.end(), [](const NodePtr& p) { return p->requires_grad; });
  if (node->requires_grad) {
    node->parents = std::move(parents);
    node->backward = std::move(backward_fn);
  }
  return Tensor::from_node(std::move(node));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                         shape_string(b));
  }
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw ParseError("truncated checkpoint " + path.string());
  }
  return v;
}

constexpr std::array<char, 8> kCheckpointMagic{'S', 'U', 'B', 'C', 'R', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return Tensor(std::move(m), requires_grad);
}

Tensor Tensor::from_node(std::shared_ptr<Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw DimensionError("item() on non-scalar " + shape_string(*this));
  return value()(0, 0);
}

std::string shape_string(const Tensor& t) {
  return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: shape mismatch " + shape_string(a) + " vs " + shape_string(b));
  }
  Matrix out = a.value() * b.value();
  auto pa = a.node();
  auto pb = b.node();
  return make_result(std::move(out), "matmul", {pa, pb}, [pa, pb](Node& self) {
    if (pa->requires_grad) accumulate(pa, self.grad * pb->value.transpose());
    if (pb->requires_grad) accumulate(pb, pa->value.transpose() * self.grad);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto pa = a.node();
  auto pb = b.node();
  return make_result(a.value() + b.value(), "add", {pa, pb}, [pa, pb](Node& self) {
    accumulate(pa, self.grad);
    accumulate(pb, self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto pa = a.node();
  auto pb = b.node();
  return make_result(a.value() - b.value(), "sub", {pa, pb}, [pa, pb](Node& self) {
    accumulate(pa, self.grad);
    if (pb->requires_grad) accumulate(pb, -self.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto pa = a.node();
  auto pb = b.node();
  Matrix out = a.value().cwiseProduct(b.value());
  return make_result(std::move(out), "mul", {pa, pb}, [pa, pb](Node& self) {
    if (pa->requires_grad) accumulate(pa, self.grad.cwiseProduct(pb->value));
    if (pb->requires_grad) accumulate(pb, self.grad.cwiseProduct(pa->value));
  });
}

Tensor scale(const Tensor& a, double factor) {
  auto pa = a.node();
  return make_result(a.value() * factor, "scale", {pa},
                     [pa, factor](Node& self) { accumulate(pa, self.grad * factor); });
}

Tensor add_scalar(const Tensor& a, double offset) {
  auto pa = a.node();
  Matrix out = a.value().array() + offset;
  return make_result(std::move(out), "add_scalar", {pa},
                     [pa](Node& self) { accumulate(pa, self.grad); });
}

Tensor relu(const Tensor& a) {
  auto pa = a.node();
  Matrix out = a.value().cwiseMax(0.0);
  return make_result(std::move(out), "relu", {pa}, [pa](Node& self) {
    accumulate(pa, (pa->value.array() > 0.0).select(self.grad, 0.0).matrix());
  });
}

Tensor sigmoid(const Tensor& a) {
  auto pa = a.node();
  Matrix out = a.value().unaryExpr([](double x) {
    // Branches keep exp() from overflowing for large |x|.
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return make_result(std::move(out), "sigmoid", {pa}, [pa](Node& self) {
    const auto& s = self.value.array();
    accumulate(pa, (self.grad.array() * s * (1.0 - s)).matrix());
  });
}

Tensor log(const Tensor& a) {
  if ((a.value().array() <= 0.0).any()) throw NumericalError("log of a non-positive value");
  auto pa = a.node();
  Matrix out = a.value().array().log().matrix();
  return make_result(std::move(out), "log", {pa}, [pa](Node& self) {
    accumulate(pa, (self.grad.array() / pa->value.array()).matrix());
  });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  auto pa = a.node();
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return make_result(std::move(out), "clamp", {pa}, [pa, lo, hi](Node& self) {
    const auto& x = pa->value.array();
    accumulate(pa, ((x >= lo) && (x <= hi)).select(self.grad, 0.0).matrix());
  });
}

Tensor transpose(const Tensor& a) {
  auto pa = a.node();
  return make_result(a.value().transpose(), "transpose", {pa},
                     [pa](Node& self) { accumulate(pa, self.grad.transpose()); });
}

Tensor mean_rows(const Tensor& a) {
  if (a.rows() == 0) throw DimensionError("mean_rows of an empty tensor");
  auto pa = a.node();
  Matrix out = a.value().colwise().mean();
  return make_result(std::move(out), "mean_rows", {pa}, [pa](Node& self) {
    const auto n = pa->value.rows();
    accumulate(pa, self.grad.replicate(n, 1) / static_cast<double>(n));
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows of nothing");
  const auto cols = parts.front().cols();
  Eigen::Index rows = 0;
  std::vector<NodePtr> parents;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw DimensionError("concat_rows: shape mismatch " + shape_string(parts.front()) + " vs " +
                           shape_string(p));
    }
    rows += p.rows();
    parents.push_back(p.node());
  }
  Matrix out(rows, cols);
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
  }
  return make_result(std::move(out), "concat_rows", parents, [parents](Node& self) {
    Eigen::Index off = 0;
    for (const auto& p : parents) {
      const auto r = p->value.rows();
      if (p->requires_grad) accumulate(p, self.grad.middleRows(off, r));
      off += r;
    }
  });
}

Tensor slice_rows(const Tensor& a, Eigen::Index begin, Eigen::Index end) {
  if (begin < 0 || end > a.rows() || begin > end) {
    throw DimensionError("slice_rows [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for " + shape_string(a));
  }
  auto pa = a.node();
  Matrix out = a.value().middleRows(begin, end - begin);
  return make_result(std::move(out), "slice_rows", {pa}, [pa, begin, end](Node& self) {
    Matrix g = Matrix::Zero(pa->value.rows(), pa->value.cols());
    g.middleRows(begin, end - begin) = self.grad;
    accumulate(pa, g);
  });
}

Tensor reshape(const Tensor& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.rows() * a.cols()) {
    throw DimensionError("reshape " + shape_string(a) + " to [" + std::to_string(rows) + "x" +
                         std::to_string(cols) + "]");
  }
  auto pa = a.node();
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return make_result(std::move(out), "reshape", {pa}, [pa](Node& self) {
    accumulate(pa, Eigen::Map<const Matrix>(self.grad.data(), pa->value.rows(), pa->value.cols()));
  });
}

Tensor sum(const Tensor& a) {
  auto pa = a.node();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_result(std::move(out), "sum", {pa}, [pa](Node& self) {
    accumulate(pa, Matrix::Constant(pa->value.rows(), pa->value.cols(), self.grad(0, 0)));
  });
}

Tensor squared_error(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "squared_error");
  auto pa = a.node();
  auto pb = b.node();
  Matrix out(1, 1);
  out(0, 0) = (a.value() - b.value()).squaredNorm();
  return make_result(std::move(out), "squared_error", {pa, pb}, [pa, pb](Node& self) {
    const Matrix diff = 2.0 * self.grad(0, 0) * (pa->value - pb->value);
    accumulate(pa, diff);
    if (pb->requires_grad) accumulate(pb, -diff);
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: shape mismatch " + shape_string(a) + " vs " + shape_string(row));
  }
  auto pa = a.node();
  auto pr = row.node();
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make_result(std::move(out), "add_row", {pa, pr}, [pa, pr](Node& self) {
    accumulate(pa, self.grad);
    if (pr->requires_grad) accumulate(pr, self.grad.colwise().sum());
  });
}

Tensor row_dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "row_dot");
  auto pa = a.node();
  auto pb = b.node();
  Matrix out = a.value().cwiseProduct(b.value()).rowwise().sum();
  return make_result(std::move(out), "row_dot", {pa, pb}, [pa, pb](Node& self) {
    if (pa->requires_grad) accumulate(pa, pb->value.array().colwise() * self.grad.col(0).array());
    if (pb->requires_grad) accumulate(pb, pa->value.array().colwise() * self.grad.col(0).array());
  });
}

Tensor gather_rows(const Tensor& a, std::span<const Eigen::Index> index) {
  std::vector<Eigen::Index> idx(index.begin(), index.end());
  for (auto i : idx) {
    if (i < 0 || i >= a.rows()) throw DimensionError("gather_rows index out of range");
  }
  auto pa = a.node();
  Matrix out(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = a.value().row(idx[r]);
  return make_result(std::move(out), "gather_rows", {pa}, [pa, idx](Node& self) {
    Matrix g = Matrix::Zero(pa->value.rows(), pa->value.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) g.row(idx[r]) += self.grad.row(static_cast<Eigen::Index>(r));
    accumulate(pa, g);
  });
}

Tensor block_matmul(std::span<const Matrix> blocks, const Tensor& a) {
  if (blocks.empty()) throw DimensionError("block_matmul without blocks");
  const auto p = blocks.front().rows();
  for (const auto& b : blocks) {
    if (b.rows() != p || b.cols() != p) throw DimensionError("block_matmul: blocks must be PxP");
  }
  if (a.rows() != p * static_cast<Eigen::Index>(blocks.size())) {
    throw DimensionError("block_matmul: " + shape_string(a) + " is not " +
                         std::to_string(blocks.size()) + " blocks of " + std::to_string(p) + " rows");
  }
  auto shared = std::make_shared<std::vector<Matrix>>(blocks.begin(), blocks.end());
  auto pa = a.node();
  Matrix out(a.rows(), a.cols());
  for (std::size_t k = 0; k < shared->size(); ++k) {
    const auto off = static_cast<Eigen::Index>(k) * p;
    out.middleRows(off, p).noalias() = (*shared)[k] * a.value().middleRows(off, p);
  }
  return make_result(std::move(out), "block_matmul", {pa}, [pa, shared, p](Node& self) {
    Matrix g(self.grad.rows(), self.grad.cols());
    for (std::size_t k = 0; k < shared->size(); ++k) {
      const auto off = static_cast<Eigen::Index>(k) * p;
      g.middleRows(off, p).noalias() = (*shared)[k].transpose() * self.grad.middleRows(off, p);
    }
    accumulate(pa, g);
  });
}

Tensor sparse_matmul(std::shared_ptr<const SparseRowMatrix> a, const Tensor& b) {
  if (a->cols() != b.rows()) {
    throw DimensionError("sparse_matmul: shape mismatch [" + std::to_string(a->rows()) + "x" +
                         std::to_string(a->cols()) + "] vs " + shape_string(b));
  }
  auto pb = b.node();
  Matrix out = (*a) * b.value();
  return make_result(std::move(out), "sparse_matmul", {pb}, [a, pb](Node& self) {
    accumulate(pb, Matrix(a->transpose() * self.grad));
  });
}

Tensor block_mean_rows(const Tensor& a, Eigen::Index block_rows) {
  if (block_rows < 1 || a.rows() % block_rows != 0) {
    throw DimensionError("block_mean_rows: " + shape_string(a) + " not divisible into blocks of " +
                         std::to_string(block_rows));
  }
  const auto blocks = a.rows() / block_rows;
  auto pa = a.node();
  Matrix out(blocks, a.cols());
  for (Eigen::Index k = 0; k < blocks; ++k) {
    out.row(k) = a.value().middleRows(k * block_rows, block_rows).colwise().mean();
  }
  return make_result(std::move(out), "block_mean_rows", {pa}, [pa, block_rows](Node& self) {
    Matrix g(pa->value.rows(), pa->value.cols());
    for (Eigen::Index k = 0; k < self.grad.rows(); ++k) {
      g.middleRows(k * block_rows, block_rows) =
          self.grad.row(k).replicate(block_rows, 1) / static_cast<double>(block_rows);
    }
    accumulate(pa, g);
  });
}

Tensor block_tail_flatten(const Tensor& a, Eigen::Index block_rows) {
  if (block_rows < 2 || a.rows() % block_rows != 0) {
    throw DimensionError("block_tail_flatten: " + shape_string(a) + " with blocks of " +
                         std::to_string(block_rows));
  }
  const auto blocks = a.rows() / block_rows;
  const auto d = a.cols();
  auto pa = a.node();
  Matrix out(blocks, (block_rows - 1) * d);
  for (Eigen::Index k = 0; k < blocks; ++k) {
    for (Eigen::Index r = 1; r < block_rows; ++r) {
      out.block(k, (r - 1) * d, 1, d) = a.value().row(k * block_rows + r);
    }
  }
  return make_result(std::move(out), "block_tail_flatten", {pa}, [pa, block_rows, d](Node& self) {
    Matrix g = Matrix::Zero(pa->value.rows(), pa->value.cols());
    for (Eigen::Index k = 0; k < self.grad.rows(); ++k) {
      for (Eigen::Index r = 1; r < block_rows; ++r) {
        g.row(k * block_rows + r) = self.grad.block(k, (r - 1) * d, 1, d);
      }
    }
    accumulate(pa, g);
  });
}

void backward(const Tensor& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw UsageError("backward needs a scalar loss, got " + shape_string(loss));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order of the tape.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  Node* root = loss.node().get();
  if (root->grad.size() == 0) {
    root->grad = Matrix::Ones(1, 1);
  } else {
    root->grad.array() += 1.0;
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->grad.size() != 0) node->backward(*node);
  }
  for (Node* node : order) {
    if (node->grad.size() != 0 && !node->grad.allFinite()) {
      throw NumericalError(std::string("non-finite gradient at ") + node->op);
    }
  }
}

void adam_step(std::span<Matrix* const> values, std::span<const Matrix> grads, AdamState& state) {
  if (values.size() != grads.size()) throw DimensionError("adam_step: values/grads count mismatch");
  if (state.first_moment.empty()) {
    for (const Matrix* v : values) {
      state.first_moment.push_back(Matrix::Zero(v->rows(), v->cols()));
      state.second_moment.push_back(Matrix::Zero(v->rows(), v->cols()));
    }
  }
  if (state.first_moment.size() != values.size()) throw DimensionError("adam_step: state/params count mismatch");
  ++state.step_count;
  const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < values.size(); ++i) {
    Matrix& value = *values[i];
    const Matrix& g = grads[i];
    if (g.rows() != value.rows() || g.cols() != value.cols() ||
        state.first_moment[i].rows() != value.rows() || state.first_moment[i].cols() != value.cols()) {
      throw DimensionError("adam_step: shape mismatch for parameter " + std::to_string(i));
    }
    auto m = state.first_moment[i].array();
    auto v = state.second_moment[i].array();
    m = state.beta1 * m + (1.0 - state.beta1) * g.array();
    v = state.beta2 * v + (1.0 - state.beta2) * g.array().square();
    value.array() -= state.lr * (m / bias1) / ((v / bias2).sqrt() + state.epsilon);
  }
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  std::vector<Matrix*> values;
  std::vector<Matrix> grads;
  for (auto& p : params) {
    values.push_back(&p.mutable_value());
    grads.push_back(p.has_grad() ? p.grad() : Matrix::Zero(p.rows(), p.cols()));
  }
  adam_step(values, grads, state);
}

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

void save_checkpoint(std::span<const NamedMatrix> params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  write_pod(out, kCheckpointVersion);
  write_pod(out, static_cast<std::uint64_t>(params.size()));
  for (const auto& [name, m] : params) {
    write_pod(out, static_cast<std::uint64_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(out, static_cast<std::uint64_t>(m.rows()));
    write_pod(out, static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<NamedMatrix> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kCheckpointMagic) throw ParseError("not a checkpoint: " + path.string());
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = read_pod<std::uint64_t>(in, path);
  std::vector<NamedMatrix> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = read_pod<std::uint64_t>(in, path);
    if (len > 4096) throw ParseError("corrupt checkpoint name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(len))) throw ParseError("truncated checkpoint");
    const auto rows = static_cast<Eigen::Index>(read_pod<std::uint64_t>(in, path));
    const auto cols = static_cast<Eigen::Index>(read_pod<std::uint64_t>(in, path));
    Matrix m(rows, cols);
    if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)))) {
      throw ParseError("truncated checkpoint " + path.string());
    }
    out.emplace_back(std::move(name), std::move(m));
  }
  return out;
}

}  // namespace subcr::nn
