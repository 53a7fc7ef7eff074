#include "subcr/diffusion.hpp"

#include "subcr/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

namespace subcr {

namespace {

constexpr std::array<char, 8> kCacheMagic{'S', 'U', 'B', 'C', 'R', 'D', 'I', 'F'};
constexpr std::uint32_t kCacheVersion = 1;

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("teleport probability must lie in (0, 1), got " + std::to_string(alpha));
  }
}

/// Indices of the k largest entries (ties to lower index) plus `diagonal`.
std::vector<std::int64_t> top_entries(std::span<const std::int64_t> cols,
                                      std::span<const double> vals, std::int64_t k,
                                      std::int64_t diagonal) {
  std::vector<std::size_t> order(cols.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (vals[a] != vals[b]) return vals[a] > vals[b];
                      return cols[a] < cols[b];
                    });
  std::vector<std::int64_t> kept;
  kept.reserve(keep + 1);
  bool has_diag = false;
  for (std::size_t i = 0; i < keep; ++i) {
    kept.push_back(static_cast<std::int64_t>(order[i]));
    has_diag = has_diag || cols[order[i]] == diagonal;
  }
  if (!has_diag) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (cols[i] == diagonal) kept.push_back(static_cast<std::int64_t>(i));
    }
  }
  std::sort(kept.begin(), kept.end(), [&](auto a, auto b) { return cols[a] < cols[b]; });
  return kept;
}

/// Appends the truncated dense column `column` (global index j) as row j.
void push_topk_row(const Eigen::Ref<const Eigen::VectorXd>& column, std::int64_t j, std::int64_t k,
                   std::vector<Eigen::Triplet<double, std::int64_t>>& triplets) {
  std::vector<std::int64_t> cols;
  std::vector<double> vals;
  for (Eigen::Index i = 0; i < column.size(); ++i) {
    if (column[i] != 0.0) {
      cols.push_back(i);
      vals.push_back(column[i]);
    }
  }
  for (auto idx : top_entries(cols, vals, k, j)) triplets.emplace_back(j, cols[idx], vals[idx]);
}

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw ParseError("truncated diffusion cache " + path.string());
  }
  return value;
}

}  // namespace

DiffusionMatrix::DiffusionMatrix(RowMatrix dense, double alpha)
    : storage_(std::move(dense)), alpha_(alpha) {}

DiffusionMatrix::DiffusionMatrix(SparseRowMatrix sparse, double alpha, std::int64_t truncation)
    : storage_(std::move(sparse)), alpha_(alpha), truncation_(truncation) {}

NodeId DiffusionMatrix::size() const {
  return std::visit([](const auto& m) { return static_cast<NodeId>(m.rows()); }, storage_);
}

double DiffusionMatrix::value(NodeId row, NodeId col) const {
  if (const auto* d = std::get_if<RowMatrix>(&storage_)) return (*d)(row, col);
  const auto& s = std::get<SparseRowMatrix>(storage_);
  const auto begin = s.outerIndexPtr()[row];
  const auto end = s.outerIndexPtr()[row + 1];
  const auto* inner = s.innerIndexPtr();
  const auto* it = std::lower_bound(inner + begin, inner + end, col);
  if (it == inner + end || *it != col) return 0.0;
  return s.valuePtr()[it - inner];
}

RowMatrix DiffusionMatrix::block(std::span<const NodeId> ids) const {
  const auto p = static_cast<Eigen::Index>(ids.size());
  RowMatrix out(p, p);
  for (Eigen::Index a = 0; a < p; ++a) {
    for (Eigen::Index b = a; b < p; ++b) {
      const double v = std::max(value(ids[a], ids[b]), value(ids[b], ids[a]));
      out(a, b) = v;
      out(b, a) = v;
    }
  }
  return out;
}

RowMatrix DiffusionMatrix::to_dense() const {
  if (const auto* d = std::get_if<RowMatrix>(&storage_)) return *d;
  return RowMatrix(std::get<SparseRowMatrix>(storage_));
}

SparseRowMatrix transition_matrix(const AttributedGraph& g) {
  const NodeId n = g.num_nodes();
  std::vector<double> inv_sqrt(static_cast<std::size_t>(n));
  for (NodeId i = 0; i < n; ++i) {
    const auto d = g.degree(i);
    inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(d == 0 ? 1 : d));
  }
  std::vector<Eigen::Triplet<double, std::int64_t>> triplets;
  triplets.reserve(static_cast<std::size_t>(2 * g.num_edges() + n));
  for (NodeId i = 0; i < n; ++i) {
    if (g.degree(i) == 0) {
      triplets.emplace_back(i, i, 1.0);
      continue;
    }
    for (NodeId j : g.neighbors(i)) triplets.emplace_back(i, j, inv_sqrt[i] * inv_sqrt[j]);
  }
  SparseRowMatrix t(n, n);
  t.setFromTriplets(triplets.begin(), triplets.end());
  return t;
}

DiffusionMatrix compute_ppr(const AttributedGraph& g, double alpha, NodeId max_nodes) {
  check_alpha(alpha);
  const NodeId n = g.num_nodes();
  if (n > max_nodes) {
    throw CapacityError("dense diffusion limited to " + std::to_string(max_nodes) + " nodes (graph has " +
                        std::to_string(n) + "); use the iterative path with top-k truncation");
  }
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
  system -= (1.0 - alpha) * Eigen::MatrixXd(transition_matrix(g));

  Eigen::MatrixXd inverse;
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() == Eigen::Success) {
    inverse = llt.solve(Eigen::MatrixXd::Identity(n, n));
  } else {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
    if (!lu.isInvertible()) throw NumericalError("diffusion system is singular");
    inverse = lu.inverse();
  }
  RowMatrix s = alpha * 0.5 * (inverse + inverse.transpose());
  if (!s.allFinite()) throw NumericalError("diffusion produced non-finite values");
  return DiffusionMatrix(std::move(s), alpha);
}

DiffusionMatrix compute_ppr_iterative(const AttributedGraph& g, double alpha,
                                      const IterativeOptions& options) {
  check_alpha(alpha);
  if (!(options.tol > 0.0)) throw ConfigError("tolerance must be positive");
  if (options.top_k && *options.top_k < 1) throw ConfigError("top-k must be >= 1");
  const NodeId n = g.num_nodes();
  const SparseRowMatrix t = transition_matrix(g);
  const NodeId block = std::max<NodeId>(1, options.block_size);

  RowMatrix dense;
  std::vector<Eigen::Triplet<double, std::int64_t>> triplets;
  if (!options.top_k) dense.resize(n, n);

  for (NodeId start = 0; start < n; start += block) {
    const NodeId width = std::min(block, n - start);
    RowMatrix x = RowMatrix::Zero(n, width);
    for (NodeId c = 0; c < width; ++c) x(start + c, c) = alpha;
    RowMatrix next(n, width);
    double change = std::numeric_limits<double>::infinity();
    int iter = 0;
    while (change >= options.tol) {
      if (iter == options.max_iter) {
        throw ConvergenceError("power iteration did not converge in " +
                                   std::to_string(options.max_iter) + " iterations (residual " +
                                   std::to_string(change) + ")",
                               change);
      }
      next.noalias() = (1.0 - alpha) * (t * x);
      for (NodeId c = 0; c < width; ++c) next(start + c, c) += alpha;
      change = (next - x).cwiseAbs().maxCoeff();
      x.swap(next);
      ++iter;
    }
    if (!x.allFinite()) throw NumericalError("diffusion produced non-finite values");
    // Column j of S equals row j because T is symmetric.
    if (options.top_k) {
      for (NodeId c = 0; c < width; ++c) push_topk_row(x.col(c), start + c, *options.top_k, triplets);
    } else {
      dense.middleRows(start, width) = x.transpose();
    }
  }
  if (!options.top_k) return DiffusionMatrix(std::move(dense), alpha);
  SparseRowMatrix s(n, n);
  s.setFromTriplets(triplets.begin(), triplets.end());
  return DiffusionMatrix(std::move(s), alpha, *options.top_k);
}

DiffusionMatrix ppr_truncated_series(const AttributedGraph& g, double alpha, int steps) {
  check_alpha(alpha);
  const NodeId n = g.num_nodes();
  const SparseRowMatrix t = transition_matrix(g);
  Eigen::MatrixXd term = alpha * Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd sum = term;
  for (int k = 1; k <= steps; ++k) {
    term = (1.0 - alpha) * (t * term);
    sum += term;
  }
  return DiffusionMatrix(RowMatrix(sum), alpha);
}

DiffusionMatrix sparsify_topk(const DiffusionMatrix& s, std::int64_t k) {
  if (k < 1) throw ConfigError("top-k must be >= 1");
  const NodeId n = s.size();
  std::vector<Eigen::Triplet<double, std::int64_t>> triplets;
  if (!s.is_sparse()) {
    const auto& d = s.dense();
    for (NodeId i = 0; i < n; ++i) push_topk_row(d.row(i).transpose(), i, k, triplets);
  } else {
    const auto& m = s.sparse();
    for (NodeId i = 0; i < n; ++i) {
      const auto begin = m.outerIndexPtr()[i];
      const auto end = m.outerIndexPtr()[i + 1];
      std::span<const std::int64_t> cols(m.innerIndexPtr() + begin, m.innerIndexPtr() + end);
      std::span<const double> vals(m.valuePtr() + begin, m.valuePtr() + end);
      for (auto idx : top_entries(cols, vals, k, i)) triplets.emplace_back(i, cols[idx], vals[idx]);
    }
  }
  SparseRowMatrix out(n, n);
  out.setFromTriplets(triplets.begin(), triplets.end());
  const auto previous = s.truncation();
  return DiffusionMatrix(std::move(out), s.alpha(), previous ? std::min(*previous, k) : k);
}

void save_diffusion(const DiffusionMatrix& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write diffusion cache " + path.string());
  out.write(kCacheMagic.data(), kCacheMagic.size());
  write_pod(out, kCacheVersion);
  write_pod(out, static_cast<std::uint32_t>(s.is_sparse() ? 1 : 0));
  write_pod(out, static_cast<std::uint64_t>(s.size()));
  write_pod(out, s.alpha());
  write_pod(out, static_cast<std::uint64_t>(s.truncation().value_or(0)));
  if (!s.is_sparse()) {
    const auto& d = s.dense();
    out.write(reinterpret_cast<const char*>(d.data()),
              static_cast<std::streamsize>(d.size() * sizeof(double)));
  } else {
    const auto& m = s.sparse();
    for (NodeId i = 0; i < m.rows(); ++i) {
      const auto begin = m.outerIndexPtr()[i];
      const auto end = m.outerIndexPtr()[i + 1];
      write_pod(out, static_cast<std::uint64_t>(end - begin));
      for (auto p = begin; p < end; ++p) {
        write_pod(out, static_cast<std::uint64_t>(m.innerIndexPtr()[p]));
        write_pod(out, m.valuePtr()[p]);
      }
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

DiffusionMatrix load_diffusion(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open diffusion cache " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kCacheMagic) throw ParseError("not a diffusion cache: " + path.string());
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kCacheVersion) {
    throw ParseError("unsupported diffusion cache version " + std::to_string(version));
  }
  const auto format = read_pod<std::uint32_t>(in, path);
  const auto n = static_cast<NodeId>(read_pod<std::uint64_t>(in, path));
  const auto alpha = read_pod<double>(in, path);
  const auto truncation = static_cast<std::int64_t>(read_pod<std::uint64_t>(in, path));
  if (format == 0) {
    RowMatrix d(n, n);
    if (!in.read(reinterpret_cast<char*>(d.data()), static_cast<std::streamsize>(d.size() * sizeof(double)))) {
      throw ParseError("truncated diffusion cache " + path.string());
    }
    return DiffusionMatrix(std::move(d), alpha);
  }
  if (format != 1) throw ParseError("unknown diffusion cache format");
  std::vector<Eigen::Triplet<double, std::int64_t>> triplets;
  for (NodeId i = 0; i < n; ++i) {
    const auto nnz = read_pod<std::uint64_t>(in, path);
    for (std::uint64_t p = 0; p < nnz; ++p) {
      const auto col = static_cast<std::int64_t>(read_pod<std::uint64_t>(in, path));
      const auto val = read_pod<double>(in, path);
      if (col < 0 || col >= n) throw ParseError("diffusion cache column out of range");
      triplets.emplace_back(i, col, val);
    }
  }
  SparseRowMatrix s(n, n);
  s.setFromTriplets(triplets.begin(), triplets.end());
  return DiffusionMatrix(std::move(s), alpha, truncation);
}

}  // namespace subcr
