#pragma once

// Reference computations written independently of the library code paths.

#include "subcr/graph.hpp"

#include <cmath>
#include <cstdint>
#include <span>

namespace subcr::testing {

/// Dense T = D^{-1/2} A D^{-1/2}, isolated nodes given a self-loop.
inline Eigen::MatrixXd dense_transition(const AttributedGraph& g) {
  const auto n = g.num_nodes();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [u, v] : g.edge_list()) {
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a.row(i).sum() == 0.0) a(i, i) = 1.0;
  }
  const Eigen::VectorXd inv_sqrt = a.rowwise().sum().array().rsqrt();
  return inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

/// sum_{k=0..K} alpha (1 - alpha)^k T^k.
inline Eigen::MatrixXd series_ppr(const AttributedGraph& g, double alpha, int steps) {
  const Eigen::MatrixXd t = dense_transition(g);
  const auto n = t.rows();
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(n, n);
  double coeff = alpha;
  for (int k = 0; k <= steps; ++k) {
    total += coeff * power;
    power = power * t;
    coeff *= 1.0 - alpha;
  }
  return total;
}

/// Pairwise AUC: count over positive x negative pairs, ties counted half.
/// Returned as the exact fraction numerator2 / (2 * pos * neg).
inline double brute_force_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  std::int64_t twice_wins = 0;
  std::int64_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) twice_wins += 2;
      else if (scores[i] == scores[j]) twice_wins += 1;
    }
  }
  return static_cast<double>(twice_wins) / static_cast<double>(2 * pairs);
}

/// Central finite difference of f at `x` along coordinate k.
template <typename F>
double central_difference(F&& f, Eigen::Ref<RowMatrix> x, Eigen::Index k, double h = 1e-5) {
  const double saved = x.data()[k];
  x.data()[k] = saved + h;
  const double up = f();
  x.data()[k] = saved - h;
  const double down = f();
  x.data()[k] = saved;
  return (up - down) / (2.0 * h);
}

}  // namespace subcr::testing
