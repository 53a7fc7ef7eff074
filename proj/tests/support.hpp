#pragma once

#include "subcr/graph.hpp"
#include "subcr/rng.hpp"

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace subcr::testing {

inline RowMatrix zeros(Eigen::Index n, Eigen::Index f) { return RowMatrix::Zero(n, f); }

inline AttributedGraph two_node_graph(Eigen::Index features = 2) {
  const Edge e{0, 1};
  return AttributedGraph::build(2, {&e, 1}, zeros(2, features));
}

inline AttributedGraph triangle() {
  const std::vector<Edge> edges{{0, 1}, {1, 2}, {0, 2}};
  RowMatrix x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  return AttributedGraph::build(3, edges, x);
}

/// Erdos-Renyi graph with Gaussian-ish uniform attributes.
inline AttributedGraph random_graph(NodeId n, double p, Eigen::Index features, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Edge> edges;
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = i + 1; j < n; ++j) {
      if (rng.bernoulli(p)) edges.emplace_back(i, j);
    }
  }
  RowMatrix x(n, features);
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = rng.uniform(-1.0, 1.0);
  return AttributedGraph::build(n, edges, x);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("subcr_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace subcr::testing
