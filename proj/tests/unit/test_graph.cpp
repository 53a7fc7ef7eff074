#include "subcr/error.hpp"
#include "subcr/graph.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace subcr;
using namespace subcr::testing;

TEST_CASE("load_graph reads a triangle") {
  const auto dir = temp_dir("triangle");
  write_text(dir / "edges.txt", "# triangle\n0 1\n1\t2\n0 2\n");
  write_text(dir / "attrs.csv", "1,2\n3,4\n5,6\n");
  const auto g = load_graph(dir / "edges.txt", dir / "attrs.csv");
  CHECK(g.num_nodes() == 3);
  CHECK(g.num_edges() == 3);
  CHECK(g.num_features() == 2);
  CHECK(g.has_edge(2, 1));
  CHECK(g.attributes()(2, 1) == 6.0);
  CHECK_FALSE(g.labels().has_value());
}

TEST_CASE("duplicate and reversed edges collapse to one undirected edge") {
  const auto dir = temp_dir("dupes");
  write_text(dir / "edges.txt", "0 1\n0 1\n1 0\n");
  write_text(dir / "attrs.csv", "0\n0\n");
  const auto g = load_graph(dir / "edges.txt", dir / "attrs.csv");
  CHECK(g.num_edges() == 1);
  CHECK(g.degree(0) == 1);
  CHECK(g.degree(1) == 1);
}

TEST_CASE("self-loops are not stored") {
  const std::vector<Edge> edges{{0, 0}, {0, 1}};
  const auto g = AttributedGraph::build(2, edges, zeros(2, 1));
  CHECK(g.num_edges() == 1);
  CHECK_FALSE(g.has_edge(0, 0));
}

TEST_CASE("load errors") {
  const auto dir = temp_dir("errors");
  write_text(dir / "attrs.csv", "1,2\n3,4\n");

  SUBCASE("node id out of range names the line") {
    write_text(dir / "edges.txt", "0 1\n# c\n1 7\n");
    try {
      load_graph(dir / "edges.txt", dir / "attrs.csv");
      FAIL("expected MalformedInput");
    } catch (const MalformedInput& e) {
      CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
  }
  SUBCASE("non-numeric attribute") {
    write_text(dir / "edges.txt", "0 1\n");
    write_text(dir / "bad.csv", "1,2\n3,abc\n");
    CHECK_THROWS_AS(load_graph(dir / "edges.txt", dir / "bad.csv"), ParseError);
  }
  SUBCASE("label length mismatch") {
    write_text(dir / "edges.txt", "0 1\n");
    write_text(dir / "labels.txt", "0\n1\n0\n");
    CHECK_THROWS_AS(load_graph(dir / "edges.txt", dir / "attrs.csv", dir / "labels.txt"), DimensionError);
  }
  SUBCASE("ragged attribute rows") {
    write_text(dir / "edges.txt", "0 1\n");
    write_text(dir / "ragged.csv", "1,2\n3\n");
    CHECK_THROWS_AS(load_graph(dir / "edges.txt", dir / "ragged.csv"), MalformedInput);
  }
  SUBCASE("missing attribute file is an IO error") {
    write_text(dir / "edges.txt", "0 1\n");
    CHECK_THROWS_AS(load_graph(dir / "edges.txt", dir / "nope.csv"), IoError);
  }
  SUBCASE("labels must be binary") {
    write_text(dir / "edges.txt", "0 1\n");
    write_text(dir / "labels.txt", "0\n2\n");
    CHECK_THROWS_AS(load_graph(dir / "edges.txt", dir / "attrs.csv", dir / "labels.txt"), ParseError);
  }
}

TEST_CASE("sym_norm_adjacency hand examples") {
  SUBCASE("two nodes with self-loops: every entry 1/sqrt(2*2)") {
    const auto a = sym_norm_adjacency(two_node_graph(), std::nullopt, true);
    const RowMatrix d(a.matrix);
    CHECK(d.isApproxToConstant(0.5, 0.0));
  }
  SUBCASE("no edges with self-loops is the identity") {
    const auto g = AttributedGraph::build(4, {}, zeros(4, 1));
    const RowMatrix d(sym_norm_adjacency(g, std::nullopt, true).matrix);
    CHECK(d == RowMatrix::Identity(4, 4));
  }
  SUBCASE("triangle with self-loops: degree 3 everywhere") {
    const RowMatrix d(sym_norm_adjacency(triangle(), std::nullopt, true).matrix);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) CHECK(d(i, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }
  }
  SUBCASE("isolated nodes without self-loops are flagged") {
    const Edge e{0, 1};
    const auto g = AttributedGraph::build(3, {&e, 1}, zeros(3, 1));
    const auto a = sym_norm_adjacency(g, std::nullopt, false);
    REQUIRE(a.zero_rows.size() == 1);
    CHECK(a.zero_rows[0] == 2);
    CHECK(RowMatrix(a.matrix).row(2).isZero());
  }
  SUBCASE("subset gives the induced subgraph in subset order") {
    // Path 0-1-2-3; subset {2, 1} induces a single edge.
    const std::vector<Edge> edges{{0, 1}, {1, 2}, {2, 3}};
    const auto g = AttributedGraph::build(4, edges, zeros(4, 1));
    const std::vector<NodeId> subset{2, 1};
    const RowMatrix d(sym_norm_adjacency(g, std::span<const NodeId>(subset), true).matrix);
    CHECK(d.rows() == 2);
    CHECK(d.isApproxToConstant(0.5, 0.0));
  }
  SUBCASE("subset precondition") {
    const std::vector<NodeId> dup{0, 0};
    CHECK_THROWS_AS(sym_norm_adjacency(triangle(), std::span<const NodeId>(dup), true), DimensionError);
  }
}

TEST_CASE("sym_norm_adjacency properties on random graphs") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = random_graph(30, 0.15, 1, seed);
    for (bool loops : {false, true}) {
      const RowMatrix d(sym_norm_adjacency(g, std::nullopt, loops).matrix);
      CHECK(d == d.transpose());  // bit-for-bit
      std::int64_t max_degree = 0;
      for (NodeId v = 0; v < g.num_nodes(); ++v) max_degree = std::max(max_degree, g.degree(v));
      const Eigen::VectorXd row_sums = d.rowwise().sum();
      CHECK(row_sums.maxCoeff() <= std::sqrt(static_cast<double>(max_degree + (loops ? 1 : 0))) + 1e-12);
      CHECK((d.array() >= 0.0).all());
      CHECK((d.array() <= 1.0).all());
    }
  }
}

TEST_CASE("k-regular graph with self-loops normalizes to 1/(k+1)") {
  // Cycle of 7 nodes is 2-regular.
  std::vector<Edge> edges;
  for (NodeId i = 0; i < 7; ++i) edges.emplace_back(i, (i + 1) % 7);
  const auto g = AttributedGraph::build(7, edges, zeros(7, 1));
  const auto a = sym_norm_adjacency(g, std::nullopt, true);
  for (Eigen::Index k = 0; k < a.matrix.outerSize(); ++k) {
    for (SparseRowMatrix::InnerIterator it(a.matrix, k); it; ++it) {
      CHECK(it.value() == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }
  }
  CHECK(a.matrix.nonZeros() == 21);
}

TEST_CASE("export then reload reproduces the graph") {
  const auto dir = temp_dir("roundtrip");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto g = random_graph(25, 0.2, 3, seed);
    std::vector<std::uint8_t> labels(25, 0);
    labels[seed] = 1;
    g = g.with_labels(labels);
    export_graph(g, dir / "e.txt", dir / "x.csv", dir / "y.txt");
    const auto back = load_graph(dir / "e.txt", dir / "x.csv", dir / "y.txt");
    CHECK(back == g);
  }
}

TEST_CASE("export ordering is ascending") {
  const auto dir = temp_dir("order");
  const std::vector<Edge> edges{{2, 0}, {1, 0}, {2, 1}};
  const auto g = AttributedGraph::build(3, edges, zeros(3, 1));
  write_edge_list(g, dir / "e.txt");
  CHECK(read_text(dir / "e.txt") == "0 1\n0 2\n1 2\n");
}

TEST_CASE("remap_edge_list densifies sparse ids") {
  const auto dir = temp_dir("remap");
  write_text(dir / "raw.txt", "100 7\n7 35\n");
  CHECK(remap_edge_list(dir / "raw.txt", dir / "dense.txt", dir / "map.txt") == 3);
  CHECK(read_text(dir / "dense.txt") == "2 0\n0 1\n");
  CHECK(read_text(dir / "map.txt") == "0 7\n1 35\n2 100\n");
}

TEST_CASE("binarize_attributes") {
  const auto g = binarize_attributes(triangle().with_attributes((RowMatrix(3, 2) << 0, 2.5, -1, 0, 0, 0).finished()));
  CHECK(g.attributes() == (RowMatrix(3, 2) << 0, 1, 1, 0, 0, 0).finished());
}
