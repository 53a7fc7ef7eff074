#include "subcr/graph.hpp"

#include "subcr/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>

namespace subcr {

namespace {

struct NumberedEdge {
  Edge edge;
  std::size_t line;
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

template <typename T>
bool parse_number(std::string_view token, T& value) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, value);
  return ec == std::errc{} && ptr == end && !token.empty();
}

std::vector<NumberedEdge> parse_edges(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<NumberedEdge> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    std::istringstream fields{std::string(body)};
    std::string a, b, extra;
    NodeId u = 0, v = 0;
    if (!(fields >> a >> b) || (fields >> extra) || !parse_number(a, u) || !parse_number(b, v)) {
      throw MalformedInput(path.string() + ":" + std::to_string(line_no) +
                           ": expected two integer node ids");
    }
    if (u < 0 || v < 0) {
      throw MalformedInput(path.string() + ":" + std::to_string(line_no) + ": negative node id");
    }
    edges.push_back({{u, v}, line_no});
  }
  return edges;
}

void check_attributes(const RowMatrix& x) {
  if (!x.allFinite()) throw DimensionError("attribute matrix contains non-finite values");
}

}  // namespace

AttributedGraph AttributedGraph::build(NodeId num_nodes, std::span<const Edge> edges,
                                       RowMatrix attributes,
                                       std::optional<std::vector<std::uint8_t>> labels) {
  if (num_nodes < 0) throw DimensionError("negative node count");
  if (attributes.rows() != num_nodes) {
    throw DimensionError("attribute rows (" + std::to_string(attributes.rows()) +
                         ") != node count (" + std::to_string(num_nodes) + ")");
  }
  check_attributes(attributes);
  if (labels) {
    if (static_cast<NodeId>(labels->size()) != num_nodes) {
      throw DimensionError("label count (" + std::to_string(labels->size()) +
                           ") != node count (" + std::to_string(num_nodes) + ")");
    }
    for (auto l : *labels) {
      if (l > 1) throw DimensionError("labels must be 0 or 1");
    }
  }

  std::vector<Edge> directed;
  directed.reserve(edges.size() * 2);
  for (const auto& [u, v] : edges) {
    if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes) {
      throw MalformedInput("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                           ") references a node outside [0, " + std::to_string(num_nodes) + ")");
    }
    if (u == v) continue;
    directed.emplace_back(u, v);
    directed.emplace_back(v, u);
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

  AttributedGraph g;
  g.offsets_.assign(static_cast<std::size_t>(num_nodes) + 1, 0);
  g.neighbors_.reserve(directed.size());
  for (const auto& [u, v] : directed) {
    ++g.offsets_[u + 1];
    g.neighbors_.push_back(v);
  }
  for (NodeId i = 0; i < num_nodes; ++i) g.offsets_[i + 1] += g.offsets_[i];
  g.attributes_ = std::move(attributes);
  g.labels_ = std::move(labels);
  return g;
}

bool AttributedGraph::has_edge(NodeId u, NodeId v) const {
  const auto n = neighbors(u);
  return std::binary_search(n.begin(), n.end(), v);
}

double AttributedGraph::average_degree() const {
  return num_nodes() == 0 ? 0.0
                          : static_cast<double>(neighbors_.size()) / static_cast<double>(num_nodes());
}

std::vector<Edge> AttributedGraph::edge_list() const {
  std::vector<Edge> out;
  out.reserve(neighbors_.size() / 2);
  for (NodeId u = 0; u < num_nodes(); ++u) {
    for (NodeId v : neighbors(u)) {
      if (u < v) out.emplace_back(u, v);
    }
  }
  return out;
}

AttributedGraph AttributedGraph::with_attributes(RowMatrix attributes) const {
  if (attributes.rows() != num_nodes()) throw DimensionError("attribute rows != node count");
  check_attributes(attributes);
  AttributedGraph g = *this;
  g.attributes_ = std::move(attributes);
  return g;
}

AttributedGraph AttributedGraph::with_labels(std::optional<std::vector<std::uint8_t>> labels) const {
  const auto edges = edge_list();
  return build(num_nodes(), edges, attributes_, std::move(labels));
}

AttributedGraph AttributedGraph::with_edges(std::span<const Edge> extra_edges) const {
  auto edges = edge_list();
  edges.insert(edges.end(), extra_edges.begin(), extra_edges.end());
  return build(num_nodes(), edges, attributes_, labels_);
}

bool AttributedGraph::operator==(const AttributedGraph& other) const {
  return offsets_ == other.offsets_ && neighbors_ == other.neighbors_ &&
         attributes_.rows() == other.attributes_.rows() &&
         attributes_.cols() == other.attributes_.cols() && attributes_ == other.attributes_ &&
         labels_ == other.labels_;
}

NormalizedAdjacency sym_norm_adjacency(const AttributedGraph& g,
                                       std::optional<std::span<const NodeId>> node_subset,
                                       bool add_self_loops) {
  std::vector<NodeId> nodes;
  if (node_subset) {
    nodes.assign(node_subset->begin(), node_subset->end());
  } else {
    nodes.resize(static_cast<std::size_t>(g.num_nodes()));
    for (NodeId i = 0; i < g.num_nodes(); ++i) nodes[i] = i;
  }
  const auto n = static_cast<NodeId>(nodes.size());

  // Position of each global node inside the subset, -1 when absent.
  std::vector<NodeId> position;
  if (node_subset) {
    position.assign(static_cast<std::size_t>(g.num_nodes()), -1);
    for (NodeId k = 0; k < n; ++k) {
      const NodeId v = nodes[k];
      if (v < 0 || v >= g.num_nodes()) throw DimensionError("subset index out of range");
      if (position[v] != -1) throw DimensionError("subset indices must be distinct");
      position[v] = k;
    }
  }

  std::vector<std::vector<NodeId>> cols(static_cast<std::size_t>(n));
  std::vector<double> degree(static_cast<std::size_t>(n), add_self_loops ? 1.0 : 0.0);
  for (NodeId k = 0; k < n; ++k) {
    for (NodeId w : g.neighbors(nodes[k])) {
      const NodeId j = node_subset ? position[w] : w;
      if (j >= 0) cols[k].push_back(j);
    }
    if (add_self_loops) cols[k].push_back(k);
    std::sort(cols[k].begin(), cols[k].end());
    degree[k] += static_cast<double>(cols[k].size()) - (add_self_loops ? 1.0 : 0.0);
  }

  NormalizedAdjacency out;
  out.self_loops_added = add_self_loops;
  out.matrix.resize(n, n);
  std::vector<Eigen::Triplet<double, std::int64_t>> triplets;
  for (NodeId k = 0; k < n; ++k) {
    if (cols[k].empty()) out.zero_rows.push_back(nodes[k]);
    for (NodeId j : cols[k]) {
      // sqrt of the product keeps (k, j) and (j, k) bit-identical.
      triplets.emplace_back(k, j, 1.0 / std::sqrt(degree[k] * degree[j]));
    }
  }
  out.matrix.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

AttributedGraph binarize_attributes(const AttributedGraph& g) {
  RowMatrix x = (g.attributes().array() != 0.0).cast<double>();
  return g.with_attributes(std::move(x));
}

std::vector<Edge> read_edge_list(const std::filesystem::path& path) {
  std::vector<Edge> out;
  for (const auto& e : parse_edges(path)) out.push_back(e.edge);
  return out;
}

RowMatrix read_attributes(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  Eigen::Index cols = -1;
  Eigen::Index rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty()) continue;
    Eigen::Index count = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = body.find(',', start);
      const auto cell = body.substr(start, comma == std::string_view::npos ? body.npos : comma - start);
      double value = 0.0;
      if (!parse_number(cell, value)) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": non-numeric cell '" +
                         std::string(trim(cell)) + "'");
      }
      if (!std::isfinite(value)) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": non-finite value");
      }
      values.push_back(value);
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (cols == -1) cols = count;
    if (count != cols) {
      throw MalformedInput(path.string() + ":" + std::to_string(line_no) + ": expected " +
                           std::to_string(cols) + " columns, found " + std::to_string(count));
    }
    ++rows;
  }
  if (cols == -1) cols = 0;
  RowMatrix x(rows, cols);
  std::copy(values.begin(), values.end(), x.data());
  return x;
}

std::vector<std::uint8_t> read_labels(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::uint8_t> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    int value = -1;
    if (!parse_number(body, value) || (value != 0 && value != 1)) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": label must be 0 or 1");
    }
    labels.push_back(static_cast<std::uint8_t>(value));
  }
  return labels;
}

AttributedGraph load_graph(const std::filesystem::path& edge_list_path,
                           const std::filesystem::path& attributes_path,
                           const std::optional<std::filesystem::path>& labels_path) {
  if (!std::filesystem::exists(attributes_path)) {
    throw IoError("attribute file not found: " + attributes_path.string());
  }
  if (!std::filesystem::exists(edge_list_path)) {
    throw IoError("edge list not found: " + edge_list_path.string());
  }
  RowMatrix x = read_attributes(attributes_path);
  const NodeId n = x.rows();
  const auto numbered = parse_edges(edge_list_path);
  std::vector<Edge> edges;
  edges.reserve(numbered.size());
  for (const auto& e : numbered) {
    if (e.edge.first >= n || e.edge.second >= n) {
      throw MalformedInput(edge_list_path.string() + ":" + std::to_string(e.line) + ": node id " +
                           std::to_string(std::max(e.edge.first, e.edge.second)) +
                           " out of range for " + std::to_string(n) + " nodes");
    }
    edges.push_back(e.edge);
  }
  std::optional<std::vector<std::uint8_t>> labels;
  if (labels_path) labels = read_labels(*labels_path);
  return AttributedGraph::build(n, edges, std::move(x), std::move(labels));
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void write_edge_list(const AttributedGraph& g, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& [u, v] : g.edge_list()) out << u << ' ' << v << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

void write_attributes(const RowMatrix& attributes, const std::filesystem::path& path) {
  auto out = open_output(path);
  std::string row;
  for (Eigen::Index i = 0; i < attributes.rows(); ++i) {
    row.clear();
    for (Eigen::Index j = 0; j < attributes.cols(); ++j) {
      if (j) row += ',';
      row += format_double(attributes(i, j));
    }
    row += '\n';
    out << row;
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_labels(std::span<const std::uint8_t> labels, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (auto l : labels) out << static_cast<int>(l) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

void export_graph(const AttributedGraph& g, const std::filesystem::path& edge_list_path,
                  const std::filesystem::path& attributes_path,
                  const std::optional<std::filesystem::path>& labels_path) {
  write_edge_list(g, edge_list_path);
  write_attributes(g.attributes(), attributes_path);
  if (labels_path && g.labels()) write_labels(*g.labels(), *labels_path);
}

NodeId remap_edge_list(const std::filesystem::path& in_path, const std::filesystem::path& out_path,
                       const std::filesystem::path& id_map_path) {
  const auto edges = read_edge_list(in_path);
  std::map<NodeId, NodeId> ids;
  for (const auto& [u, v] : edges) {
    ids.emplace(u, 0);
    ids.emplace(v, 0);
  }
  NodeId next = 0;
  for (auto& [original, dense] : ids) dense = next++;

  auto out = open_output(out_path);
  for (const auto& [u, v] : edges) out << ids.at(u) << ' ' << ids.at(v) << '\n';
  auto map_out = open_output(id_map_path);
  for (const auto& [original, dense] : ids) map_out << dense << ' ' << original << '\n';
  if (!out || !map_out) throw IoError("write failed: " + out_path.string());
  return next;
}

}  // namespace subcr
