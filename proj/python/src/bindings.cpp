#include "subcr/config.hpp"
#include "subcr/diffusion.hpp"
#include "subcr/error.hpp"
#include "subcr/eval.hpp"
#include "subcr/injector.hpp"
#include "subcr/pipeline.hpp"
#include "subcr/runner.hpp"
#include "subcr/synthetic.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace subcr;

namespace {

std::vector<Edge> edges_from_array(const Eigen::Ref<const Eigen::Matrix<NodeId, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>& a) {
  if (a.size() > 0 && a.cols() != 2) throw DimensionError("edges must have shape (E, 2)");
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) edges.emplace_back(a(i, 0), a(i, 1));
  return edges;
}

Eigen::Matrix<NodeId, Eigen::Dynamic, 2, Eigen::RowMajor> edges_to_array(const std::vector<Edge>& edges) {
  Eigen::Matrix<NodeId, Eigen::Dynamic, 2, Eigen::RowMajor> out(static_cast<Eigen::Index>(edges.size()), 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    out(static_cast<Eigen::Index>(i), 0) = edges[i].first;
    out(static_cast<Eigen::Index>(i), 1) = edges[i].second;
  }
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

py::dict report_to_dict(const ScoreReport& r) {
  py::dict d;
  d["contrastive"] = to_vector(r.contrastive);
  d["reconstruction"] = to_vector(r.reconstruction);
  d["combined"] = to_vector(r.combined);
  d["labels"] = r.labels;
  d["config_hash"] = r.config_hash;
  d["seed"] = r.seed;
  d["rounds"] = r.rounds;
  d["low_round"] = r.low_round;
  d["variant"] = to_string(r.variant);
  return d;
}

std::vector<std::uint8_t> to_labels(const std::vector<int>& labels) {
  std::vector<std::uint8_t> out;
  out.reserve(labels.size());
  for (const int v : labels) {
    if (v != 0 && v != 1) throw MalformedInput("labels must be 0 or 1");
    out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

const DiffusionMatrix* maybe(const std::optional<DiffusionMatrix>& s) { return s ? &*s : nullptr; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sub-CR graph anomaly detection";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<UsageError>(m, "UsageError", error.ptr());
  py::register_exception<IoError>(m, "IoError", error.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", error.ptr());
  py::register_exception<CapacityError>(m, "CapacityError", error.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", error.ptr());
  py::register_exception<UndefinedMetric>(m, "UndefinedMetric", error.ptr());

  py::class_<AttributedGraph>(m, "Graph")
      .def(py::init([](NodeId num_nodes,
                       const Eigen::Ref<const Eigen::Matrix<NodeId, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>& edges,
                       RowMatrix attributes, std::optional<std::vector<int>> labels) {
             std::optional<std::vector<std::uint8_t>> l;
             if (labels) l = to_labels(*labels);
             return AttributedGraph::build(num_nodes, edges_from_array(edges), std::move(attributes), std::move(l));
           }),
           py::arg("num_nodes"), py::arg("edges"), py::arg("attributes"), py::arg("labels") = py::none())
      .def_property_readonly("num_nodes", &AttributedGraph::num_nodes)
      .def_property_readonly("num_edges", &AttributedGraph::num_edges)
      .def_property_readonly("num_features", &AttributedGraph::num_features)
      .def_property_readonly("attributes", &AttributedGraph::attributes)
      .def_property_readonly("labels", &AttributedGraph::labels)
      .def("edges", [](const AttributedGraph& g) { return edges_to_array(g.edge_list()); },
           "Undirected edges as an (E, 2) array with u < v.")
      .def("neighbors", [](const AttributedGraph& g, NodeId v) {
        if (v < 0 || v >= g.num_nodes()) throw py::index_error("node id out of range");
        const auto n = g.neighbors(v);
        return std::vector<NodeId>(n.begin(), n.end());
      })
      .def("degree", &AttributedGraph::degree)
      .def("__eq__", &AttributedGraph::operator==)
      .def("__repr__", [](const AttributedGraph& g) {
        return "<Graph nodes=" + std::to_string(g.num_nodes()) + " edges=" + std::to_string(g.num_edges()) +
               " features=" + std::to_string(g.num_features()) + ">";
      });

  m.def("load_graph", &load_graph, py::arg("edges"), py::arg("attributes"), py::arg("labels") = py::none());
  m.def("export_graph", &export_graph, py::arg("graph"), py::arg("edges"), py::arg("attributes"),
        py::arg("labels") = py::none());
  m.def("synthetic_graph",
        [](NodeId nodes, std::int64_t edges, Eigen::Index features, int communities, int words, std::uint64_t seed) {
          SyntheticSpec spec;
          spec.nodes = nodes;
          spec.edges = edges;
          spec.features = features;
          spec.communities = communities;
          spec.words_per_node = words;
          spec.seed = seed;
          return make_synthetic_graph(spec);
        },
        py::arg("nodes") = 2708, py::arg("edges") = 5278, py::arg("features") = 1433, py::arg("communities") = 7,
        py::arg("words_per_node") = 18, py::arg("seed") = 0);

  m.def("inject",
        [](const AttributedGraph& g, std::int64_t anomalies, std::uint64_t seed, std::int64_t clique_size,
           std::int64_t candidate_pool) {
          const auto r = inject(g, InjectionPlan::for_total(anomalies, seed, clique_size, candidate_pool));
          py::dict d;
          d["graph"] = r.graph;
          d["cliques"] = r.cliques;
          d["attribute_nodes"] = r.attribute_nodes;
          d["donors"] = r.donors;
          return d;
        },
        py::arg("graph"), py::arg("anomalies") = 150, py::arg("seed") = 0, py::arg("clique_size") = 15,
        py::arg("candidate_pool") = 50,
        "Injects anomalies/2 clique members and anomalies/2 attribute outliers; returns a dict.");

  m.def("compute_ppr",
        [](const AttributedGraph& g, double alpha) { return compute_ppr(g, alpha).to_dense(); },
        py::arg("graph"), py::arg("alpha") = 0.15, "Dense personalized PageRank diffusion matrix.");

  m.def("compute_auc",
        [](const std::vector<double>& scores, const std::vector<int>& labels) {
          if (scores.size() != labels.size()) throw DimensionError("scores and labels differ in length");
          return compute_auc(scores, to_labels(labels));
        },
        py::arg("scores"), py::arg("labels"));
  m.def("compute_roc",
        [](const std::vector<double>& scores, const std::vector<int>& labels) {
          if (scores.size() != labels.size()) throw DimensionError("scores and labels differ in length");
          const auto roc = compute_roc(scores, to_labels(labels));
          py::dict d;
          d["fpr"] = roc.fpr;
          d["tpr"] = roc.tpr;
          d["thresholds"] = roc.thresholds;
          d["auc"] = roc.auc;
          return d;
        },
        py::arg("scores"), py::arg("labels"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("subgraph_size", &TrainConfig::subgraph_size)
      .def_readwrite("embedding_dim", &TrainConfig::embedding_dim)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("gamma", &TrainConfig::gamma)
      .def_readwrite("alpha", &TrainConfig::alpha)
      .def_readwrite("restart_prob", &TrainConfig::restart_prob)
      .def_readwrite("rounds", &TrainConfig::rounds)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("share_weights", &TrainConfig::share_weights)
      .def_readwrite("diffusion_topk", &TrainConfig::diffusion_topk)
      .def_property(
          "variant", [](const TrainConfig& c) { return to_string(c.variant); },
          [](TrainConfig& c, const std::string& v) { c.variant = parse_variant(v); })
      .def_property(
          "negatives", [](const TrainConfig& c) { return c.negatives == NegativeMode::kFresh ? "fresh" : "rotate"; },
          [](TrainConfig& c, const std::string& v) {
            if (v != "fresh" && v != "rotate") throw ConfigError("negatives must be 'rotate' or 'fresh'");
            c.negatives = v == "fresh" ? NegativeMode::kFresh : NegativeMode::kRotate;
          })
      .def_property(
          "normalization", [](const TrainConfig& c) { return to_string(c.normalization); },
          [](TrainConfig& c, const std::string& v) { c.normalization = parse_normalization(v); })
      .def_property(
          "diffusion", [](const TrainConfig& c) { return to_string(c.diffusion); },
          [](TrainConfig& c, const std::string& v) { c.diffusion = parse_diffusion_method(v); })
      .def("validate", &TrainConfig::validate)
      .def("hash", &TrainConfig::hash)
      .def("__repr__", [](const TrainConfig& c) { return "<TrainConfig " + c.hash() + ">"; });

  m.def("load_config", [](const std::filesystem::path& path) { return load_run_config(path).train; },
        py::arg("path"), "Training section of a TOML run configuration.");

  py::class_<ModelParams>(m, "Model")
      .def("parameters", [](const ModelParams& p) {
        py::dict d;
        for (const auto& [name, matrix] : p.to_named()) d[py::str(name)] = matrix;
        return d;
      });

  m.def("build_diffusion", [](const TrainConfig& c, const AttributedGraph& g) { return build_diffusion(c, g).to_dense(); },
        py::arg("config"), py::arg("graph"));

  m.def("train",
        [](const AttributedGraph& g, const TrainConfig& c, const std::function<void(py::dict)>& on_epoch) {
          c.validate();
          std::optional<DiffusionMatrix> s;
          if (c.needs_diffusion()) s = build_diffusion(c, g);
          EpochCallback cb;
          if (on_epoch) {
            cb = [&](const EpochRecord& r) {
              py::dict d;
              d["epoch"] = r.epoch;
              d["loss_con"] = r.loss_con;
              d["loss_res"] = r.loss_res;
              d["loss_total"] = r.loss_total;
              on_epoch(d);
            };
          }
          auto result = train(c, g, maybe(s), cb);
          py::list log;
          for (const auto& r : result.log) log.append(py::make_tuple(r.epoch, r.loss_con, r.loss_res, r.loss_total));
          return py::make_tuple(std::move(result.params), log);
        },
        py::arg("graph"), py::arg("config"), py::arg("on_epoch") = nullptr,
        "Returns (model, [(epoch, loss_con, loss_res, loss_total), ...]).");

  m.def("infer",
        [](const ModelParams& params, const AttributedGraph& g, const TrainConfig& c) {
          c.validate();
          std::optional<DiffusionMatrix> s;
          if (c.needs_diffusion()) s = build_diffusion(c, g);
          return report_to_dict(infer(params, c, g, maybe(s)));
        },
        py::arg("model"), py::arg("graph"), py::arg("config"));

  m.def("run",
        [](const AttributedGraph& g, const TrainConfig& c) {
          c.validate();
          std::optional<DiffusionMatrix> s;
          if (c.needs_diffusion()) s = build_diffusion(c, g);
          const auto outcome = run_pipeline(c, g, maybe(s));
          auto d = report_to_dict(outcome.report);
          d["auc"] = outcome.auc;
          d["seconds"] = outcome.seconds;
          return d;
        },
        py::arg("graph"), py::arg("config"), "Train, score and (with labels) evaluate.");
}
