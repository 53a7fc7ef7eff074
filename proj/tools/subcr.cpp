#include "subcr/config.hpp"
#include "subcr/error.hpp"
#include "subcr/eval.hpp"
#include "subcr/injector.hpp"
#include "subcr/runner.hpp"
#include "subcr/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

namespace fs = std::filesystem;
using namespace subcr;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::string dataset;
  std::string out;
  std::string variant;
  std::string data_dir;
  std::string diffusion_cache;
  std::string checkpoint;
  std::string scores;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> rounds;
  std::optional<std::int64_t> epochs;
  int jobs = 1;
  bool quiet = false;
};

// Stage named in error messages.
std::string g_stage = "setup";

std::string env(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

fs::path find_dataset_config(const std::string& name) {
  std::vector<fs::path> dirs;
  if (const auto d = env("SUBCR_CONFIG_DIR"); !d.empty()) dirs.emplace_back(d);
  dirs.emplace_back("configs");
  dirs.emplace_back(SUBCR_DEFAULT_CONFIG_DIR);
  for (const auto& d : dirs) {
    if (fs::exists(d / (name + ".toml"))) return d / (name + ".toml");
  }
  return {};
}

RunConfig resolve_config(const Options& o) {
  g_stage = "config";
  RunConfig c;
  if (!o.config.empty()) {
    c = load_run_config(o.config);
  } else if (!o.dataset.empty()) {
    if (const auto path = find_dataset_config(o.dataset); !path.empty()) c = load_run_config(path);
  }
  if (!o.dataset.empty() && (c.dataset.name != o.dataset || c.dataset.edges.empty())) {
    c.dataset.name = o.dataset;
    c.dataset.edges = fs::path(o.dataset) / "edges.txt";
    c.dataset.attributes = fs::path(o.dataset) / "attributes.csv";
    c.dataset.labels = fs::path(o.dataset) / "labels.txt";
  }
  fs::path data_dir = o.data_dir;
  if (data_dir.empty()) data_dir = env("SUBCR_DATA_DIR");
  if (data_dir.empty()) data_dir = "data";
  resolve_dataset_paths(c, data_dir);

  if (o.seed) c.train.seed = *o.seed;
  if (!o.variant.empty()) c.train.variant = parse_variant(o.variant);
  if (o.rounds) c.train.rounds = *o.rounds;
  if (o.epochs) c.train.epochs = *o.epochs;
  if (!o.out.empty()) c.out_dir = o.out;
  if (!o.diffusion_cache.empty()) c.diffusion_cache = o.diffusion_cache;
  c.train.validate();
  return c;
}

void require_inputs(const RunConfig& c) {
  if (c.dataset.edges.empty()) throw UsageError("no dataset given (use --dataset or --config)");
  for (const auto& p : {c.dataset.edges, c.dataset.attributes}) {
    if (!fs::exists(p)) throw IoError("missing input file " + p.string());
  }
}

AttributedGraph load_prepared(const RunConfig& c) {
  g_stage = "load";
  require_inputs(c);
  return prepare_graph(c);
}

std::optional<fs::path> cache_location(const RunConfig& c, const AttributedGraph& g) {
  if (c.diffusion_cache) return c.diffusion_cache;
  if (const auto dir = env("SUBCR_CACHE_DIR"); !dir.empty()) return default_diffusion_cache(dir, c, g);
  return std::nullopt;
}

std::optional<DiffusionMatrix> diffusion_for(const RunConfig& c, const AttributedGraph& g, bool quiet) {
  if (!c.train.needs_diffusion()) return std::nullopt;
  g_stage = "diffuse";
  std::string source;
  auto s = obtain_diffusion(c.train, g, cache_location(c, g), &source);
  if (!quiet) std::cerr << "diffusion: N=" << s.size() << " (" << source << ")\n";
  return s;
}

EpochCallback progress(const TrainConfig& t, bool quiet) {
  if (quiet) return {};
  const auto every = std::max<std::int64_t>(1, t.epochs / 10);
  return [&t, every](const EpochRecord& r) {
    if ((r.epoch + 1) % every == 0 || r.epoch + 1 == t.epochs) {
      std::cerr << "epoch " << (r.epoch + 1) << "/" << t.epochs << " loss=" << r.loss_total
                << " (con " << r.loss_con << ", res " << r.loss_res << ")\n";
    }
  };
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json effective_config(const RunConfig& c, const AttributedGraph& g) {
  json j = c.to_json();
  j["graph"] = {{"nodes", g.num_nodes()},
                {"edges", g.num_edges()},
                {"features", g.num_features()},
                {"fingerprint", graph_fingerprint(g)}};
  j["config_hash"] = c.train.hash();
  return j;
}

std::string dataset_label(const RunConfig& c) { return c.dataset.name.empty() ? "graph" : c.dataset.name; }

// ---- subcommands ----------------------------------------------------------------

int cmd_inject(const Options& o) {
  const auto c = resolve_config(o);
  g_stage = "load";
  require_inputs(c);
  auto g = load_graph(c.dataset.edges, c.dataset.attributes);
  if (c.dataset.binarize) g = binarize_attributes(g);

  g_stage = "inject";
  const auto plan = InjectionPlan::for_total(c.injection.anomalies, c.train.seed, c.injection.clique_size,
                                             c.injection.candidate_pool);
  const auto result = inject(g, plan);

  g_stage = "write";
  fs::create_directories(c.out_dir);
  export_graph(result.graph, c.out_dir / "edges.txt", c.out_dir / "attributes.csv", c.out_dir / "labels.txt");
  json manifest;
  manifest["dataset"] = dataset_label(c);
  manifest["source"] = {{"edges", c.dataset.edges.string()}, {"attributes", c.dataset.attributes.string()}};
  manifest["seed"] = plan.seed;
  manifest["plan"] = {{"clique_size", plan.clique_size},
                      {"num_cliques", plan.num_cliques},
                      {"num_attribute_anomalies", plan.num_attribute_anomalies},
                      {"candidate_pool", plan.candidate_pool},
                      {"total", plan.total()}};
  manifest["cliques"] = result.cliques;
  manifest["attribute_nodes"] = result.attribute_nodes;
  manifest["donors"] = result.donors;
  manifest["nodes"] = result.graph.num_nodes();
  manifest["edges_before"] = g.num_edges();
  manifest["edges_after"] = result.graph.num_edges();
  write_json(manifest, c.out_dir / "manifest.json");
  std::cout << "injected " << plan.total() << " anomalies (" << plan.num_cliques << " cliques of "
            << plan.clique_size << ", " << plan.num_attribute_anomalies << " attribute) into "
            << c.out_dir.string() << '\n';
  return 0;
}

int cmd_diffuse(const Options& o) {
  auto c = resolve_config(o);
  const auto g = load_prepared(c);
  g_stage = "diffuse";
  fs::path path = c.diffusion_cache ? *c.diffusion_cache : fs::path();
  if (path.empty()) {
    const auto dir = env("SUBCR_CACHE_DIR");
    path = dir.empty() ? c.out_dir / "diffusion.bin" : default_diffusion_cache(dir, c, g);
  }
  const auto start = std::chrono::steady_clock::now();
  std::string source;
  const auto s = obtain_diffusion(c.train, g, path, &source);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << "diffusion N=" << s.size() << " alpha=" << s.alpha()
            << " truncation=" << (s.truncation() ? std::to_string(*s.truncation()) : "none") << " -> "
            << path.string() << " (" << source << ", " << secs << "s)\n";
  return 0;
}

int cmd_train(const Options& o) {
  const auto c = resolve_config(o);
  const auto g = load_prepared(c);
  const auto s = diffusion_for(c, g, o.quiet);
  g_stage = "train";
  const auto result = train(c.train, g, s ? &*s : nullptr, progress(c.train, o.quiet));
  g_stage = "write";
  fs::create_directories(c.out_dir);
  const auto ckpt = o.checkpoint.empty() ? c.out_dir / "checkpoint.bin" : fs::path(o.checkpoint);
  nn::save_checkpoint(result.params.to_named(), ckpt);
  write_epoch_log(result.log, c.out_dir / "epoch_log.csv");
  write_json(effective_config(c, g), c.out_dir / "config.json");
  std::cout << "trained " << c.train.epochs << " epochs, final loss "
            << (result.log.empty() ? 0.0 : result.log.back().loss_total) << " -> " << ckpt.string() << '\n';
  return 0;
}

int cmd_score(const Options& o) {
  const auto c = resolve_config(o);
  const auto g = load_prepared(c);
  const auto s = diffusion_for(c, g, o.quiet);
  g_stage = "score";
  const auto ckpt = o.checkpoint.empty() ? c.out_dir / "checkpoint.bin" : fs::path(o.checkpoint);
  const auto named = nn::load_checkpoint(ckpt);
  const auto params = ModelParams::from_named(c.train.model_config(g.num_features()), named);
  const auto report = infer(params, c.train, g, s ? &*s : nullptr);
  g_stage = "write";
  fs::create_directories(c.out_dir);
  const auto path = o.scores.empty() ? c.out_dir / "scores.csv" : fs::path(o.scores);
  write_score_report(report, path);
  std::cout << "scored " << report.combined.size() << " nodes over " << report.rounds << " rounds"
            << (report.low_round ? " [low-round]" : "") << " -> " << path.string() << '\n';
  return 0;
}

int cmd_eval(const Options& o) {
  const auto c = resolve_config(o);
  g_stage = "eval";
  const auto path = o.scores.empty() ? c.out_dir / "scores.csv" : fs::path(o.scores);
  auto report = read_score_report(path);
  if (!report.labels) throw UsageError(path.string() + " has no label column");
  report.config_hash = c.train.hash();
  report.seed = c.train.seed;
  report.rounds = c.train.rounds;
  report.low_round = c.train.low_round();
  report.variant = c.train.variant;
  const auto roc = compute_roc(report.combined, *report.labels);
  emit_report(roc, report, c.out_dir, json{{"config", c.to_json()}, {"scores", path.string()}});
  std::cout << "auc=" << format_double(compute_auc(report.combined, *report.labels)) << " -> "
            << (c.out_dir / "summary.json").string() << '\n';
  return 0;
}

int cmd_run(const Options& o) {
  const auto c = resolve_config(o);
  const auto g = load_prepared(c);
  if (!g.labels()) throw UsageError("run needs labels: provide a labels file or enable injection");
  const auto s = diffusion_for(c, g, o.quiet);
  g_stage = "train";
  const auto start = std::chrono::steady_clock::now();
  const auto result = train(c.train, g, s ? &*s : nullptr, progress(c.train, o.quiet));
  g_stage = "score";
  const auto report = infer(result.params, c.train, g, s ? &*s : nullptr);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  g_stage = "eval";
  fs::create_directories(c.out_dir);
  nn::save_checkpoint(result.params.to_named(), c.out_dir / "checkpoint.bin");
  write_epoch_log(result.log, c.out_dir / "epoch_log.csv");
  write_score_report(report, c.out_dir / "scores.csv");
  const auto roc = compute_roc(report.combined, *report.labels);
  emit_report(roc, report, c.out_dir, json{{"config", effective_config(c, g)}, {"seconds", secs}});
  const double auc = compute_auc(report.combined, *report.labels);
  std::cout << dataset_label(c) << " variant=" << to_string(c.train.variant) << " seed=" << c.train.seed
            << " rounds=" << c.train.rounds << (report.low_round ? " [low-round]" : "")
            << " auc=" << format_double(auc) << " time=" << static_cast<std::int64_t>(secs + 0.5) << "s\n";
  return 0;
}

struct SweepPoint {
  std::int64_t subgraph_size;
  std::int64_t embedding_dim;
  double gamma;
  std::optional<double> auc;
  double seconds = 0.0;
  std::string status = "pending";
};

std::string csv_field(std::string s) {
  for (auto& ch : s) {
    if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
  }
  return s;
}

int cmd_sweep(const Options& o) {
  const auto c = resolve_config(o);
  if (c.sweep.empty()) throw UsageError("sweep grid is empty: set [sweep] lists in the config");
  const auto list_or = [](const auto& list, auto fallback) {
    using T = decltype(fallback);
    return list.empty() ? std::vector<T>{fallback} : std::vector<T>(list.begin(), list.end());
  };
  std::vector<SweepPoint> points;
  for (auto p : list_or(c.sweep.subgraph_size, c.train.subgraph_size)) {
    for (auto d : list_or(c.sweep.embedding_dim, c.train.embedding_dim)) {
      for (auto gamma : list_or(c.sweep.gamma, c.train.gamma)) points.push_back({p, d, gamma, std::nullopt, 0.0, "pending"});
    }
  }

  const auto g = load_prepared(c);
  if (!g.labels()) throw UsageError("sweep needs labels: provide a labels file or enable injection");
  const auto s = diffusion_for(c, g, o.quiet);

  g_stage = "sweep";
  std::atomic<std::size_t> next{0};
  std::mutex io;
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      auto& pt = points[i];
      auto t = c.train;
      t.subgraph_size = pt.subgraph_size;
      t.embedding_dim = pt.embedding_dim;
      t.gamma = pt.gamma;
      const auto start = std::chrono::steady_clock::now();
      try {
        t.validate();
        const auto outcome = run_pipeline(t, g, s ? &*s : nullptr);
        pt.auc = outcome.auc;
        pt.status = "ok";
      } catch (const std::exception& e) {
        pt.status = std::string("error: ") + e.what();
      }
      pt.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (!o.quiet) {
        std::lock_guard lock(io);
        std::cerr << "P=" << pt.subgraph_size << " d=" << pt.embedding_dim << " gamma=" << pt.gamma << ": "
                  << (pt.auc ? "auc=" + format_double(*pt.auc) : pt.status) << '\n';
      }
    }
  };
  const auto jobs = static_cast<std::size_t>(std::clamp<int>(o.jobs, 1, static_cast<int>(points.size())));
  std::vector<std::thread> threads;
  for (std::size_t j = 1; j < jobs; ++j) threads.emplace_back(worker);
  worker();
  for (auto& th : threads) th.join();

  g_stage = "write";
  fs::create_directories(c.out_dir);
  const auto path = c.out_dir / "sweep.csv";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "subgraph_size,embedding_dim,gamma,auc,runtime_s,status\n";
  std::size_t failures = 0;
  for (const auto& pt : points) {
    failures += pt.status != "ok";
    out << pt.subgraph_size << ',' << pt.embedding_dim << ',' << format_double(pt.gamma) << ','
        << (pt.auc ? format_double(*pt.auc) : "") << ',' << format_double(pt.seconds) << ','
        << csv_field(pt.status) << '\n';
  }
  std::cout << "sweep: " << points.size() << " points, " << failures << " failed -> " << path.string() << '\n';
  return 0;
}

int cmd_synth(const SyntheticSpec& spec, const std::string& out) {
  g_stage = "synth";
  const fs::path dir = out.empty() ? fs::path("data/synthetic") : fs::path(out);
  fs::create_directories(dir);
  const auto g = make_synthetic_graph(spec);
  export_graph(g, dir / "edges.txt", dir / "attributes.csv");
  std::cout << "synthetic graph N=" << g.num_nodes() << " edges=" << g.num_edges() << " F=" << g.num_features()
            << " -> " << dir.string() << '\n';
  return 0;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("-c,--config", o.config, "TOML run configuration");
  cmd->add_option("-d,--dataset", o.dataset, "dataset name (loads configs/<name>.toml when present)");
  cmd->add_option("-o,--out", o.out, "output directory");
  cmd->add_option("-s,--seed", o.seed, "global seed");
  cmd->add_option("--variant", o.variant, "full, sub-r, sub-c, sub-weight or sub-global");
  cmd->add_option("-r,--rounds", o.rounds, "inference rounds");
  cmd->add_option("-e,--epochs", o.epochs, "training epochs");
  cmd->add_option("--data-dir", o.data_dir, "root for relative dataset paths (default $SUBCR_DATA_DIR or ./data)");
  cmd->add_option("--diffusion-cache", o.diffusion_cache, "diffusion cache file");
  cmd->add_flag("-q,--quiet", o.quiet, "no progress output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sub-CR graph anomaly detection"};
  app.require_subcommand(1);
  Options o;
  SyntheticSpec spec;

  auto* inject_cmd = app.add_subcommand("inject", "inject structural and attribute anomalies, write a labeled dataset");
  auto* diffuse_cmd = app.add_subcommand("diffuse", "compute and cache the diffusion matrix");
  auto* train_cmd = app.add_subcommand("train", "train and write a checkpoint");
  auto* score_cmd = app.add_subcommand("score", "score every node with a trained checkpoint");
  auto* eval_cmd = app.add_subcommand("eval", "ROC/AUC artifacts from a score file");
  auto* run_cmd = app.add_subcommand("run", "diffuse, train, score and evaluate");
  auto* sweep_cmd = app.add_subcommand("sweep", "run the pipeline over the [sweep] grid");
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic citation-style graph");
  for (auto* cmd : {inject_cmd, diffuse_cmd, train_cmd, score_cmd, eval_cmd, run_cmd, sweep_cmd}) add_common(cmd, o);
  for (auto* cmd : {train_cmd, score_cmd}) cmd->add_option("--checkpoint", o.checkpoint, "checkpoint file");
  for (auto* cmd : {score_cmd, eval_cmd}) cmd->add_option("--scores", o.scores, "score report CSV");
  sweep_cmd->add_option("-j,--jobs", o.jobs, "grid points run concurrently")->check(CLI::PositiveNumber);

  synth_cmd->add_option("-o,--out", o.out, "output directory");
  synth_cmd->add_option("--nodes", spec.nodes);
  synth_cmd->add_option("--edges", spec.edges);
  synth_cmd->add_option("--features", spec.features);
  synth_cmd->add_option("--communities", spec.communities);
  synth_cmd->add_option("--words", spec.words_per_node, "words per node");
  synth_cmd->add_option("-s,--seed", spec.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "inject") return cmd_inject(o);
    if (name == "diffuse") return cmd_diffuse(o);
    if (name == "train") return cmd_train(o);
    if (name == "score") return cmd_score(o);
    if (name == "eval") return cmd_eval(o);
    if (name == "run") return cmd_run(o);
    if (name == "sweep") return cmd_sweep(o);
    if (name == "synth") return cmd_synth(spec, o.out);
  } catch (const Error& e) {
    std::cerr << "subcr " << name << " [" << g_stage << "]: " << e.what() << '\n';
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "subcr " << name << " [" << g_stage << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "subcr " << name << " [" << g_stage << "]: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
