#include "subcr/error.hpp"
#include "subcr/injector.hpp"
#include "subcr/pipeline.hpp"
#include "subcr/synthetic.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace subcr;
using namespace subcr::testing;

namespace {

AttributedGraph small_labeled_graph(std::uint64_t seed = 0) {
  SyntheticSpec spec;
  spec.nodes = 90;
  spec.edges = 200;
  spec.features = 24;
  spec.communities = 3;
  spec.words_per_node = 5;
  spec.seed = seed;
  const auto clean = make_synthetic_graph(spec);
  InjectionPlan plan;
  plan.clique_size = 5;
  plan.num_cliques = 2;
  plan.num_attribute_anomalies = 10;
  plan.candidate_pool = 20;
  plan.seed = seed;
  return inject(clean, plan).graph;
}

TrainConfig small_config() {
  TrainConfig c;
  c.embedding_dim = 8;
  c.batch_size = 32;
  c.epochs = 12;
  c.lr = 0.01;
  c.rounds = 4;
  c.seed = 3;
  return c;
}

double mean_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("contrastive score examples") {
  const std::vector<double> one{1.0}, zero{0.0}, half{0.5};
  CHECK(contrastive_scores(one, zero, one, zero)[0] == -1.0);
  CHECK(contrastive_scores(half, half, half, half)[0] == 0.0);
  CHECK(contrastive_scores(zero, one, zero, one)[0] == 1.0);
  CHECK(contrastive_scores(zero, one)[0] == 1.0);
}

TEST_CASE("reconstruction score examples") {
  const RowMatrix x = RowMatrix::Zero(1, 2);
  const std::vector<RowMatrix> perfect{x, x};
  CHECK(reconstruction_scores(perfect, x)[0] == 0.0);
  RowMatrix local(1, 2), global(1, 2);
  local << 1, 1;   // err^2 = 2
  global << 2, 0;  // err^2 = 4
  const std::vector<RowMatrix> r{local, global};
  CHECK(reconstruction_scores(r, x)[0] == 3.0);
}

TEST_CASE("normalization") {
  const std::vector<double> v{2.0, 4.0, 3.0};
  CHECK(normalize_scores(v, Normalization::kMinMax) == std::vector<double>{0.0, 1.0, 0.5});
  const std::vector<double> constant{7.0, 7.0, 7.0};
  CHECK(normalize_scores(constant, Normalization::kMinMax) == std::vector<double>{0.0, 0.0, 0.0});
  CHECK(normalize_scores(constant, Normalization::kZScore) == std::vector<double>{0.0, 0.0, 0.0});
  const auto z = normalize_scores(v, Normalization::kZScore);
  CHECK(std::abs(std::accumulate(z.begin(), z.end(), 0.0)) < 1e-15);
}

TEST_CASE("combined score hand example") {
  TrainConfig c;
  const std::vector<double> con{0.0, 1.0}, res{1.0, 0.0};
  CHECK(combine_scores(con, res, c) == std::vector<double>{0.6, 1.0});
}

TEST_CASE("variant switches") {
  TrainConfig c;
  c.gamma = 0.4;
  c.variant = Variant::kSubWeight;
  CHECK(c.effective_gamma() == 1.0);
  c.variant = Variant::kSubR;
  CHECK_FALSE(c.forward_options().reconstruction);
  c.variant = Variant::kSubC;
  CHECK_FALSE(c.forward_options().contrastive);
  c.variant = Variant::kSubGlobal;
  CHECK_FALSE(c.forward_options().use_global);
  CHECK_FALSE(c.needs_diffusion());
  for (auto v : {Variant::kFull, Variant::kSubR, Variant::kSubC, Variant::kSubWeight, Variant::kSubGlobal}) {
    CHECK(parse_variant(to_string(v)) == v);
  }
  CHECK_THROWS_AS(parse_variant("sub-x"), ConfigError);

  const std::vector<double> con{0.1, 0.9, 0.5}, res{3.0, 1.0, 2.0};
  TrainConfig r;
  r.variant = Variant::kSubR;
  CHECK(combine_scores(con, res, r) == normalize_scores(con, Normalization::kMinMax));
  TrainConfig cc;
  cc.variant = Variant::kSubC;
  CHECK(combine_scores(con, res, cc) == normalize_scores(res, Normalization::kMinMax));
}

TEST_CASE("combined score absorbs positive affine rescaling of reconstruction") {
  TrainConfig c;
  const std::vector<double> con{0.1, 0.9, 0.5, 0.3};
  const std::vector<double> res{3.0, 1.0, 2.0, 8.0};
  std::vector<double> scaled;
  for (double r : res) scaled.push_back(4.0 * r + 2.5);
  const auto a = combine_scores(con, res, c);
  const auto b = combine_scores(con, scaled, c);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
}

TEST_CASE("config validation") {
  TrainConfig c;
  c.rounds = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.subgraph_size = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.variant = Variant::kSubR;
  CHECK_NOTHROW(c.validate());
  c = TrainConfig{};
  c.gamma = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(TrainConfig{}.hash() == TrainConfig{}.hash());
  TrainConfig d;
  d.seed = 1;
  CHECK(d.hash() != TrainConfig{}.hash());
}

TEST_CASE("partition_batches covers every node once") {
  std::vector<NodeId> order(301);
  std::iota(order.begin(), order.end(), NodeId{0});
  const auto batches = partition_batches(order, 300);
  REQUIRE(batches.size() == 1);
  CHECK(batches[0].size() == 301);
  const auto more = partition_batches(std::span<const NodeId>(order).first(250), 100);
  REQUIRE(more.size() == 3);
  CHECK(more[2].size() == 50);
}

TEST_CASE("training is deterministic and lowers the loss") {
  const auto g = small_labeled_graph();
  const auto cfg = small_config();
  const auto s = build_diffusion(cfg, g);
  const auto a = train(cfg, g, &s);
  const auto b = train(cfg, g, &s);
  REQUIRE(a.log.size() == 12);
  for (std::size_t e = 0; e < a.log.size(); ++e) CHECK(a.log[e].loss_total == b.log[e].loss_total);
  CHECK(a.log.back().loss_total < a.log.front().loss_total);
  const auto pa = a.params.to_named();
  const auto pb = b.params.to_named();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].second == pb[i].second);
}

TEST_CASE("ablation variants train the intended modules") {
  const auto g = small_labeled_graph();
  auto cfg = small_config();
  cfg.epochs = 2;
  const auto s = build_diffusion(cfg, g);

  cfg.variant = Variant::kSubC;
  const auto c = train(cfg, g, &s);
  for (const auto& r : c.log) {
    CHECK(r.loss_con == 0.0);
    CHECK(r.loss_total == r.loss_res);
  }

  cfg.variant = Variant::kSubR;
  const auto r = train(cfg, g, &s);
  for (const auto& e : r.log) CHECK(e.loss_res == 0.0);

  cfg.variant = Variant::kSubGlobal;
  const auto gl = train(cfg, g, nullptr);
  CHECK(gl.log.size() == 2);
  const auto report = infer(gl.params, cfg, g, nullptr);
  CHECK(report.combined.size() == static_cast<std::size_t>(g.num_nodes()));

  cfg.variant = Variant::kFull;
  CHECK_THROWS_AS(train(cfg, g, nullptr), ConfigError);
}

TEST_CASE("inference is deterministic and covers every node") {
  const auto g = small_labeled_graph(1);
  const auto cfg = small_config();
  const auto s = build_diffusion(cfg, g);
  const auto model = train(cfg, g, &s);
  const auto a = infer(model.params, cfg, g, &s);
  const auto b = infer(model.params, cfg, g, &s);
  CHECK(a.combined == b.combined);
  CHECK(a.contrastive == b.contrastive);
  CHECK(a.low_round);
  CHECK(a.labels.has_value());
  for (double v : a.combined) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0 + cfg.gamma);
  }
  for (double v : a.reconstruction) CHECK(v >= 0.0);
  for (double v : a.contrastive) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }

  const auto dir = temp_dir("scores");
  write_score_report(a, dir / "a.csv");
  write_score_report(b, dir / "b.csv");
  CHECK(read_text(dir / "a.csv") == read_text(dir / "b.csv"));
  CHECK(read_text(dir / "a.csv").rfind("node_id,contrastive,reconstruction,combined,label\n", 0) == 0);
  const auto back = read_score_report(dir / "a.csv");
  CHECK(back.combined == a.combined);
  CHECK(back.contrastive == a.contrastive);
  CHECK(back.labels == a.labels);
}

TEST_CASE("more rounds reduce Monte-Carlo spread") {
  const auto g = small_labeled_graph(2);
  auto cfg = small_config();
  cfg.epochs = 3;
  const auto s = build_diffusion(cfg, g);
  const auto model = train(cfg, g, &s);
  auto spread = [&](std::int64_t rounds) {
    auto c1 = cfg;
    c1.rounds = rounds;
    c1.seed = 100;
    auto c2 = c1;
    c2.seed = 200;
    return mean_abs_diff(infer(model.params, c1, g, &s).contrastive, infer(model.params, c2, g, &s).contrastive);
  };
  const double few = spread(2);
  const double many = spread(32);
  CHECK(many < few);
}

TEST_CASE("per-node scores are equivariant under relabeling") {
  const auto g = small_labeled_graph(3);
  const auto cfg = small_config();
  const auto s = build_diffusion(cfg, g);
  const auto params = ModelParams::init(cfg.model_config(g.num_features()), 5).detached();

  // Reverse the node ids.
  const NodeId n = g.num_nodes();
  auto map = [n](NodeId v) { return n - 1 - v; };
  std::vector<Edge> edges;
  for (const auto& [u, v] : g.edge_list()) edges.emplace_back(map(u), map(v));
  RowMatrix x(g.num_nodes(), g.num_features());
  for (NodeId v = 0; v < n; ++v) x.row(map(v)) = g.attributes().row(v);
  const auto h = AttributedGraph::build(n, edges, x);
  const auto sh = build_diffusion(cfg, h);

  const std::vector<NodeId> targets{0, 5, 17, 40};
  const auto batch = make_batch(g, &s, targets, cfg.sampler_config(), 1, 0);
  ViewPairBatch mapped;
  mapped.target_attributes = batch.target_attributes;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    mapped.targets.push_back(map(batch.targets[b]));
    std::vector<NodeId> ids;
    for (NodeId v : batch.local_pos[b].node_ids) ids.push_back(map(v));
    auto [local, global] = build_view_pair(h, &sh, ids);
    mapped.local_pos.push_back(std::move(local));
    mapped.global_pos.push_back(std::move(global));
  }
  const auto a = score_contrastive_round(params, batch, cfg);
  const auto b = score_contrastive_round(params, mapped, cfg);
  const auto ra = score_reconstruction_round(params, batch, cfg);
  const auto rb = score_reconstruction_round(params, mapped, cfg);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    CHECK(ra[i] == doctest::Approx(rb[i]).epsilon(1e-12));
  }
}

TEST_CASE("epoch log format") {
  const auto dir = temp_dir("epochlog");
  const std::vector<EpochRecord> log{{0, 0.5, 0.25, 0.65}};
  write_epoch_log(log, dir / "log.csv");
  CHECK(read_text(dir / "log.csv") == "epoch,loss_con,loss_res,loss_total\n0,0.5,0.25,0.65\n");
}
