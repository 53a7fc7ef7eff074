#include "subcr/pipeline.hpp"

#include "subcr/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace subcr {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554646000000ULL;
constexpr std::uint64_t kInitStream = 0x494E495400000000ULL;
constexpr std::uint64_t kInferenceBase = std::uint64_t{1} << 32;

std::vector<double> column(const nn::Tensor& t) {
  const auto& v = t.value();
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kSubR: return "sub-r";
    case Variant::kSubC: return "sub-c";
    case Variant::kSubWeight: return "sub-weight";
    case Variant::kSubGlobal: return "sub-global";
  }
  return "full";
}

Variant parse_variant(const std::string& name) {
  for (auto v : {Variant::kFull, Variant::kSubR, Variant::kSubC, Variant::kSubWeight, Variant::kSubGlobal}) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("unknown variant '" + name + "' (full, sub-r, sub-c, sub-weight, sub-global)");
}

std::string to_string(Normalization n) { return n == Normalization::kMinMax ? "minmax" : "zscore"; }

Normalization parse_normalization(const std::string& name) {
  if (name == "minmax") return Normalization::kMinMax;
  if (name == "zscore") return Normalization::kZScore;
  throw ConfigError("unknown normalization '" + name + "' (minmax, zscore)");
}

std::string to_string(DiffusionMethod m) {
  switch (m) {
    case DiffusionMethod::kAuto: return "auto";
    case DiffusionMethod::kDense: return "dense";
    case DiffusionMethod::kIterative: return "iterative";
  }
  return "auto";
}

DiffusionMethod parse_diffusion_method(const std::string& name) {
  for (auto m : {DiffusionMethod::kAuto, DiffusionMethod::kDense, DiffusionMethod::kIterative}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown diffusion method '" + name + "' (auto, dense, iterative)");
}

double TrainConfig::effective_gamma() const {
  switch (variant) {
    case Variant::kSubWeight: return 1.0;
    // Only one module remains; its loss is used unscaled.
    case Variant::kSubC: return 1.0;
    default: return gamma;
  }
}

ForwardOptions TrainConfig::forward_options() const {
  ForwardOptions f;
  f.use_global = variant != Variant::kSubGlobal;
  f.contrastive = variant != Variant::kSubC;
  f.reconstruction = variant != Variant::kSubR && subgraph_size >= 2;
  return f;
}

SamplerConfig TrainConfig::sampler_config() const {
  SamplerConfig s;
  s.subgraph_size = subgraph_size;
  s.restart_prob = restart_prob;
  s.negatives = negatives;
  return s;
}

ModelConfig TrainConfig::model_config(Eigen::Index num_features) const {
  return ModelConfig{num_features, embedding_dim, subgraph_size, share_weights};
}

void TrainConfig::validate() const {
  if (subgraph_size < 1) throw ConfigError("subgraph size P must be >= 1");
  if (subgraph_size < 2 && variant != Variant::kSubR) {
    throw ConfigError("reconstruction needs P >= 2 (or use variant sub-r)");
  }
  if (embedding_dim < 1) throw ConfigError("embedding dimension must be >= 1");
  if (batch_size < 2) throw ConfigError("batch size must be >= 2");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (rounds < 1) throw ConfigError("inference needs at least one round");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!(restart_prob > 0.0 && restart_prob <= 1.0)) throw ConfigError("restart_prob must lie in (0, 1]");
  if (diffusion_topk && *diffusion_topk < 1) throw ConfigError("diffusion top-k must be >= 1");
}

std::string TrainConfig::canonical() const {
  std::ostringstream out;
  out << "subgraph_size=" << subgraph_size << '\n'
      << "embedding_dim=" << embedding_dim << '\n'
      << "batch_size=" << batch_size << '\n'
      << "epochs=" << epochs << '\n'
      << "lr=" << format_double(lr) << '\n'
      << "gamma=" << format_double(gamma) << '\n'
      << "alpha=" << format_double(alpha) << '\n'
      << "restart_prob=" << format_double(restart_prob) << '\n'
      << "rounds=" << rounds << '\n'
      << "seed=" << seed << '\n'
      << "variant=" << to_string(variant) << '\n'
      << "negatives=" << (negatives == NegativeMode::kRotate ? "rotate" : "fresh") << '\n'
      << "share_weights=" << share_weights << '\n'
      << "inter_per_node_mean=" << inter_per_node_mean << '\n'
      << "normalization=" << to_string(normalization) << '\n'
      << "diffusion=" << to_string(diffusion) << '\n'
      << "dense_diffusion_limit=" << dense_diffusion_limit << '\n'
      << "diffusion_tol=" << format_double(diffusion_tol) << '\n'
      << "diffusion_topk=" << (diffusion_topk ? std::to_string(*diffusion_topk) : "none") << '\n';
  return out.str();
}

std::string TrainConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

DiffusionMatrix build_diffusion(const TrainConfig& config, const AttributedGraph& g) {
  auto method = config.diffusion;
  if (method == DiffusionMethod::kAuto) {
    method = g.num_nodes() <= config.dense_diffusion_limit ? DiffusionMethod::kDense
                                                           : DiffusionMethod::kIterative;
  }
  if (method == DiffusionMethod::kDense) {
    auto s = compute_ppr(g, config.alpha, config.dense_diffusion_cap);
    return config.diffusion_topk ? sparsify_topk(s, *config.diffusion_topk) : s;
  }
  IterativeOptions options;
  options.tol = config.diffusion_tol;
  options.max_iter = static_cast<int>(config.diffusion_max_iter);
  options.top_k = config.diffusion_topk.value_or(128);
  return compute_ppr_iterative(g, config.alpha, options);
}

std::vector<std::vector<NodeId>> partition_batches(std::span<const NodeId> order, std::int64_t batch_size) {
  if (order.size() < 2) throw ConfigError("need at least two nodes to form a batch");
  if (batch_size < 2) throw ConfigError("batch size must be >= 2");
  std::vector<std::vector<NodeId>> batches;
  const auto b = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < order.size(); start += b) {
    const auto end = std::min(order.size(), start + b);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    const NodeId last = batches.back().front();
    batches.pop_back();
    batches.back().push_back(last);
  }
  return batches;
}

TrainResult train(const TrainConfig& config, const AttributedGraph& g, const DiffusionMatrix* diffusion,
                  const EpochCallback& on_epoch) {
  config.validate();
  const auto forward = config.forward_options();
  if (forward.use_global && diffusion == nullptr) {
    throw ConfigError("training with the global view requires a diffusion matrix");
  }
  const auto sampler = config.sampler_config();
  const LossOptions loss_options{config.effective_gamma(), config.inter_per_node_mean};

  TrainResult result;
  result.params = ModelParams::init(config.model_config(g.num_features()),
                                    Rng::keyed(config.seed, kInitStream, 0).next());
  auto params = result.params.tensors();
  nn::AdamState adam;
  adam.lr = config.lr;

  std::vector<NodeId> order(static_cast<std::size_t>(g.num_nodes()));
  for (std::int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), NodeId{0});
    Rng shuffle_rng = Rng::keyed(config.seed, kShuffleStream, static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(std::span<NodeId>(order));

    EpochRecord record;
    record.epoch = epoch;
    double weight = 0.0;
    const auto batches = partition_batches(order, config.batch_size);
    for (std::size_t k = 0; k < batches.size(); ++k) {
      const auto batch = make_batch(g, forward.use_global ? diffusion : nullptr, batches[k], sampler,
                                    config.seed, static_cast<std::uint64_t>(epoch));
      result.params.zero_grad();
      const auto outputs = forward_batch(result.params, batch, forward);
      const auto losses = compute_losses(outputs, batch, forward, loss_options);
      const double total = losses.total.item();
      if (!std::isfinite(total)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(k) + " (seed " + std::to_string(config.seed) + ", round " +
                             std::to_string(epoch) + ", first target " +
                             std::to_string(batches[k].front()) + ")");
      }
      nn::backward(losses.total);
      nn::adam_step(params, adam);
      const double w = static_cast<double>(batch.size());
      record.loss_con += w * losses.contrastive.item();
      record.loss_res += w * losses.reconstruction.item();
      record.loss_total += w * total;
      weight += w;
    }
    record.loss_con /= weight;
    record.loss_res /= weight;
    record.loss_total /= weight;
    result.log.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  result.params.zero_grad();
  return result;
}

std::vector<double> contrastive_scores(std::span<const double> pos_local, std::span<const double> neg_local,
                                       std::span<const double> pos_global,
                                       std::span<const double> neg_global) {
  if (pos_local.size() != neg_local.size() || pos_global.size() != neg_global.size() ||
      (!pos_global.empty() && pos_global.size() != pos_local.size())) {
    throw DimensionError("contrastive score vectors differ in length");
  }
  const bool two_views = !pos_global.empty();
  std::vector<double> out(pos_local.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = two_views ? 0.5 * ((neg_local[i] - pos_local[i]) + (neg_global[i] - pos_global[i]))
                       : neg_local[i] - pos_local[i];
  }
  return out;
}

std::vector<double> reconstruction_scores(std::span<const RowMatrix> reconstructions, const RowMatrix& targets) {
  if (reconstructions.empty()) throw DimensionError("no reconstructions to score");
  std::vector<double> out(static_cast<std::size_t>(targets.rows()), 0.0);
  for (const auto& r : reconstructions) {
    if (r.rows() != targets.rows() || r.cols() != targets.cols()) {
      throw DimensionError("reconstruction shape differs from targets");
    }
    for (Eigen::Index i = 0; i < targets.rows(); ++i) {
      out[static_cast<std::size_t>(i)] += (r.row(i) - targets.row(i)).squaredNorm();
    }
  }
  for (auto& v : out) v /= static_cast<double>(reconstructions.size());
  return out;
}

namespace {

struct RoundScores {
  std::vector<double> contrastive;
  std::vector<double> reconstruction;
};

RoundScores score_outputs(const BatchOutputs& outputs, const ViewPairBatch& batch, const ForwardOptions& f) {
  RoundScores s;
  if (f.contrastive) {
    const auto pl = column(outputs.local.pos_scores);
    const auto nl = column(outputs.local.neg_scores);
    if (outputs.global) {
      const auto pg = column(outputs.global->pos_scores);
      const auto ng = column(outputs.global->neg_scores);
      s.contrastive = contrastive_scores(pl, nl, pg, ng);
    } else {
      s.contrastive = contrastive_scores(pl, nl);
    }
  } else {
    s.contrastive.assign(batch.size(), 0.0);
  }
  std::vector<RowMatrix> recons;
  if (outputs.local.reconstruction) recons.push_back(outputs.local.reconstruction->value());
  if (outputs.global && outputs.global->reconstruction) recons.push_back(outputs.global->reconstruction->value());
  if (f.reconstruction && !recons.empty()) {
    s.reconstruction = reconstruction_scores(recons, batch.target_attributes);
  } else {
    s.reconstruction.assign(batch.size(), 0.0);
  }
  return s;
}

}  // namespace

std::vector<double> score_contrastive_round(const ModelParams& params, const ViewPairBatch& batch,
                                            const TrainConfig& config) {
  auto f = config.forward_options();
  f.reconstruction = false;
  return score_outputs(forward_batch(params.detached(), batch, f), batch, f).contrastive;
}

std::vector<double> score_reconstruction_round(const ModelParams& params, const ViewPairBatch& batch,
                                               const TrainConfig& config) {
  auto f = config.forward_options();
  f.contrastive = false;
  return score_outputs(forward_batch(params.detached(), batch, f), batch, f).reconstruction;
}

std::vector<double> normalize_scores(std::span<const double> values, Normalization method) {
  std::vector<double> out(values.size(), 0.0);
  if (values.empty()) return out;
  if (method == Normalization::kMinMax) {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) return out;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - *lo) / range;
    return out;
  }
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  if (!(sd > 0.0)) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / sd;
  return out;
}

std::vector<double> combine_scores(std::span<const double> contrastive, std::span<const double> reconstruction,
                                   const TrainConfig& config) {
  if (contrastive.size() != reconstruction.size()) throw DimensionError("score vectors differ in length");
  const auto con = normalize_scores(contrastive, config.normalization);
  const auto res = normalize_scores(reconstruction, config.normalization);
  if (config.variant == Variant::kSubR) return con;
  if (config.variant == Variant::kSubC) return res;
  const double gamma = config.effective_gamma();
  std::vector<double> out(con.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = con[i] + gamma * res[i];
  return out;
}

std::uint64_t inference_round_key(std::int64_t round) {
  return kInferenceBase + static_cast<std::uint64_t>(round);
}

ScoreReport infer(const ModelParams& params, const TrainConfig& config, const AttributedGraph& g,
                  const DiffusionMatrix* diffusion) {
  config.validate();
  const auto forward = config.forward_options();
  if (forward.use_global && diffusion == nullptr) {
    throw ConfigError("scoring with the global view requires a diffusion matrix");
  }
  const auto frozen = params.detached();
  const auto sampler = config.sampler_config();
  const auto n = static_cast<std::size_t>(g.num_nodes());

  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  const auto batches = partition_batches(order, config.batch_size);

  ScoreReport report;
  report.contrastive.assign(n, 0.0);
  report.reconstruction.assign(n, 0.0);
  for (std::int64_t r = 0; r < config.rounds; ++r) {
    for (const auto& targets : batches) {
      const auto batch = make_batch(g, forward.use_global ? diffusion : nullptr, targets, sampler,
                                    config.seed, inference_round_key(r));
      const auto scores = score_outputs(forward_batch(frozen, batch, forward), batch, forward);
      for (std::size_t b = 0; b < targets.size(); ++b) {
        report.contrastive[targets[b]] += scores.contrastive[b];
        report.reconstruction[targets[b]] += scores.reconstruction[b];
      }
    }
  }
  const double rounds = static_cast<double>(config.rounds);
  for (std::size_t i = 0; i < n; ++i) {
    report.contrastive[i] /= rounds;
    report.reconstruction[i] /= rounds;
  }
  report.combined = combine_scores(report.contrastive, report.reconstruction, config);
  report.labels = g.labels();
  report.config_hash = config.hash();
  report.seed = config.seed;
  report.rounds = config.rounds;
  report.low_round = config.low_round();
  report.variant = config.variant;
  return report;
}

void write_score_report(const ScoreReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "node_id,contrastive,reconstruction,combined" << (report.labels ? ",label" : "") << '\n';
  for (std::size_t i = 0; i < report.combined.size(); ++i) {
    out << i << ',' << format_double(report.contrastive[i]) << ',' << format_double(report.reconstruction[i])
        << ',' << format_double(report.combined[i]);
    if (report.labels) out << ',' << static_cast<int>((*report.labels)[i]);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

ScoreReport read_score_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty score report " + path.string());
  const bool has_labels = line.find(",label") != std::string::npos;
  ScoreReport report;
  if (has_labels) report.labels.emplace();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    if (cells.size() != (has_labels ? 5u : 4u)) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": wrong column count");
    }
    try {
      if (std::stoul(cells[0]) != report.combined.size()) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": node ids must be 0..N-1 in order");
      }
      report.contrastive.push_back(std::stod(cells[1]));
      report.reconstruction.push_back(std::stod(cells[2]));
      report.combined.push_back(std::stod(cells[3]));
      if (has_labels) report.labels->push_back(static_cast<std::uint8_t>(std::stoi(cells[4])));
    } catch (const std::logic_error&) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": non-numeric cell");
    }
  }
  return report;
}

void write_epoch_log(std::span<const EpochRecord> log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,loss_con,loss_res,loss_total\n";
  for (const auto& r : log) {
    out << r.epoch << ',' << format_double(r.loss_con) << ',' << format_double(r.loss_res) << ','
        << format_double(r.loss_total) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace subcr
