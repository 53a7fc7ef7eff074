#pragma once

#include "subcr/diffusion.hpp"
#include "subcr/model.hpp"
#include "subcr/sampler.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace subcr {

enum class Variant { kFull, kSubR, kSubC, kSubWeight, kSubGlobal };
enum class Normalization { kMinMax, kZScore };
enum class DiffusionMethod { kAuto, kDense, kIterative };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);
std::string to_string(Normalization n);
Normalization parse_normalization(const std::string& name);
std::string to_string(DiffusionMethod m);
DiffusionMethod parse_diffusion_method(const std::string& name);

struct TrainConfig {
  std::int64_t subgraph_size = 4;
  std::int64_t embedding_dim = 64;
  std::int64_t batch_size = 300;
  std::int64_t epochs = 100;
  double lr = 1e-3;
  double gamma = 0.6;
  double alpha = 0.15;
  double restart_prob = 0.1;
  std::int64_t rounds = 300;
  std::uint64_t seed = 0;
  Variant variant = Variant::kFull;

  NegativeMode negatives = NegativeMode::kRotate;
  bool share_weights = false;
  bool inter_per_node_mean = false;
  Normalization normalization = Normalization::kMinMax;

  DiffusionMethod diffusion = DiffusionMethod::kAuto;
  /// Graphs above this size use the iterative, truncated path under kAuto.
  std::int64_t dense_diffusion_limit = 5000;
  std::int64_t dense_diffusion_cap = 25000;
  double diffusion_tol = 1e-6;
  std::int64_t diffusion_max_iter = 2000;
  /// Row truncation; unset means "off for dense, 128 for iterative".
  std::optional<std::int64_t> diffusion_topk;

  /// gamma after the variant override (sub-weight forces 1).
  double effective_gamma() const;
  ForwardOptions forward_options() const;
  SamplerConfig sampler_config() const;
  ModelConfig model_config(Eigen::Index num_features) const;
  bool needs_diffusion() const { return variant != Variant::kSubGlobal; }
  /// Rounds below the reference 300 are flagged in reports.
  bool low_round() const { return rounds < 300; }
  void validate() const;

  /// Canonical "key=value" lines; the config hash is FNV-1a 64 over this text.
  std::string canonical() const;
  std::string hash() const;
};

struct EpochRecord {
  std::int64_t epoch = 0;
  double loss_con = 0.0;
  double loss_res = 0.0;
  double loss_total = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> log;
};

/// Diffusion as configured: dense closed form, or the truncated power
/// iteration for large graphs.
DiffusionMatrix build_diffusion(const TrainConfig& config, const AttributedGraph& g);

/// Target batches covering `order` in chunks of `batch_size`; a trailing
/// single node joins the previous batch so every batch has a negative.
std::vector<std::vector<NodeId>> partition_batches(std::span<const NodeId> order,
                                                   std::int64_t batch_size);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minimizes the joint objective with Adam for config.epochs epochs. Each epoch
/// visits every node once in a seeded shuffled order.
TrainResult train(const TrainConfig& config, const AttributedGraph& g, const DiffusionMatrix* diffusion,
                  const EpochCallback& on_epoch = {});

/// 0.5 * sum over views of (s_neg - s_pos), divided by the view count for one view.
std::vector<double> contrastive_scores(std::span<const double> pos_local, std::span<const double> neg_local,
                                       std::span<const double> pos_global = {},
                                       std::span<const double> neg_global = {});
/// Mean over views of the squared reconstruction error per node.
std::vector<double> reconstruction_scores(std::span<const RowMatrix> reconstructions,
                                          const RowMatrix& targets);

std::vector<double> score_contrastive_round(const ModelParams& params, const ViewPairBatch& batch,
                                            const TrainConfig& config);
std::vector<double> score_reconstruction_round(const ModelParams& params, const ViewPairBatch& batch,
                                               const TrainConfig& config);

/// Min-max to [0, 1] or z-score; constant vectors map to all zeros.
std::vector<double> normalize_scores(std::span<const double> values, Normalization method);

struct ScoreReport {
  std::vector<double> contrastive;     ///< round-averaged, unnormalized
  std::vector<double> reconstruction;  ///< round-averaged, unnormalized
  std::vector<double> combined;
  std::optional<std::vector<std::uint8_t>> labels;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::int64_t rounds = 0;
  bool low_round = false;
  Variant variant = Variant::kFull;
};

/// Combined score from averaged component scores: normalized contrastive plus
/// gamma times normalized reconstruction (a single component for sub-r/sub-c).
std::vector<double> combine_scores(std::span<const double> contrastive, std::span<const double> reconstruction,
                                   const TrainConfig& config);

/// Averages per-node scores over config.rounds sampling rounds (every node is
/// scored in every round, in id order) and fuses them.
ScoreReport infer(const ModelParams& params, const TrainConfig& config, const AttributedGraph& g,
                  const DiffusionMatrix* diffusion);

void write_score_report(const ScoreReport& report, const std::filesystem::path& path);
ScoreReport read_score_report(const std::filesystem::path& path);
void write_epoch_log(std::span<const EpochRecord> log, const std::filesystem::path& path);

/// Round index used for the sampling streams of inference round r; training
/// epochs use their own index.
std::uint64_t inference_round_key(std::int64_t round);

}  // namespace subcr
