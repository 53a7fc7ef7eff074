#pragma once

#include "subcr/nn.hpp"
#include "subcr/sampler.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace subcr {

struct ModelConfig {
  Eigen::Index num_features = 0;
  Eigen::Index embedding_dim = 64;
  Eigen::Index subgraph_size = 4;
  /// Use one set of weights for both views.
  bool share_weights = false;
};

/// Two-layer attribute decoder: linear -> ReLU -> linear.
struct DecoderWeights {
  nn::Tensor hidden_weight;  ///< (P-1)*d x d
  nn::Tensor hidden_bias;    ///< 1 x d
  nn::Tensor output_weight;  ///< d x F
  nn::Tensor output_bias;    ///< 1 x F
};

/// Weights of one view.
struct ViewWeights {
  nn::Tensor gcn;            ///< F x d
  nn::Tensor discriminator;  ///< d x d
  DecoderWeights decoder;
};

class ModelParams {
 public:
  ModelParams() = default;

  /// Uniform(+-1/sqrt(fan_in)) weights, zero biases.
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const ViewWeights& local() const { return local_; }
  const ViewWeights& global() const { return config_.share_weights ? local_ : global_; }

  /// Distinct trainable tensors with stable names (shared weights listed once).
  std::vector<std::pair<std::string, nn::Tensor>> named_tensors() const;
  std::vector<nn::Tensor> tensors() const;
  void zero_grad();

  /// Copy whose tensors do not require grad (inference builds no tape).
  ModelParams detached() const;

  std::vector<nn::NamedMatrix> to_named() const;
  static ModelParams from_named(const ModelConfig& config, std::span<const nn::NamedMatrix> named);

  bool all_finite() const;

 private:
  ModelConfig config_;
  ViewWeights local_;
  ViewWeights global_;
};

// ---- single-subgraph building blocks -------------------------------------------

/// One GCN layer, relu(A X W), over a view whose adjacency is already
/// normalized (local) or diffusion-weighted (global).
nn::Tensor encode_subgraph(const SubgraphView& view, const nn::Tensor& weight);
/// relu(x W) for the unmasked 1 x F target row.
nn::Tensor map_target(const nn::Tensor& x, const nn::Tensor& weight);
/// Average pooling over all subgraph rows, the masked target included.
nn::Tensor readout(const nn::Tensor& embeddings);
/// sigmoid(h W_s e^T), a 1x1 tensor.
nn::Tensor discriminate(const nn::Tensor& h, const nn::Tensor& e, const nn::Tensor& weight);
/// Decodes the target's attributes from rows 1..P-1 of `embeddings`
/// concatenated in order; nullopt when the subgraph has no neighbor rows.
std::optional<nn::Tensor> decode_attributes(const nn::Tensor& embeddings, const DecoderWeights& decoder);

// ---- losses ----------------------------------------------------------------------

/// Scores are clamped this far from 0 and 1 before taking logs.
inline constexpr double kLogClamp = 1e-12;

/// Batch mean of -(log s + log(1 - s~)) / 2 for one view. Inputs are B x 1.
nn::Tensor intra_loss(const nn::Tensor& pos_scores, const nn::Tensor& neg_scores);
/// ||s1 - s2||^2 over the batch's positive scores, or its mean when `per_node_mean`.
nn::Tensor inter_loss(const nn::Tensor& s1, const nn::Tensor& s2, bool per_node_mean = false);
/// (1 / (V B)) sum over the V views and B nodes of the squared reconstruction error.
nn::Tensor recon_loss(std::span<const nn::Tensor> reconstructions, const nn::Tensor& targets);
nn::Tensor total_loss(const nn::Tensor& contrastive, const nn::Tensor& reconstruction, double gamma);

// ---- batched forward pass -----------------------------------------------------------

struct ViewOutputs {
  nn::Tensor embeddings;  ///< (B*P) x d, stacked per slot
  nn::Tensor targets;     ///< B x d
  nn::Tensor readouts;    ///< B x d
  nn::Tensor pos_scores;  ///< B x 1
  nn::Tensor neg_scores;  ///< B x 1
  std::optional<nn::Tensor> reconstruction;  ///< B x F
};

struct ForwardOptions {
  bool use_global = true;
  bool contrastive = true;
  bool reconstruction = true;
};

struct BatchOutputs {
  ViewOutputs local;
  std::optional<ViewOutputs> global;
};

BatchOutputs forward_batch(const ModelParams& params, const ViewPairBatch& batch,
                           const ForwardOptions& options);

struct LossOptions {
  double gamma = 0.6;
  bool inter_per_node_mean = false;
};

struct LossTerms {
  nn::Tensor intra;
  nn::Tensor inter;
  nn::Tensor contrastive;
  nn::Tensor reconstruction;
  nn::Tensor total;
};

/// Joint objective L = (L_inter + L_intra) + gamma L_res. Disabled modules
/// contribute a constant zero; with one view, L_intra and L_res average over
/// that view alone and L_inter is zero.
LossTerms compute_losses(const BatchOutputs& outputs, const ViewPairBatch& batch,
                         const ForwardOptions& forward, const LossOptions& options);

}  // namespace subcr
