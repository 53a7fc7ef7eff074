#include "subcr/model.hpp"

#include "subcr/error.hpp"

#include <memory>

namespace subcr {

namespace {

using nn::Tensor;

ViewWeights init_view(const ModelConfig& c, Rng& rng) {
  const auto f = c.num_features;
  const auto d = c.embedding_dim;
  const auto z = std::max<Eigen::Index>(c.subgraph_size - 1, 1) * d;
  ViewWeights w;
  w.gcn = Tensor(nn::uniform_init(f, d, f, rng), true);
  w.discriminator = Tensor(nn::uniform_init(d, d, d, rng), true);
  w.decoder.hidden_weight = Tensor(nn::uniform_init(z, d, z, rng), true);
  w.decoder.hidden_bias = Tensor(nn::Matrix::Zero(1, d), true);
  w.decoder.output_weight = Tensor(nn::uniform_init(d, f, d, rng), true);
  w.decoder.output_bias = Tensor(nn::Matrix::Zero(1, f), true);
  return w;
}

void append_named(const std::string& prefix, const ViewWeights& w,
                  std::vector<std::pair<std::string, Tensor>>& out) {
  out.emplace_back(prefix + ".gcn", w.gcn);
  out.emplace_back(prefix + ".discriminator", w.discriminator);
  out.emplace_back(prefix + ".decoder.hidden_weight", w.decoder.hidden_weight);
  out.emplace_back(prefix + ".decoder.hidden_bias", w.decoder.hidden_bias);
  out.emplace_back(prefix + ".decoder.output_weight", w.decoder.output_weight);
  out.emplace_back(prefix + ".decoder.output_bias", w.decoder.output_bias);
}

Tensor detach(const Tensor& t) { return Tensor(t.value(), false); }

ViewWeights detach(const ViewWeights& w) {
  return {detach(w.gcn), detach(w.discriminator),
          {detach(w.decoder.hidden_weight), detach(w.decoder.hidden_bias),
           detach(w.decoder.output_weight), detach(w.decoder.output_bias)}};
}

/// Attribute rows stacked slot by slot; sparse when that is cheaper.
class StackedRows {
 public:
  explicit StackedRows(nn::Matrix rows) {
    const auto nnz = (rows.array() != 0.0).count();
    if (rows.size() > 0 && static_cast<double>(nnz) < 0.2 * static_cast<double>(rows.size())) {
      sparse_ = std::make_shared<const SparseRowMatrix>(rows.sparseView());
    } else {
      dense_ = Tensor(std::move(rows));
    }
  }

  Tensor times(const Tensor& w) const {
    return sparse_ ? nn::sparse_matmul(sparse_, w) : nn::matmul(dense_, w);
  }

 private:
  std::shared_ptr<const SparseRowMatrix> sparse_;
  Tensor dense_;
};

StackedRows stack_attributes(const std::vector<const SubgraphView*>& views, Eigen::Index p,
                             Eigen::Index f) {
  nn::Matrix rows(static_cast<Eigen::Index>(views.size()) * p, f);
  for (std::size_t b = 0; b < views.size(); ++b) {
    if (views[b]->attributes.rows() != p) throw DimensionError("subgraph size differs within batch");
    rows.middleRows(static_cast<Eigen::Index>(b) * p, p) = views[b]->attributes;
  }
  return StackedRows(std::move(rows));
}

std::vector<nn::Matrix> adjacency_blocks(const std::vector<const SubgraphView*>& views) {
  std::vector<nn::Matrix> blocks;
  blocks.reserve(views.size());
  for (const auto* v : views) {
    if (v->adjacency.size() == 0) throw DimensionError("view has no adjacency");
    blocks.push_back(v->adjacency);
  }
  return blocks;
}

Tensor zero_scalar() { return Tensor::scalar(0.0); }

}  // namespace

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
  if (config.num_features < 1 || config.embedding_dim < 1 || config.subgraph_size < 1) {
    throw ConfigError("model dimensions must be positive");
  }
  Rng rng(seed);
  ModelParams p;
  p.config_ = config;
  p.local_ = init_view(config, rng);
  if (!config.share_weights) p.global_ = init_view(config, rng);
  return p;
}

std::vector<std::pair<std::string, nn::Tensor>> ModelParams::named_tensors() const {
  std::vector<std::pair<std::string, Tensor>> out;
  append_named("local", local_, out);
  if (!config_.share_weights) append_named("global", global_, out);
  return out;
}

std::vector<nn::Tensor> ModelParams::tensors() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_tensors()) out.push_back(t);
  return out;
}

void ModelParams::zero_grad() {
  for (auto& t : tensors()) t.zero_grad();
}

ModelParams ModelParams::detached() const {
  ModelParams p;
  p.config_ = config_;
  p.local_ = detach(local_);
  if (!config_.share_weights) p.global_ = detach(global_);
  return p;
}

std::vector<nn::NamedMatrix> ModelParams::to_named() const {
  std::vector<nn::NamedMatrix> out;
  for (const auto& [name, t] : named_tensors()) out.emplace_back(name, t.value());
  return out;
}

ModelParams ModelParams::from_named(const ModelConfig& config, std::span<const nn::NamedMatrix> named) {
  ModelParams p = init(config, 0);
  auto expected = p.named_tensors();
  if (expected.size() != named.size()) {
    throw DimensionError("checkpoint holds " + std::to_string(named.size()) + " tensors, model needs " +
                         std::to_string(expected.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    auto& [name, tensor] = expected[i];
    if (named[i].first != name) {
      throw DimensionError("checkpoint tensor '" + named[i].first + "' where '" + name + "' expected");
    }
    if (named[i].second.rows() != tensor.rows() || named[i].second.cols() != tensor.cols()) {
      throw DimensionError("checkpoint tensor '" + name + "' has the wrong shape");
    }
    tensor.mutable_value() = named[i].second;
  }
  return p;
}

bool ModelParams::all_finite() const {
  for (const auto& t : tensors()) {
    if (!t.value().allFinite()) return false;
  }
  return true;
}

Tensor encode_subgraph(const SubgraphView& view, const Tensor& weight) {
  if (view.attributes.cols() != weight.rows()) {
    throw DimensionError("encode_subgraph: attributes have " + std::to_string(view.attributes.cols()) +
                         " columns, weight is " + nn::shape_string(weight));
  }
  const Tensor a(view.adjacency);
  const Tensor x(view.attributes);
  return nn::relu(nn::matmul(a, nn::matmul(x, weight)));
}

Tensor map_target(const Tensor& x, const Tensor& weight) { return nn::relu(nn::matmul(x, weight)); }

Tensor readout(const Tensor& embeddings) { return nn::mean_rows(embeddings); }

Tensor discriminate(const Tensor& h, const Tensor& e, const Tensor& weight) {
  return nn::sigmoid(nn::matmul(nn::matmul(h, weight), nn::transpose(e)));
}

std::optional<Tensor> decode_attributes(const Tensor& embeddings, const DecoderWeights& decoder) {
  const auto p = embeddings.rows();
  if (p < 2) return std::nullopt;
  const auto z = nn::reshape(nn::slice_rows(embeddings, 1, p), 1, (p - 1) * embeddings.cols());
  const auto hidden =
      nn::relu(nn::add(nn::matmul(z, decoder.hidden_weight), decoder.hidden_bias));
  return nn::add(nn::matmul(hidden, decoder.output_weight), decoder.output_bias);
}

Tensor intra_loss(const Tensor& pos_scores, const Tensor& neg_scores) {
  if (pos_scores.shape() != neg_scores.shape() || pos_scores.cols() != 1) {
    throw DimensionError("intra_loss: expected matching B x 1 scores, got " +
                         nn::shape_string(pos_scores) + " and " + nn::shape_string(neg_scores));
  }
  const auto b = static_cast<double>(pos_scores.rows());
  const auto pos = nn::log(nn::clamp(pos_scores, kLogClamp, 1.0 - kLogClamp));
  const auto neg = nn::log(nn::add_scalar(
      nn::scale(nn::clamp(neg_scores, kLogClamp, 1.0 - kLogClamp), -1.0), 1.0));
  return nn::scale(nn::sum(nn::add(pos, neg)), -0.5 / b);
}

Tensor inter_loss(const Tensor& s1, const Tensor& s2, bool per_node_mean) {
  const auto err = nn::squared_error(s1, s2);
  return per_node_mean ? nn::scale(err, 1.0 / static_cast<double>(s1.rows())) : err;
}

Tensor recon_loss(std::span<const Tensor> reconstructions, const Tensor& targets) {
  if (reconstructions.empty()) throw DimensionError("recon_loss without reconstructions");
  std::vector<Tensor> errors;
  for (const auto& r : reconstructions) errors.push_back(nn::squared_error(r, targets));
  Tensor total = errors.front();
  for (std::size_t i = 1; i < errors.size(); ++i) total = nn::add(total, errors[i]);
  const double denom = static_cast<double>(reconstructions.size()) * static_cast<double>(targets.rows());
  return nn::scale(total, 1.0 / denom);
}

Tensor total_loss(const Tensor& contrastive, const Tensor& reconstruction, double gamma) {
  if (gamma < 0.0) throw ConfigError("gamma must be non-negative");
  return nn::add(contrastive, nn::scale(reconstruction, gamma));
}

namespace {

ViewOutputs forward_view(const ViewWeights& w, const ModelConfig& c, const ViewPairBatch& batch,
                         bool global, const StackedRows& stacked, const Tensor& target_rows,
                         const ForwardOptions& options) {
  const auto p = c.subgraph_size;
  std::vector<const SubgraphView*> views;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    views.push_back(global ? &batch.global_pos[b] : &batch.local_pos[b]);
  }
  const auto blocks = adjacency_blocks(views);

  ViewOutputs out;
  out.embeddings = nn::relu(nn::block_matmul(blocks, stacked.times(w.gcn)));
  out.readouts = nn::block_mean_rows(out.embeddings, p);

  if (options.contrastive) {
    out.targets = nn::relu(nn::matmul(target_rows, w.gcn));
    const auto projected = nn::matmul(out.targets, w.discriminator);
    out.pos_scores = nn::sigmoid(nn::row_dot(projected, out.readouts));

    Tensor neg_readouts;
    if (batch.negative_mode() == NegativeMode::kRotate) {
      std::vector<Eigen::Index> index(batch.size());
      for (std::size_t b = 0; b < batch.size(); ++b) {
        index[b] = static_cast<Eigen::Index>(batch.negative_slot(b));
      }
      neg_readouts = nn::gather_rows(out.readouts, index);
    } else {
      std::vector<const SubgraphView*> neg_views;
      for (std::size_t b = 0; b < batch.size(); ++b) {
        neg_views.push_back(global ? &batch.global_neg(b) : &batch.local_neg(b));
      }
      const auto neg_stacked = stack_attributes(neg_views, p, c.num_features);
      const auto neg_h =
          nn::relu(nn::block_matmul(adjacency_blocks(neg_views), neg_stacked.times(w.gcn)));
      neg_readouts = nn::block_mean_rows(neg_h, p);
    }
    out.neg_scores = nn::sigmoid(nn::row_dot(projected, neg_readouts));
  }

  if (options.reconstruction && p >= 2) {
    const auto z = nn::block_tail_flatten(out.embeddings, p);
    const auto hidden = nn::relu(nn::add_row(nn::matmul(z, w.decoder.hidden_weight), w.decoder.hidden_bias));
    out.reconstruction =
        nn::add_row(nn::matmul(hidden, w.decoder.output_weight), w.decoder.output_bias);
  }
  return out;
}

}  // namespace

BatchOutputs forward_batch(const ModelParams& params, const ViewPairBatch& batch,
                           const ForwardOptions& options) {
  const auto& c = params.config();
  if (batch.size() < 2) throw ConfigError("batch needs at least two slots");
  if (batch.target_attributes.cols() != c.num_features) {
    throw DimensionError("batch has " + std::to_string(batch.target_attributes.cols()) +
                         " features, model expects " + std::to_string(c.num_features));
  }
  std::vector<const SubgraphView*> views;
  for (const auto& v : batch.local_pos) views.push_back(&v);
  // Both views share the masked attribute block, so one stack serves both.
  const auto stacked = stack_attributes(views, c.subgraph_size, c.num_features);
  const Tensor target_rows(batch.target_attributes);

  BatchOutputs out;
  out.local = forward_view(params.local(), c, batch, false, stacked, target_rows, options);
  if (options.use_global) {
    out.global = forward_view(params.global(), c, batch, true, stacked, target_rows, options);
  }
  return out;
}

LossTerms compute_losses(const BatchOutputs& outputs, const ViewPairBatch& batch,
                         const ForwardOptions& forward, const LossOptions& options) {
  LossTerms terms;
  std::vector<const ViewOutputs*> views{&outputs.local};
  if (outputs.global) views.push_back(&*outputs.global);
  const double view_weight = 1.0 / static_cast<double>(views.size());

  if (forward.contrastive) {
    terms.intra = intra_loss(views[0]->pos_scores, views[0]->neg_scores);
    for (std::size_t v = 1; v < views.size(); ++v) {
      terms.intra = nn::add(terms.intra, intra_loss(views[v]->pos_scores, views[v]->neg_scores));
    }
    terms.intra = nn::scale(terms.intra, view_weight);
    terms.inter = outputs.global ? inter_loss(outputs.local.pos_scores, outputs.global->pos_scores,
                                              options.inter_per_node_mean)
                                 : zero_scalar();
    terms.contrastive = nn::add(terms.inter, terms.intra);
  } else {
    terms.intra = zero_scalar();
    terms.inter = zero_scalar();
    terms.contrastive = zero_scalar();
  }

  std::vector<Tensor> recons;
  for (const auto* v : views) {
    if (v->reconstruction) recons.push_back(*v->reconstruction);
  }
  if (forward.reconstruction && !recons.empty()) {
    terms.reconstruction = recon_loss(recons, Tensor(batch.target_attributes));
  } else {
    terms.reconstruction = zero_scalar();
  }
  terms.total = total_loss(terms.contrastive, terms.reconstruction, options.gamma);
  return terms;
}

}  // namespace subcr
