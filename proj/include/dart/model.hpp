#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dart/data.hpp"
#include "dart/embedding.hpp"
#include "dart/mlvae.hpp"
#include "dart/tensor.hpp"
#include "dart/types.hpp"
#include "dart/vq.hpp"

namespace dart {

struct ModelConfig {
  Index feature_dim = 0;  // 0 means: infer from the training data
  Index hidden_dim = 256;
  Index latent_dim = 8;
  Index codebook_speaker = 512;
  Index codebook_accent = 512;
  Scalar beta = 1e-4;
  Scalar learning_rate = 1e-3;
  Index warmup_steps = 200;
  std::vector<Index> anneal_steps = {1000, 1400, 1700};
  Index total_steps = 2000;
  Index batch_size = 32;
  std::uint64_t seed = 42;
  bool freeze_decoder = false;

  /// Throws ValidationError listing every violated field.
  void validate(bool require_feature_dim = true) const;
};

ModelConfig model_config_from_json(const std::string& text);
std::string model_config_to_json(const ModelConfig& cfg);

struct Parameter {
  std::string name;
  TensorPtr tensor;
  bool decoder = false;  // subject to the freeze_decoder flag
};

/// Pooling encoder with two tanh layers and four posterior heads, a decoder
/// that broadcasts the two quantized group latents over frames, and one
/// codebook per branch. Parameters live in `params` in a fixed order; the
/// named members alias the same tensors.
struct Model {
  ModelConfig config;
  std::vector<Parameter> params;
  Codebook speaker_book, accent_book;

  TensorPtr enc_w1, enc_b1, enc_w2, enc_b2;
  TensorPtr head_speaker_mean_w, head_speaker_mean_b;
  TensorPtr head_speaker_logvar_w, head_speaker_logvar_b;
  TensorPtr head_accent_mean_w, head_accent_mean_b;
  TensorPtr head_accent_logvar_w, head_accent_logvar_b;
  TensorPtr dec_w1, dec_b1, dec_w2, dec_b2, dec_out_w, dec_out_b;

  Index parameter_count() const;
  Model clone() const;
};

Model build_model(const ModelConfig& cfg);

struct LossBreakdown {
  Scalar recon = 0, kl = 0, commitment = 0, codebook = 0, total = 0, beta = 0;
};

/// Scalar loss nodes of one batch graph.
struct BatchLossNodes {
  NodeId recon, kl, commitment, codebook, total;
  LossBreakdown breakdown(const Graph& g, Scalar beta) const;
};

/// Builds the full objective over `batch` (dataset indices) from parameter
/// leaves `param_ids`, ordered as Model::params. Group latents are sampled
/// with `*_noise` when given (training) and collapse to posterior means when
/// null (evaluation). `vq` off bypasses quantization so every gradient path
/// avoids stop_gradient; used by gradient verification.
BatchLossNodes build_batch_loss(Graph& g, const std::vector<NodeId>& param_ids,
                                const ModelConfig& cfg, const Dataset& data,
                                const std::vector<Index>& batch,
                                const std::map<std::string, Vector>* speaker_noise,
                                const std::map<std::string, Vector>* accent_noise,
                                std::vector<std::uint64_t>* speaker_usage,
                                std::vector<std::uint64_t>* accent_usage, bool vq = true);

/// Linear ramp to the peak over warmup_steps, then a 0.3 factor for every
/// anneal step strictly passed.
Scalar learning_rate(Index step, const ModelConfig& cfg);

Scalar reconstruction_loss(const Matrix& xhat, const Matrix& x);

struct TrainOutcome {
  Model model;
  std::vector<LossBreakdown> history;
};

TrainOutcome train(const ModelConfig& cfg, const Dataset& data, const Model* init_from = nullptr);

/// Deterministic no-noise pass over a whole dataset: per-utterance posterior
/// means, accumulated group posteriors, and quantized group vectors.
struct EvalLatents {
  std::vector<GaussianPosterior> speaker_post, accent_post;
  std::map<std::string, GaussianPosterior> speaker_group, accent_group;
  std::map<std::string, QuantizationResult> speaker_q, accent_q;
};

EvalLatents eval_latents(const Model& m, const Dataset& data);

Matrix decode_latents(const Model& m, const Vector& speaker_latent, const Vector& accent_latent,
                      Index frames);

struct ForwardOutput {
  Matrix reconstruction;
  GaussianPosterior speaker_posterior, accent_posterior;
  QuantizationResult speaker_q, accent_q;
};

std::vector<ForwardOutput> forward_eval(const Model& m, const Dataset& data);

Matrix reconstruct(const Model& m, const Dataset& data, Index utterance);

std::vector<EmbeddingRecord> extract_embeddings(const Model& m, const Dataset& data);

/// Decodes the utterance's own speaker group latent with the target accent's
/// group latent, both accumulated over `reference_set` (the utterance itself
/// joins the pool when its id is absent).
Matrix convert(const Model& m, const Utterance& utterance, const std::string& target_accent,
               const Dataset& reference_set);

void save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace dart
