#include "dart/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "dart/error.hpp"

namespace dart {

using nlohmann::json;

namespace {

// Positions in Model::params and in the param_ids handed to
// build_batch_loss.
enum ParamIx : std::size_t {
  kEncW1 = 0,
  kEncB1,
  kEncW2,
  kEncB2,
  kHeadSpeakerMeanW,
  kHeadSpeakerMeanB,
  kHeadSpeakerLogvarW,
  kHeadSpeakerLogvarB,
  kHeadAccentMeanW,
  kHeadAccentMeanB,
  kHeadAccentLogvarW,
  kHeadAccentLogvarB,
  kDecW1,
  kDecB1,
  kDecW2,
  kDecB2,
  kDecOutW,
  kDecOutB,
  kBookSpeaker,
  kBookAccent,
  kParamCount,
};

constexpr Scalar kAdamBeta1 = 0.9;
constexpr Scalar kAdamBeta2 = 0.98;
constexpr Scalar kAdamEps = 1e-9;

}  // namespace

void ModelConfig::validate(bool require_feature_dim) const {
  std::vector<std::string> bad;
  if (require_feature_dim ? feature_dim < 1 : feature_dim < 0) bad.push_back("feature_dim");
  if (hidden_dim < 1) bad.push_back("hidden_dim");
  if (latent_dim < 1) bad.push_back("latent_dim");
  if (codebook_speaker < 1) bad.push_back("codebook_speaker");
  if (codebook_accent < 1) bad.push_back("codebook_accent");
  if (!(beta >= 0) || !std::isfinite(beta)) bad.push_back("beta");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) bad.push_back("learning_rate");
  if (total_steps < 1) bad.push_back("total_steps");
  if (warmup_steps < 0 || warmup_steps >= total_steps) bad.push_back("warmup_steps");
  for (std::size_t i = 0; i + 1 < anneal_steps.size(); ++i) {
    if (anneal_steps[i] >= anneal_steps[i + 1]) {
      bad.push_back("anneal_steps");
      break;
    }
  }
  if (batch_size < 1) bad.push_back("batch_size");
  if (!bad.empty()) {
    std::string msg = "model config: invalid fields:";
    for (const auto& f : bad) msg += " " + f;
    throw ValidationError(msg);
  }
}

ModelConfig model_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("model config: ") + e.what());
  }
  if (!j.is_object()) throw DataError("model config: top level must be an object");
  static const std::set<std::string> known = {
      "feature_dim", "hidden_dim",   "latent_dim",   "codebook_sizes", "beta",
      "learning_rate", "warmup_steps", "anneal_steps", "total_steps",  "batch_size",
      "seed",         "freeze_decoder"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ValidationError("model config: unknown field '" + key + "'");
  }
  ModelConfig cfg;
  try {
    if (j.contains("feature_dim")) cfg.feature_dim = j.at("feature_dim").get<Index>();
    if (j.contains("hidden_dim")) cfg.hidden_dim = j.at("hidden_dim").get<Index>();
    if (j.contains("latent_dim")) cfg.latent_dim = j.at("latent_dim").get<Index>();
    if (j.contains("codebook_sizes")) {
      const json& sizes = j.at("codebook_sizes");
      if (!sizes.is_array() || sizes.size() != 2) {
        throw ValidationError("model config: codebook_sizes must be [speaker, accent]");
      }
      cfg.codebook_speaker = sizes.at(0).get<Index>();
      cfg.codebook_accent = sizes.at(1).get<Index>();
    }
    if (j.contains("beta")) cfg.beta = j.at("beta").get<Scalar>();
    if (j.contains("learning_rate")) cfg.learning_rate = j.at("learning_rate").get<Scalar>();
    if (j.contains("warmup_steps")) cfg.warmup_steps = j.at("warmup_steps").get<Index>();
    if (j.contains("anneal_steps")) {
      cfg.anneal_steps = j.at("anneal_steps").get<std::vector<Index>>();
    }
    if (j.contains("total_steps")) cfg.total_steps = j.at("total_steps").get<Index>();
    if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<Index>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("freeze_decoder")) cfg.freeze_decoder = j.at("freeze_decoder").get<bool>();
  } catch (const json::exception& e) {
    throw DataError(std::string("model config: ") + e.what());
  }
  cfg.validate(false);
  return cfg;
}

std::string model_config_to_json(const ModelConfig& cfg) {
  json j;
  j["feature_dim"] = cfg.feature_dim;
  j["hidden_dim"] = cfg.hidden_dim;
  j["latent_dim"] = cfg.latent_dim;
  j["codebook_sizes"] = {cfg.codebook_speaker, cfg.codebook_accent};
  j["beta"] = cfg.beta;
  j["learning_rate"] = cfg.learning_rate;
  j["warmup_steps"] = cfg.warmup_steps;
  j["anneal_steps"] = cfg.anneal_steps;
  j["total_steps"] = cfg.total_steps;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  j["freeze_decoder"] = cfg.freeze_decoder;
  return j.dump();
}

Index Model::parameter_count() const {
  Index n = 0;
  for (const auto& p : params) n += p.tensor->size();
  return n;
}

Model build_model(const ModelConfig& cfg) {
  cfg.validate(true);
  const Index f = cfg.feature_dim;
  const Index h = cfg.hidden_dim;
  const Index d = cfg.latent_dim;

  std::mt19937_64 rng(derive_seed(cfg.seed, 21));
  std::normal_distribution<Scalar> normal(0.0, 1.0);
  auto weight = [&](Index rows, Index cols) {
    const Scalar scale = 1.0 / std::sqrt(static_cast<Scalar>(rows));
    Vector v(rows * cols);
    for (Index i = 0; i < v.size(); ++i) v[i] = scale * normal(rng);
    return std::make_shared<Tensor>(Shape{rows, cols}, std::move(v), true);
  };
  auto bias = [&](Index cols) {
    return std::make_shared<Tensor>(Tensor::zeros({1, cols}, true));
  };

  Model m;
  m.config = cfg;
  m.enc_w1 = weight(f, h);
  m.enc_b1 = bias(h);
  m.enc_w2 = weight(h, h);
  m.enc_b2 = bias(h);
  m.head_speaker_mean_w = weight(h, d);
  m.head_speaker_mean_b = bias(d);
  m.head_speaker_logvar_w = weight(h, d);
  m.head_speaker_logvar_b = bias(d);
  m.head_accent_mean_w = weight(h, d);
  m.head_accent_mean_b = bias(d);
  m.head_accent_logvar_w = weight(h, d);
  m.head_accent_logvar_b = bias(d);
  m.dec_w1 = weight(2 * d, h);
  m.dec_b1 = bias(h);
  m.dec_w2 = weight(h, h);
  m.dec_b2 = bias(h);
  m.dec_out_w = weight(h, f);
  m.dec_out_b = bias(f);
  m.speaker_book = Codebook(cfg.codebook_speaker, d, Branch::speaker, cfg.seed);
  m.accent_book = Codebook(cfg.codebook_accent, d, Branch::accent, cfg.seed);

  m.params = {
      {"enc.w1", m.enc_w1, false},
      {"enc.b1", m.enc_b1, false},
      {"enc.w2", m.enc_w2, false},
      {"enc.b2", m.enc_b2, false},
      {"enc.head.speaker.mean.w", m.head_speaker_mean_w, false},
      {"enc.head.speaker.mean.b", m.head_speaker_mean_b, false},
      {"enc.head.speaker.logvar.w", m.head_speaker_logvar_w, false},
      {"enc.head.speaker.logvar.b", m.head_speaker_logvar_b, false},
      {"enc.head.accent.mean.w", m.head_accent_mean_w, false},
      {"enc.head.accent.mean.b", m.head_accent_mean_b, false},
      {"enc.head.accent.logvar.w", m.head_accent_logvar_w, false},
      {"enc.head.accent.logvar.b", m.head_accent_logvar_b, false},
      {"dec.w1", m.dec_w1, true},
      {"dec.b1", m.dec_b1, true},
      {"dec.w2", m.dec_w2, true},
      {"dec.b2", m.dec_b2, true},
      {"dec.out.w", m.dec_out_w, true},
      {"dec.out.b", m.dec_out_b, true},
      {"codebook.speaker", m.speaker_book.entries, false},
      {"codebook.accent", m.accent_book.entries, false},
  };
  return m;
}

Model Model::clone() const {
  Model copy = build_model(config);
  for (std::size_t i = 0; i < params.size(); ++i) {
    copy.params[i].tensor->values = params[i].tensor->values;
    copy.params[i].tensor->requires_grad = params[i].tensor->requires_grad;
    copy.params[i].tensor->grad.reset();
  }
  copy.speaker_book.usage_counts = speaker_book.usage_counts;
  copy.accent_book.usage_counts = accent_book.usage_counts;
  return copy;
}

LossBreakdown BatchLossNodes::breakdown(const Graph& g, Scalar beta_value) const {
  LossBreakdown b;
  b.recon = g.value(recon).values[0];
  b.kl = g.value(kl).values[0];
  b.commitment = g.value(commitment).values[0];
  b.codebook = g.value(codebook).values[0];
  b.total = g.value(total).values[0];
  b.beta = beta_value;
  return b;
}

BatchLossNodes build_batch_loss(Graph& g, const std::vector<NodeId>& param_ids,
                                const ModelConfig& cfg, const Dataset& data,
                                const std::vector<Index>& batch,
                                const std::map<std::string, Vector>* speaker_noise,
                                const std::map<std::string, Vector>* accent_noise,
                                std::vector<std::uint64_t>* speaker_usage,
                                std::vector<std::uint64_t>* accent_usage, bool vq) {
  if (param_ids.size() != kParamCount) {
    throw ContractViolation("batch loss: expected " + std::to_string(kParamCount) +
                            " parameter nodes, got " + std::to_string(param_ids.size()));
  }
  if (batch.empty()) throw ContractViolation("batch loss: empty batch");
  for (Index i : batch) {
    if (i < 0 || static_cast<std::size_t>(i) >= data.size()) {
      throw LookupError("batch loss: utterance index " + std::to_string(i) + " out of range");
    }
  }
  const auto b_count = static_cast<Index>(batch.size());
  const Scalar inv_b = 1.0 / static_cast<Scalar>(b_count);

  Matrix pooled(b_count, cfg.feature_dim);
  std::vector<std::string> speaker_labels(batch.size()), accent_labels(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const Utterance& u = data.utterances[static_cast<std::size_t>(batch[j])];
    if (u.features.cols() != cfg.feature_dim) {
      throw DimensionError("batch loss: utterance '" + u.utterance_id + "' has feature_dim " +
                           std::to_string(u.features.cols()) + ", model wants " +
                           std::to_string(cfg.feature_dim));
    }
    pooled.row(static_cast<Index>(j)) = u.features.colwise().mean();
    speaker_labels[j] = u.speaker_id;
    accent_labels[j] = u.accent_id;
  }

  const NodeId p = g.constant(Tensor::from_matrix(pooled));
  auto dense = [&](NodeId x, ParamIx w, ParamIx b, Index rows) {
    return add(g, matmul(g, x, param_ids[w]), broadcast_row(g, param_ids[b], rows));
  };
  const NodeId h1 = tanh(g, dense(p, kEncW1, kEncB1, b_count));
  const NodeId h2 = tanh(g, dense(h1, kEncW2, kEncB2, b_count));

  const NodeId mu_s = dense(h2, kHeadSpeakerMeanW, kHeadSpeakerMeanB, b_count);
  const NodeId lv_s =
      clamp(g, dense(h2, kHeadSpeakerLogvarW, kHeadSpeakerLogvarB, b_count), kLogVarMin,
            kLogVarMax);
  const NodeId mu_a = dense(h2, kHeadAccentMeanW, kHeadAccentMeanB, b_count);
  const NodeId lv_a = clamp(g, dense(h2, kHeadAccentLogvarW, kHeadAccentLogvarB, b_count),
                            kLogVarMin, kLogVarMax);

  NodeId kl_chain = -1, commit_chain = -1, book_chain = -1;
  auto fold = [&](NodeId& chain, NodeId term) {
    chain = chain < 0 ? term : add(g, chain, term);
  };

  struct BranchLatents {
    std::map<std::string, NodeId> by_group;
  };
  auto run_branch = [&](NodeId mu, NodeId lv, const std::vector<std::string>& labels,
                        ParamIx book_ix, const std::map<std::string, Vector>* noise,
                        std::vector<std::uint64_t>* usage) {
    BranchLatents out;
    NodeId branch_kl = -1;
    const GroupIndex groups = make_group_index(labels);
    for (const auto& [gid, members] : groups.members) {
      PosteriorNode post = accumulate_group_node(
          g, {gather_rows(g, mu, members), gather_rows(g, lv, members)});
      fold(branch_kl, kl_standard_normal_node(g, post));
      NodeId z = post.mean;
      if (noise) {
        auto it = noise->find(gid);
        if (it == noise->end()) {
          throw ContractViolation("batch loss: no noise drawn for group '" + gid + "'");
        }
        z = reparameterize_node(g, post, it->second);
      }
      if (vq) {
        QuantizeNodes q = quantize_node(g, z, param_ids[book_ix], usage);
        const auto weight = static_cast<Scalar>(members.size());
        fold(commit_chain, scaled(g, q.commitment, weight));
        fold(book_chain, scaled(g, q.codebook, weight));
        out.by_group[gid] = q.straight_through;
      } else {
        out.by_group[gid] = z;
      }
    }
    fold(kl_chain, scaled(g, branch_kl, inv_b));
    return out;
  };

  const BranchLatents z_s = run_branch(mu_s, lv_s, speaker_labels, kBookSpeaker, speaker_noise,
                                       speaker_usage);
  const BranchLatents z_a =
      run_branch(mu_a, lv_a, accent_labels, kBookAccent, accent_noise, accent_usage);

  std::map<std::string, NodeId> decode_cache;
  NodeId recon_chain = -1;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const Utterance& u = data.utterances[static_cast<std::size_t>(batch[j])];
    const Index t = u.frames();
    const std::string key =
        speaker_labels[j] + '\x1f' + accent_labels[j] + '\x1f' + std::to_string(t);
    NodeId xhat;
    if (auto it = decode_cache.find(key); it != decode_cache.end()) {
      xhat = it->second;
    } else {
      const NodeId zcat =
          concat_last_axis(g, z_s.by_group.at(speaker_labels[j]), z_a.by_group.at(accent_labels[j]));
      const NodeId frames = broadcast_row(g, zcat, t);
      const NodeId d1 = tanh(g, dense(frames, kDecW1, kDecB1, t));
      const NodeId d2 = tanh(g, dense(d1, kDecW2, kDecB2, t));
      xhat = dense(d2, kDecOutW, kDecOutB, t);
      decode_cache.emplace(key, xhat);
    }
    const NodeId x = g.constant(Tensor::from_matrix(u.features));
    const NodeId err = sqrt(g, sum_reduce(g, square(g, subtract(g, xhat, x))));
    fold(recon_chain, scaled(g, err, 1.0 / static_cast<Scalar>(t * cfg.feature_dim)));
  }

  BatchLossNodes nodes;
  nodes.recon = scaled(g, recon_chain, inv_b);
  nodes.kl = kl_chain;
  if (vq) {
    nodes.commitment = scaled(g, commit_chain, inv_b);
    nodes.codebook = scaled(g, book_chain, inv_b);
  } else {
    nodes.commitment = g.constant(Tensor::scalar(0.0));
    nodes.codebook = g.constant(Tensor::scalar(0.0));
  }
  nodes.total = add(g, add(g, add(g, nodes.recon, scaled(g, nodes.kl, cfg.beta)),
                           nodes.commitment),
                    nodes.codebook);
  return nodes;
}

Scalar learning_rate(Index step, const ModelConfig& cfg) {
  if (step < 0 || step > cfg.total_steps) {
    throw ContractViolation("learning_rate: step " + std::to_string(step) + " outside [0, " +
                            std::to_string(cfg.total_steps) + "]");
  }
  if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps) {
    return cfg.learning_rate * static_cast<Scalar>(step) /
           static_cast<Scalar>(cfg.warmup_steps);
  }
  Scalar lr = cfg.learning_rate;
  for (Index a : cfg.anneal_steps) {
    if (step > a) lr *= 0.3;
  }
  return lr;
}

Scalar reconstruction_loss(const Matrix& xhat, const Matrix& x) {
  if (xhat.rows() != x.rows() || xhat.cols() != x.cols()) {
    throw DimensionError("reconstruction_loss: shapes " + std::to_string(xhat.rows()) + "x" +
                         std::to_string(xhat.cols()) + " vs " + std::to_string(x.rows()) + "x" +
                         std::to_string(x.cols()));
  }
  return (xhat - x).norm() / static_cast<Scalar>(x.size());
}

TrainOutcome train(const ModelConfig& cfg, const Dataset& data, const Model* init_from) {
  if (data.empty()) throw ValidationError("train: empty dataset");
  ModelConfig resolved = cfg;
  if (resolved.feature_dim == 0) resolved.feature_dim = data.feature_dim();
  resolved.validate(true);
  if (data.feature_dim() != resolved.feature_dim) {
    throw DimensionError("train: data feature_dim " + std::to_string(data.feature_dim()) +
                         " vs config " + std::to_string(resolved.feature_dim));
  }

  TrainOutcome out{init_from ? init_from->clone() : build_model(resolved), {}};
  Model& model = out.model;
  if (init_from) {
    const ModelConfig& other = init_from->config;
    if (other.feature_dim != resolved.feature_dim || other.hidden_dim != resolved.hidden_dim ||
        other.latent_dim != resolved.latent_dim ||
        other.codebook_speaker != resolved.codebook_speaker ||
        other.codebook_accent != resolved.codebook_accent) {
      throw ValidationError("train: init checkpoint layer sizes do not match the config");
    }
    model.config = resolved;
  }
  for (auto& p : model.params) p.tensor->requires_grad = !(p.decoder && resolved.freeze_decoder);

  // Canonical utterance order, so training depends on the set of utterances
  // and not on file order.
  std::vector<Index> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    const auto& ua = data.utterances[static_cast<std::size_t>(a)];
    const auto& ub = data.utterances[static_cast<std::size_t>(b)];
    return ua.utterance_id != ub.utterance_id ? ua.utterance_id < ub.utterance_id : a < b;
  });

  std::mt19937_64 shuffle_rng(derive_seed(resolved.seed, 22));
  std::mt19937_64 noise_rng(derive_seed(resolved.seed, 23));
  std::normal_distribution<Scalar> normal(0.0, 1.0);
  auto reshuffle = [&] {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng() % i)]);
    }
  };

  std::vector<Vector> adam_m(model.params.size()), adam_v(model.params.size());
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    adam_m[i] = Vector::Zero(model.params[i].tensor->size());
    adam_v[i] = Vector::Zero(model.params[i].tensor->size());
  }

  out.history.reserve(static_cast<std::size_t>(resolved.total_steps));
  std::size_t pos = order.size();
  for (Index step = 1; step <= resolved.total_steps; ++step) {
    if (pos >= order.size()) {
      reshuffle();
      pos = 0;
    }
    const std::size_t take =
        std::min<std::size_t>(static_cast<std::size_t>(resolved.batch_size), order.size() - pos);
    const std::vector<Index> batch(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                   order.begin() + static_cast<std::ptrdiff_t>(pos + take));
    pos += take;

    auto draw_noise = [&](bool speaker) {
      std::set<std::string> gids;
      for (Index i : batch) {
        const auto& u = data.utterances[static_cast<std::size_t>(i)];
        gids.insert(speaker ? u.speaker_id : u.accent_id);
      }
      std::map<std::string, Vector> noise;
      for (const auto& gid : gids) {
        Vector v(resolved.latent_dim);
        for (Index k = 0; k < v.size(); ++k) v[k] = normal(noise_rng);
        noise[gid] = std::move(v);
      }
      return noise;
    };
    const auto speaker_noise = draw_noise(true);
    const auto accent_noise = draw_noise(false);

    Graph g;
    std::vector<NodeId> ids;
    ids.reserve(model.params.size());
    for (auto& p : model.params) {
      p.tensor->grad.reset();
      ids.push_back(g.leaf(p.tensor));
    }
    const BatchLossNodes nodes =
        build_batch_loss(g, ids, resolved, data, batch, &speaker_noise, &accent_noise,
                         &model.speaker_book.usage_counts, &model.accent_book.usage_counts);
    const LossBreakdown breakdown = nodes.breakdown(g, resolved.beta);
    const std::pair<const char*, Scalar> terms[] = {{"recon", breakdown.recon},
                                                    {"kl", breakdown.kl},
                                                    {"commitment", breakdown.commitment},
                                                    {"codebook", breakdown.codebook},
                                                    {"total", breakdown.total}};
    for (const auto& [name, value] : terms) {
      if (!std::isfinite(value)) {
        throw DivergenceError("train: loss term '" + std::string(name) +
                                  "' is not finite at step " + std::to_string(step),
                              step, name);
      }
    }
    g.backward(nodes.total);

    const Scalar lr = learning_rate(step, resolved);
    const Scalar bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<Scalar>(step));
    const Scalar bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<Scalar>(step));
    for (std::size_t i = 0; i < model.params.size(); ++i) {
      Tensor& t = *model.params[i].tensor;
      if (!t.requires_grad || !t.grad) continue;
      const Vector& grad = *t.grad;
      adam_m[i] = kAdamBeta1 * adam_m[i] + (1.0 - kAdamBeta1) * grad;
      adam_v[i].array() =
          kAdamBeta2 * adam_v[i].array() + (1.0 - kAdamBeta2) * grad.array().square();
      t.values.array() -=
          lr * (adam_m[i].array() / bc1) / ((adam_v[i].array() / bc2).sqrt() + kAdamEps);
    }
    out.history.push_back(breakdown);
  }
  return out;
}

namespace {

struct EncodedUtterance {
  GaussianPosterior speaker, accent;
};

EncodedUtterance encode_utterance(const Model& m, const Matrix& features) {
  const ModelConfig& cfg = m.config;
  if (features.cols() != cfg.feature_dim) {
    throw DimensionError("encode: feature_dim " + std::to_string(features.cols()) +
                         ", model wants " + std::to_string(cfg.feature_dim));
  }
  Matrix pooled = features.colwise().mean();
  Matrix h1 =
      ((pooled * m.enc_w1->matrix()).rowwise() + m.enc_b1->matrix().row(0)).array().tanh();
  Matrix h2 = ((h1 * m.enc_w2->matrix()).rowwise() + m.enc_b2->matrix().row(0)).array().tanh();
  auto head = [&](const TensorPtr& w, const TensorPtr& b) {
    return Matrix((h2 * w->matrix()).rowwise() + b->matrix().row(0));
  };
  auto clamp_lv = [](Matrix lv) {
    return Matrix(lv.array().max(kLogVarMin).min(kLogVarMax));
  };
  EncodedUtterance out;
  out.speaker = GaussianPosterior(
      head(m.head_speaker_mean_w, m.head_speaker_mean_b).row(0).transpose(),
      clamp_lv(head(m.head_speaker_logvar_w, m.head_speaker_logvar_b)).row(0).transpose());
  out.accent = GaussianPosterior(
      head(m.head_accent_mean_w, m.head_accent_mean_b).row(0).transpose(),
      clamp_lv(head(m.head_accent_logvar_w, m.head_accent_logvar_b)).row(0).transpose());
  return out;
}

}  // namespace

EvalLatents eval_latents(const Model& m, const Dataset& data) {
  if (data.empty()) throw ValidationError("eval: empty dataset");
  EvalLatents out;
  out.speaker_post.reserve(data.size());
  out.accent_post.reserve(data.size());
  for (const auto& u : data.utterances) {
    EncodedUtterance enc = encode_utterance(m, u.features);
    out.speaker_post.push_back(std::move(enc.speaker));
    out.accent_post.push_back(std::move(enc.accent));
  }
  auto run_branch = [&](const std::vector<std::string>& labels,
                        const std::vector<GaussianPosterior>& posts, const Codebook& book,
                        std::map<std::string, GaussianPosterior>& group_out,
                        std::map<std::string, QuantizationResult>& q_out) {
    const GroupIndex groups = make_group_index(labels);
    for (const auto& [gid, members] : groups.members) {
      std::vector<GaussianPosterior> member_posts;
      member_posts.reserve(members.size());
      for (Index i : members) member_posts.push_back(posts[static_cast<std::size_t>(i)]);
      GaussianPosterior acc = accumulate_group(member_posts);
      q_out[gid] = quantize_const(acc.mean, book);
      group_out[gid] = std::move(acc);
    }
  };
  run_branch(data.speaker_labels(), out.speaker_post, m.speaker_book, out.speaker_group,
             out.speaker_q);
  run_branch(data.accent_labels(), out.accent_post, m.accent_book, out.accent_group,
             out.accent_q);
  return out;
}

Matrix decode_latents(const Model& m, const Vector& speaker_latent, const Vector& accent_latent,
                      Index frames) {
  const Index d = m.config.latent_dim;
  if (speaker_latent.size() != d || accent_latent.size() != d) {
    throw DimensionError("decode: latent sizes " + std::to_string(speaker_latent.size()) + "," +
                         std::to_string(accent_latent.size()) + ", model wants " +
                         std::to_string(d));
  }
  if (frames < 1) throw ContractViolation("decode: frame count must be positive");
  Matrix zcat(1, 2 * d);
  zcat << speaker_latent.transpose(), accent_latent.transpose();
  Matrix z = zcat.replicate(frames, 1);
  Matrix d1 = ((z * m.dec_w1->matrix()).rowwise() + m.dec_b1->matrix().row(0)).array().tanh();
  Matrix d2 = ((d1 * m.dec_w2->matrix()).rowwise() + m.dec_b2->matrix().row(0)).array().tanh();
  return (d2 * m.dec_out_w->matrix()).rowwise() + m.dec_out_b->matrix().row(0);
}

std::vector<ForwardOutput> forward_eval(const Model& m, const Dataset& data) {
  const EvalLatents el = eval_latents(m, data);
  std::vector<ForwardOutput> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Utterance& u = data.utterances[i];
    ForwardOutput f;
    f.speaker_posterior = el.speaker_post[i];
    f.accent_posterior = el.accent_post[i];
    f.speaker_q = el.speaker_q.at(u.speaker_id);
    f.accent_q = el.accent_q.at(u.accent_id);
    f.reconstruction =
        decode_latents(m, f.speaker_q.quantized, f.accent_q.quantized, u.frames());
    out.push_back(std::move(f));
  }
  return out;
}

Matrix reconstruct(const Model& m, const Dataset& data, Index utterance) {
  if (utterance < 0 || static_cast<std::size_t>(utterance) >= data.size()) {
    throw LookupError("reconstruct: utterance index " + std::to_string(utterance) +
                      " out of range");
  }
  const EvalLatents el = eval_latents(m, data);
  const Utterance& u = data.utterances[static_cast<std::size_t>(utterance)];
  return decode_latents(m, el.speaker_q.at(u.speaker_id).quantized,
                        el.accent_q.at(u.accent_id).quantized, u.frames());
}

std::vector<EmbeddingRecord> extract_embeddings(const Model& m, const Dataset& data) {
  const EvalLatents el = eval_latents(m, data);
  std::vector<EmbeddingRecord> records;
  records.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Utterance& u = data.utterances[i];
    EmbeddingRecord r;
    r.utterance_id = u.utterance_id;
    r.speaker_id = u.speaker_id;
    r.accent_id = u.accent_id;
    r.speaker_pre = el.speaker_post[i].mean;
    r.speaker_grouped = el.speaker_group.at(u.speaker_id).mean;
    r.speaker_quantized = el.speaker_q.at(u.speaker_id).quantized;
    r.accent_pre = el.accent_post[i].mean;
    r.accent_grouped = el.accent_group.at(u.accent_id).mean;
    r.accent_quantized = el.accent_q.at(u.accent_id).quantized;
    records.push_back(std::move(r));
  }
  return records;
}

Matrix convert(const Model& m, const Utterance& utterance, const std::string& target_accent,
               const Dataset& reference_set) {
  Dataset working = reference_set;
  if (working.find(utterance.utterance_id) < 0) working.utterances.push_back(utterance);
  const EvalLatents el = eval_latents(m, working);
  auto accent = el.accent_q.find(target_accent);
  if (accent == el.accent_q.end()) {
    throw LookupError("convert: accent '" + target_accent + "' not present in the reference set");
  }
  return decode_latents(m, el.speaker_q.at(utterance.speaker_id).quantized,
                        accent->second.quantized, utterance.frames());
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const Model& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << model_config_to_json(m.config) << "\n";
  put_u32(out, static_cast<std::uint32_t>(m.params.size()));
  for (const auto& p : m.params) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(out, static_cast<std::uint32_t>(p.tensor->shape.size()));
    for (Index d : p.tensor->shape) put_u64(out, static_cast<std::uint64_t>(d));
    for (Index i = 0; i < p.tensor->size(); ++i) {
      put_u64(out, std::bit_cast<std::uint64_t>(p.tensor->values[i]));
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string header;
  if (!std::getline(in, header)) throw DataError("checkpoint: missing config line");
  Model m = build_model(model_config_from_json(header));
  const std::uint32_t count = get_u32(in);
  if (!in || count != m.params.size()) {
    throw DataError("checkpoint: expected " + std::to_string(m.params.size()) +
                    " parameters, file has " + std::to_string(count));
  }
  for (auto& p : m.params) {
    const std::uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in || name != p.name) {
      throw DataError("checkpoint: expected parameter '" + p.name + "', found '" + name + "'");
    }
    const std::uint32_t rank = get_u32(in);
    if (rank != p.tensor->shape.size()) {
      throw DataError("checkpoint: rank mismatch for '" + name + "'");
    }
    for (Index d : p.tensor->shape) {
      if (get_u64(in) != static_cast<std::uint64_t>(d)) {
        throw DataError("checkpoint: shape mismatch for '" + name + "'");
      }
    }
    for (Index i = 0; i < p.tensor->size(); ++i) {
      p.tensor->values[i] = std::bit_cast<Scalar>(get_u64(in));
    }
    if (!in) throw DataError("checkpoint: truncated data for '" + name + "'");
  }
  return m;
}

}  // namespace dart
