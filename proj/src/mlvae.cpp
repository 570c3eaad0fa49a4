#include "dart/mlvae.hpp"

#include <cmath>

#include "dart/error.hpp"

namespace dart {

GaussianPosterior::GaussianPosterior(Vector mean_in, Vector log_variance_in)
    : mean(std::move(mean_in)), log_variance(std::move(log_variance_in)) {
  if (mean.size() != log_variance.size()) {
    throw DimensionError("posterior: mean length " + std::to_string(mean.size()) +
                         " vs log_variance length " + std::to_string(log_variance.size()));
  }
  if (!mean.allFinite() || !log_variance.allFinite()) {
    throw ValidationError("posterior: non-finite parameter");
  }
}

GroupIndex make_group_index(const std::vector<std::string>& labels) {
  GroupIndex index;
  index.group_of = labels;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    index.members[labels[i]].push_back(static_cast<Index>(i));
  }
  return index;
}

GaussianPosterior accumulate_group(const std::vector<GaussianPosterior>& posteriors) {
  if (posteriors.empty()) throw ContractViolation("accumulate_group: empty group");
  const Index d = posteriors.front().dim();
  for (const auto& p : posteriors) {
    if (p.dim() != d) {
      throw DimensionError("accumulate_group: dimension " + std::to_string(p.dim()) +
                           " vs " + std::to_string(d));
    }
  }
  if (posteriors.size() == 1) return posteriors.front();

  Vector precision = Vector::Zero(d);
  Vector weighted = Vector::Zero(d);
  for (const auto& p : posteriors) {
    Vector prec = (-p.log_variance).array().exp();
    precision += prec;
    weighted += (p.mean.array() * prec.array()).matrix();
  }
  GaussianPosterior out;
  out.log_variance = -precision.array().log();
  out.mean = (weighted.array() / precision.array()).matrix();
  return out;
}

Vector reparameterize(const GaussianPosterior& p, const Vector& noise) {
  if (noise.size() != p.dim()) {
    throw DimensionError("reparameterize: noise length " + std::to_string(noise.size()) +
                         " vs dimension " + std::to_string(p.dim()));
  }
  return p.mean.array() + (0.5 * p.log_variance).array().exp() * noise.array();
}

Scalar kl_standard_normal(const GaussianPosterior& p) {
  return 0.5 * (p.mean.array().square() + p.log_variance.array().exp() -
                p.log_variance.array() - 1.0)
                   .sum();
}

Scalar kl_loss_batch(const std::vector<GaussianPosterior>& per_obs, const GroupIndex& groups,
                     bool grouped) {
  if (per_obs.empty()) throw ContractViolation("kl_loss_batch: empty batch");
  if (groups.size() != per_obs.size()) {
    throw DimensionError("kl_loss_batch: " + std::to_string(per_obs.size()) +
                         " posteriors vs " + std::to_string(groups.size()) + " group entries");
  }
  Scalar total = 0.0;
  if (grouped) {
    for (const auto& [id, member_indices] : groups.members) {
      std::vector<GaussianPosterior> members;
      members.reserve(member_indices.size());
      for (Index i : member_indices) members.push_back(per_obs[static_cast<std::size_t>(i)]);
      total += kl_standard_normal(accumulate_group(members));
    }
  } else {
    for (const auto& p : per_obs) total += kl_standard_normal(p);
  }
  return total / static_cast<Scalar>(per_obs.size());
}

PosteriorNode accumulate_group_node(Graph& g, PosteriorNode stacked) {
  const Tensor& mu = g.value(stacked.mean);
  if (mu.shape != g.value(stacked.log_variance).shape) {
    throw DimensionError("accumulate_group_node: mean and log_variance shapes differ");
  }
  const Index k = mu.rows();
  if (k == 1 && mu.rank() == 2) return stacked;

  NodeId precision = exp(g, scaled(g, stacked.log_variance, -1.0));
  NodeId ones = g.constant(Tensor::from_matrix(Matrix::Ones(1, k)));
  NodeId precision_sum = matmul(g, ones, precision);
  NodeId weighted_sum = matmul(g, ones, multiply(g, stacked.mean, precision));
  NodeId group_logvar = scaled(g, log(g, precision_sum), -1.0);
  NodeId group_mean = multiply(g, weighted_sum, exp(g, group_logvar));
  return {group_mean, group_logvar};
}

NodeId reparameterize_node(Graph& g, PosteriorNode p, const Vector& noise) {
  const Tensor& mu = g.value(p.mean);
  if (noise.size() != mu.size()) {
    throw DimensionError("reparameterize_node: noise length " + std::to_string(noise.size()) +
                         " vs posterior size " + std::to_string(mu.size()));
  }
  NodeId eps = g.constant(Tensor(mu.shape, noise));
  NodeId sigma = exp(g, scaled(g, p.log_variance, 0.5));
  return add(g, p.mean, multiply(g, sigma, eps));
}

NodeId kl_standard_normal_node(Graph& g, PosteriorNode p) {
  NodeId var = exp(g, p.log_variance);
  NodeId terms = subtract(g, add(g, square(g, p.mean), var), shifted(g, p.log_variance, 1.0));
  return scaled(g, sum_reduce(g, terms), 0.5);
}

}  // namespace dart
