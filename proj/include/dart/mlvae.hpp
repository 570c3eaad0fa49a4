#pragma once

#include <map>
#include <string>
#include <vector>

#include "dart/tensor.hpp"
#include "dart/types.hpp"

namespace dart {

// Log-variances are clamped to this range before exponentiation.
inline constexpr Scalar kLogVarMin = -10.0;
inline constexpr Scalar kLogVarMax = 10.0;

/// Diagonal Gaussian over one latent vector.
struct GaussianPosterior {
  Vector mean;
  Vector log_variance;

  GaussianPosterior() = default;
  GaussianPosterior(Vector mean, Vector log_variance);

  Index dim() const { return mean.size(); }
};

/// Partition of utterance indices into labeled groups.
struct GroupIndex {
  std::vector<std::string> group_of;                  // utterance index -> group id
  std::map<std::string, std::vector<Index>> members;  // group id -> utterance indices

  std::size_t size() const { return group_of.size(); }
};

GroupIndex make_group_index(const std::vector<std::string>& labels);

/// Product-of-Gaussians evidence combination: precisions add, means are
/// precision-weighted. Member order does not matter.
GaussianPosterior accumulate_group(const std::vector<GaussianPosterior>& posteriors);

/// mean + exp(0.5 * log_variance) * noise.
Vector reparameterize(const GaussianPosterior& p, const Vector& noise);

/// Closed-form KL(p || N(0, I)) = 0.5 * sum(mu^2 + var - log var - 1).
Scalar kl_standard_normal(const GaussianPosterior& p);

/// KL term of the group objective over one batch: accumulate each group's
/// members first when `grouped`, otherwise sum per observation; either way
/// divide by the batch size.
Scalar kl_loss_batch(const std::vector<GaussianPosterior>& per_obs, const GroupIndex& groups,
                     bool grouped = true);

// Graph-side counterparts used inside the training objective. A posterior is
// a pair of nodes, each holding one row per observation (or a single row for
// an accumulated group).
struct PosteriorNode {
  NodeId mean;
  NodeId log_variance;
};

/// Accumulates rows of a stacked posterior into one group posterior.
/// Inputs and output are {k, D} and {1, D} tensors.
PosteriorNode accumulate_group_node(Graph& g, PosteriorNode stacked);

NodeId reparameterize_node(Graph& g, PosteriorNode p, const Vector& noise);

NodeId kl_standard_normal_node(Graph& g, PosteriorNode p);

}  // namespace dart
