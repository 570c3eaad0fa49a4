#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dart/tensor.hpp"
#include "dart/types.hpp"

namespace dart {

enum class Branch { speaker, accent };

const char* branch_name(Branch b);
Branch parse_branch(const std::string& s);

/// Embedding table for one branch. `entries` tensor is shared with the
/// training graph so optimizer updates are visible here.
struct Codebook {
  TensorPtr entries;  // {count, dim}
  Branch branch = Branch::speaker;
  std::vector<std::uint64_t> usage_counts;

  Codebook() = default;
  /// Entries drawn uniformly from [-1/count, 1/count], seeded.
  Codebook(Index count, Index dim, Branch branch, std::uint64_t seed);

  Index count() const { return entries->rows(); }
  Index dim() const { return entries->cols(); }
  void reset_usage();
};

struct QuantizationResult {
  Index index = 0;
  Vector quantized;      // codebook row at `index`
  Vector pre_quantized;  // encoder-side input z
};

/// Nearest codebook row by squared Euclidean distance, lowest index on ties.
/// Increments the row's usage count.
QuantizationResult quantize(const Vector& z, Codebook& book);

/// Lookup without usage counting; safe for concurrent readers.
QuantizationResult quantize_const(const Vector& z, const Codebook& book);

/// Squared distance from z to its (gradient-frozen) codeword. Pulls the
/// encoder toward the codebook.
Scalar commitment_loss(const QuantizationResult& r);

/// Mirror image of commitment_loss: squared distance from the frozen z to
/// the codeword. Pulls the codebook toward the encoder.
Scalar codebook_loss(const QuantizationResult& r);

/// exp(entropy) of the usage distribution, in [1, count].
Scalar perplexity(const Codebook& book);

/// Graph-side quantization of a {1, D} latent node. Picks the nearest row of
/// the codebook node's current value, then emits:
///   straight_through = z + sg(e - z)   (forward: e; backward: identity to z)
///   commitment       = ||z - sg(e)||^2
///   codebook         = ||sg(z) - e||^2
struct QuantizeNodes {
  Index index = 0;
  NodeId straight_through;
  NodeId commitment;
  NodeId codebook;
};

QuantizeNodes quantize_node(Graph& g, NodeId z, NodeId book_node,
                            std::vector<std::uint64_t>* usage_counts);

}  // namespace dart
