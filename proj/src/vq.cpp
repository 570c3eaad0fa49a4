#include "dart/vq.hpp"

#include <cmath>
#include <random>

#include "dart/error.hpp"

namespace dart {

const char* branch_name(Branch b) { return b == Branch::speaker ? "speaker" : "accent"; }

Branch parse_branch(const std::string& s) {
  if (s == "speaker") return Branch::speaker;
  if (s == "accent") return Branch::accent;
  throw ValidationError("branch: expected speaker or accent, got '" + s + "'");
}

Codebook::Codebook(Index count, Index dim, Branch branch_in, std::uint64_t seed)
    : branch(branch_in) {
  if (count < 1 || dim < 1) {
    throw ValidationError("codebook: count and dim must be positive");
  }
  std::mt19937_64 rng(derive_seed(seed, branch_in == Branch::speaker ? 101 : 102));
  const Scalar bound = 1.0 / static_cast<Scalar>(count);
  std::uniform_real_distribution<Scalar> dist(-bound, bound);
  Vector values(count * dim);
  for (Index i = 0; i < values.size(); ++i) values[i] = dist(rng);
  entries = std::make_shared<Tensor>(Shape{count, dim}, std::move(values), true);
  usage_counts.assign(static_cast<std::size_t>(count), 0);
}

void Codebook::reset_usage() { usage_counts.assign(usage_counts.size(), 0); }

namespace {

Index nearest_row(const Vector& z, Eigen::Map<const Matrix> rows) {
  if (z.size() != rows.cols()) {
    throw DimensionError("quantize: query length " + std::to_string(z.size()) +
                         " vs codebook dim " + std::to_string(rows.cols()));
  }
  Index best = 0;
  Scalar best_dist = (rows.row(0).transpose() - z).squaredNorm();
  for (Index j = 1; j < rows.rows(); ++j) {
    const Scalar dist = (rows.row(j).transpose() - z).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = j;
    }
  }
  return best;
}

}  // namespace

QuantizationResult quantize_const(const Vector& z, const Codebook& book) {
  QuantizationResult r;
  r.index = nearest_row(z, book.entries->matrix());
  r.quantized = book.entries->matrix().row(r.index).transpose();
  r.pre_quantized = z;
  return r;
}

QuantizationResult quantize(const Vector& z, Codebook& book) {
  QuantizationResult r = quantize_const(z, book);
  ++book.usage_counts[static_cast<std::size_t>(r.index)];
  return r;
}

Scalar commitment_loss(const QuantizationResult& r) {
  return (r.pre_quantized - r.quantized).squaredNorm();
}

Scalar codebook_loss(const QuantizationResult& r) {
  return (r.pre_quantized - r.quantized).squaredNorm();
}

Scalar perplexity(const Codebook& book) {
  std::uint64_t total = 0;
  for (std::uint64_t c : book.usage_counts) total += c;
  if (total == 0) throw InsufficientDataError("perplexity: no usage recorded");
  Scalar entropy = 0.0;
  for (std::uint64_t c : book.usage_counts) {
    if (c == 0) continue;
    const Scalar p = static_cast<Scalar>(c) / static_cast<Scalar>(total);
    entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

QuantizeNodes quantize_node(Graph& g, NodeId z, NodeId book_node,
                            std::vector<std::uint64_t>* usage_counts) {
  const Tensor& zt = g.value(z);
  const Tensor& book = g.value(book_node);
  if (zt.rows() != 1 || zt.cols() != book.cols()) {
    throw DimensionError("quantize_node: latent must be a {1," + std::to_string(book.cols()) +
                         "} row");
  }
  QuantizeNodes out;
  out.index = nearest_row(zt.values, book.matrix());
  if (usage_counts) ++(*usage_counts)[static_cast<std::size_t>(out.index)];

  NodeId e = gather_rows(g, book_node, {out.index});
  out.straight_through = add(g, z, stop_gradient(g, subtract(g, e, z)));
  out.commitment = sum_reduce(g, square(g, subtract(g, z, stop_gradient(g, e))));
  out.codebook = sum_reduce(g, square(g, subtract(g, stop_gradient(g, z), e)));
  return out;
}

}  // namespace dart
