#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dart/error.hpp"
#include "dart/types.hpp"

namespace dart {

/// Dense tensor with flat row-major storage. Shape is fixed at construction;
/// only `grad` may change afterwards (owned by the graph that leafed it).
struct Tensor {
  Shape shape;
  Vector values;
  bool requires_grad = false;
  std::optional<Vector> grad;

  Tensor() = default;
  Tensor(Shape shape, Vector values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Scalar value, bool requires_grad = false);
  static Tensor scalar(Scalar value, bool requires_grad = false);
  static Tensor row(const Vector& v, bool requires_grad = false);
  static Tensor from_matrix(const Matrix& m, bool requires_grad = false);

  Index size() const { return values.size(); }
  Index rank() const { return static_cast<Index>(shape.size()); }
  // Rank-1 tensors are viewed as a single row.
  Index rows() const { return rank() == 1 ? 1 : shape[0]; }
  Index cols() const { return rank() == 1 ? shape[0] : shape[1]; }
  Eigen::Map<const Matrix> matrix() const;

  void zero_grad();
  void accumulate_grad(const Vector& g);
};

using TensorPtr = std::shared_ptr<Tensor>;

enum class OpKind {
  leaf,
  add,
  subtract,
  multiply,  // elementwise
  matmul,
  exp,
  log,
  tanh,
  relu,
  square,
  sqrt,
  sum_reduce,
  mean_reduce,
  broadcast_row,
  gather_rows,
  concat_last_axis,
  stop_gradient,
};

const char* op_name(OpKind kind);

using NodeId = std::int32_t;
using GradientMap = std::map<NodeId, Vector>;

struct Node {
  OpKind kind = OpKind::leaf;
  std::vector<NodeId> inputs;
  TensorPtr value;
  // Per-op integer payload: target row count for broadcast_row,
  // row indices for gather_rows.
  std::vector<Index> attr;
};

/// Append-only computation record. Forward values are computed eagerly at
/// apply() time; backward() walks the records in reverse construction order,
/// which is a topological order by construction.
class Graph {
 public:
  /// Registers an externally owned tensor (parameter or input) as a leaf.
  /// backward() accumulates into its `grad` when requires_grad is set.
  NodeId leaf(TensorPtr t);
  NodeId leaf(Tensor t);
  /// Leaf with requires_grad forced off; for fixed inputs and constants.
  NodeId constant(Tensor t);

  NodeId apply(OpKind kind, const std::vector<NodeId>& inputs);
  NodeId apply(OpKind kind, const std::vector<NodeId>& inputs, std::vector<Index> attr);

  const Tensor& value(NodeId id) const;
  TensorPtr tensor(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

  /// Reverse-mode sweep from a scalar loss. Returns the gradient for every
  /// requires_grad leaf and accumulates the same values into those leaves'
  /// `grad` fields. Node values are left untouched.
  GradientMap backward(NodeId loss);

  /// Gradient buffer of any node from the most recent backward() call.
  /// Empty if the node was not reached.
  const Vector& node_grad(NodeId id) const;

  /// Leaves with at least one path to `loss` that crosses a stop_gradient
  /// node. Analytic gradients for these intentionally disagree with finite
  /// differences.
  std::vector<NodeId> stop_gradient_affected(NodeId loss) const;

 private:
  NodeId check_node(NodeId id, const char* ctx) const;
  NodeId push(Node node);

  std::vector<Node> nodes_;
  std::vector<Vector> grads_;
};

// Free functions mirroring the op set; all validate shapes and throw
// DimensionError on mismatch.
NodeId add(Graph& g, NodeId a, NodeId b);
NodeId subtract(Graph& g, NodeId a, NodeId b);
NodeId multiply(Graph& g, NodeId a, NodeId b);
NodeId matmul(Graph& g, NodeId a, NodeId b);
NodeId exp(Graph& g, NodeId x);
NodeId log(Graph& g, NodeId x);
NodeId tanh(Graph& g, NodeId x);
NodeId relu(Graph& g, NodeId x);
NodeId square(Graph& g, NodeId x);
NodeId sqrt(Graph& g, NodeId x);
NodeId sum_reduce(Graph& g, NodeId x);
NodeId mean_reduce(Graph& g, NodeId x);
NodeId broadcast_row(Graph& g, NodeId row, Index rows);
NodeId gather_rows(Graph& g, NodeId x, const std::vector<Index>& rows);
NodeId concat_last_axis(Graph& g, NodeId a, NodeId b);
NodeId stop_gradient(Graph& g, NodeId x);

// Composition helpers built from the op set above.
NodeId scaled(Graph& g, NodeId x, Scalar factor);
NodeId shifted(Graph& g, NodeId x, Scalar offset);
NodeId clamp(Graph& g, NodeId x, Scalar lo, Scalar hi);

/// Builds a scalar loss from leaf nodes created over `point`.
using LossBuilder = std::function<NodeId(Graph&, const std::vector<NodeId>&)>;

struct GradCheckReport {
  Scalar max_rel_error = 0.0;
  std::size_t worst_leaf = 0;
  Index worst_coord = -1;
  // Positions in `point` whose gradient paths cross a stop_gradient node.
  // These coordinates are skipped, not compared.
  std::vector<std::size_t> excluded_leaves;
};

/// Central-difference verification of backward() for an arbitrary scalar
/// function of the leaves. Relative error uses max(1, |analytic|) as the
/// denominator. Throws NumericError (naming leaf and coordinate) if any
/// evaluation is non-finite.
GradCheckReport grad_check(const LossBuilder& f, const std::vector<Tensor>& point, Scalar h);

}  // namespace dart
