#include "dart/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dart {
namespace {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "{";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "}";
  return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape != b.shape) {
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape) + " and " +
                         shape_str(b.shape) + " do not match");
  }
}

void require_rank_le2(const Tensor& t, const char* op) {
  if (t.rank() < 1 || t.rank() > 2) {
    throw DimensionError(std::string(op) + ": rank " + std::to_string(t.rank()) +
                         " unsupported, want 1 or 2");
  }
}

}  // namespace

Tensor::Tensor(Shape shape_in, Vector values_in, bool requires_grad_in)
    : shape(std::move(shape_in)), values(std::move(values_in)), requires_grad(requires_grad_in) {
  if (shape_size(shape) != values.size()) {
    throw DimensionError("tensor: shape " + shape_str(shape) + " holds " +
                         std::to_string(shape_size(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  Vector v = Vector::Zero(shape_size(shape));
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::full(Shape shape, Scalar value, bool requires_grad) {
  Vector v = Vector::Constant(shape_size(shape), value);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(Scalar value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

Tensor Tensor::row(const Vector& v, bool requires_grad) {
  return Tensor({v.size()}, v, requires_grad);
}

Tensor Tensor::from_matrix(const Matrix& m, bool requires_grad) {
  Vector v(m.size());
  Eigen::Map<Matrix>(v.data(), m.rows(), m.cols()) = m;
  return Tensor({m.rows(), m.cols()}, std::move(v), requires_grad);
}

Eigen::Map<const Matrix> Tensor::matrix() const {
  return Eigen::Map<const Matrix>(values.data(), rows(), cols());
}

void Tensor::zero_grad() {
  if (grad) grad->setZero();
}

void Tensor::accumulate_grad(const Vector& g) {
  if (!grad) grad = Vector::Zero(values.size());
  if (grad->size() != g.size()) {
    throw DimensionError("accumulate_grad: buffer size " + std::to_string(grad->size()) +
                         " vs update size " + std::to_string(g.size()));
  }
  *grad += g;
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::add: return "add";
    case OpKind::subtract: return "subtract";
    case OpKind::multiply: return "multiply";
    case OpKind::matmul: return "matmul";
    case OpKind::exp: return "exp";
    case OpKind::log: return "log";
    case OpKind::tanh: return "tanh";
    case OpKind::relu: return "relu";
    case OpKind::square: return "square";
    case OpKind::sqrt: return "sqrt";
    case OpKind::sum_reduce: return "sum_reduce";
    case OpKind::mean_reduce: return "mean_reduce";
    case OpKind::broadcast_row: return "broadcast_row";
    case OpKind::gather_rows: return "gather_rows";
    case OpKind::concat_last_axis: return "concat_last_axis";
    case OpKind::stop_gradient: return "stop_gradient";
  }
  return "?";
}

NodeId Graph::leaf(TensorPtr t) {
  if (!t) throw ContractViolation("leaf: null tensor");
  Node n;
  n.kind = OpKind::leaf;
  n.value = std::move(t);
  return push(std::move(n));
}

NodeId Graph::leaf(Tensor t) { return leaf(std::make_shared<Tensor>(std::move(t))); }

NodeId Graph::constant(Tensor t) {
  t.requires_grad = false;
  return leaf(std::make_shared<Tensor>(std::move(t)));
}

NodeId Graph::check_node(NodeId id, const char* ctx) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw LookupError(std::string(ctx) + ": node " + std::to_string(id) + " not in graph");
  }
  return id;
}

NodeId Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

const Tensor& Graph::value(NodeId id) const { return *nodes_[check_node(id, "value")].value; }

TensorPtr Graph::tensor(NodeId id) const { return nodes_[check_node(id, "tensor")].value; }

NodeId Graph::apply(OpKind kind, const std::vector<NodeId>& inputs) {
  return apply(kind, inputs, {});
}

NodeId Graph::apply(OpKind kind, const std::vector<NodeId>& inputs, std::vector<Index> attr) {
  const char* name = op_name(kind);
  auto arity = [&](std::size_t n) {
    if (inputs.size() != n) {
      throw ContractViolation(std::string(name) + ": expects " + std::to_string(n) +
                              " inputs, got " + std::to_string(inputs.size()));
    }
  };
  for (NodeId id : inputs) check_node(id, name);

  Node node;
  node.kind = kind;
  node.inputs = inputs;
  node.attr = std::move(attr);

  auto in = [&](std::size_t i) -> const Tensor& { return *nodes_[inputs[i]].value; };
  auto out = [&](Shape shape, Vector values) {
    node.value = std::make_shared<Tensor>(std::move(shape), std::move(values));
  };

  switch (kind) {
    case OpKind::leaf:
      throw ContractViolation("apply: leaf nodes are created via leaf()");
    case OpKind::add: {
      arity(2);
      require_same_shape(in(0), in(1), name);
      out(in(0).shape, in(0).values + in(1).values);
      break;
    }
    case OpKind::subtract: {
      arity(2);
      require_same_shape(in(0), in(1), name);
      out(in(0).shape, in(0).values - in(1).values);
      break;
    }
    case OpKind::multiply: {
      arity(2);
      require_same_shape(in(0), in(1), name);
      out(in(0).shape, (in(0).values.array() * in(1).values.array()).matrix());
      break;
    }
    case OpKind::matmul: {
      arity(2);
      require_rank_le2(in(0), name);
      require_rank_le2(in(1), name);
      if (in(0).cols() != in(1).rows()) {
        throw DimensionError(std::string(name) + ": inner dimensions " +
                             std::to_string(in(0).cols()) + " and " +
                             std::to_string(in(1).rows()) + " do not match");
      }
      Matrix c = in(0).matrix() * in(1).matrix();
      Vector v(c.size());
      Eigen::Map<Matrix>(v.data(), c.rows(), c.cols()) = c;
      out({c.rows(), c.cols()}, std::move(v));
      break;
    }
    case OpKind::exp: {
      arity(1);
      out(in(0).shape, in(0).values.array().exp().matrix());
      break;
    }
    case OpKind::log: {
      arity(1);
      out(in(0).shape, in(0).values.array().log().matrix());
      break;
    }
    case OpKind::tanh: {
      arity(1);
      out(in(0).shape, in(0).values.array().tanh().matrix());
      break;
    }
    case OpKind::relu: {
      arity(1);
      out(in(0).shape, in(0).values.array().max(0.0).matrix());
      break;
    }
    case OpKind::square: {
      arity(1);
      out(in(0).shape, in(0).values.array().square().matrix());
      break;
    }
    case OpKind::sqrt: {
      arity(1);
      out(in(0).shape, in(0).values.array().sqrt().matrix());
      break;
    }
    case OpKind::sum_reduce: {
      arity(1);
      out({1}, Vector::Constant(1, in(0).values.sum()));
      break;
    }
    case OpKind::mean_reduce: {
      arity(1);
      if (in(0).size() == 0) throw DimensionError("mean_reduce: empty input");
      out({1}, Vector::Constant(1, in(0).values.mean()));
      break;
    }
    case OpKind::broadcast_row: {
      arity(1);
      if (node.attr.size() != 1 || node.attr[0] < 1) {
        throw ContractViolation("broadcast_row: needs a positive row count");
      }
      if (in(0).rows() != 1) {
        throw DimensionError("broadcast_row: input must be a single row, got " +
                             shape_str(in(0).shape));
      }
      const Index r = node.attr[0];
      const Index c = in(0).cols();
      Vector v(r * c);
      Eigen::Map<Matrix>(v.data(), r, c).rowwise() =
          in(0).values.transpose();
      out({r, c}, std::move(v));
      break;
    }
    case OpKind::gather_rows: {
      arity(1);
      if (in(0).rank() != 2) {
        throw DimensionError("gather_rows: input must be rank 2, got " + shape_str(in(0).shape));
      }
      const Index m = in(0).rows();
      const Index c = in(0).cols();
      const Index k = static_cast<Index>(node.attr.size());
      if (k == 0) throw ContractViolation("gather_rows: empty row list");
      for (Index row : node.attr) {
        if (row < 0 || row >= m) {
          throw LookupError("gather_rows: row " + std::to_string(row) + " outside [0," +
                            std::to_string(m) + ")");
        }
      }
      Vector v(k * c);
      auto src = in(0).matrix();
      Eigen::Map<Matrix> dst(v.data(), k, c);
      for (Index i = 0; i < k; ++i) dst.row(i) = src.row(node.attr[i]);
      out({k, c}, std::move(v));
      break;
    }
    case OpKind::concat_last_axis: {
      arity(2);
      require_rank_le2(in(0), name);
      require_rank_le2(in(1), name);
      if (in(0).rows() != in(1).rows()) {
        throw DimensionError("concat_last_axis: row counts " + std::to_string(in(0).rows()) +
                             " and " + std::to_string(in(1).rows()) + " do not match");
      }
      const Index r = in(0).rows();
      const Index ca = in(0).cols();
      const Index cb = in(1).cols();
      Vector v(r * (ca + cb));
      Eigen::Map<Matrix> dst(v.data(), r, ca + cb);
      dst.leftCols(ca) = in(0).matrix();
      dst.rightCols(cb) = in(1).matrix();
      if (in(0).rank() == 1 && in(1).rank() == 1) {
        out({ca + cb}, std::move(v));
      } else {
        out({r, ca + cb}, std::move(v));
      }
      break;
    }
    case OpKind::stop_gradient: {
      arity(1);
      out(in(0).shape, in(0).values);
      break;
    }
  }
  return push(std::move(node));
}

GradientMap Graph::backward(NodeId loss) {
  check_node(loss, "backward");
  const Tensor& l = *nodes_[loss].value;
  if (l.size() != 1) {
    throw ContractViolation("backward: loss must be scalar, got shape " + shape_str(l.shape));
  }

  grads_.assign(nodes_.size(), Vector());
  grads_[loss] = Vector::Constant(1, 1.0);

  auto ensure = [&](NodeId id) -> Vector& {
    Vector& g = grads_[id];
    if (g.size() == 0) g = Vector::Zero(nodes_[id].value->size());
    return g;
  };

  for (NodeId id = loss; id >= 0; --id) {
    const Node& n = nodes_[id];
    const Vector& g = grads_[id];
    if (g.size() == 0) continue;

    auto in = [&](std::size_t i) -> const Tensor& { return *nodes_[n.inputs[i]].value; };
    const Tensor& y = *n.value;

    switch (n.kind) {
      case OpKind::leaf:
        break;
      case OpKind::add:
        ensure(n.inputs[0]) += g;
        ensure(n.inputs[1]) += g;
        break;
      case OpKind::subtract:
        ensure(n.inputs[0]) += g;
        ensure(n.inputs[1]) -= g;
        break;
      case OpKind::multiply:
        ensure(n.inputs[0]).array() += g.array() * in(1).values.array();
        ensure(n.inputs[1]).array() += g.array() * in(0).values.array();
        break;
      case OpKind::matmul: {
        const Tensor& a = in(0);
        const Tensor& b = in(1);
        Eigen::Map<const Matrix> gm(g.data(), y.rows(), y.cols());
        Eigen::Map<Matrix>(ensure(n.inputs[0]).data(), a.rows(), a.cols()) +=
            gm * b.matrix().transpose();
        Eigen::Map<Matrix>(ensure(n.inputs[1]).data(), b.rows(), b.cols()) +=
            a.matrix().transpose() * gm;
        break;
      }
      case OpKind::exp:
        ensure(n.inputs[0]).array() += g.array() * y.values.array();
        break;
      case OpKind::log:
        ensure(n.inputs[0]).array() += g.array() / in(0).values.array();
        break;
      case OpKind::tanh:
        ensure(n.inputs[0]).array() += g.array() * (1.0 - y.values.array().square());
        break;
      case OpKind::relu:
        ensure(n.inputs[0]).array() +=
            g.array() * (in(0).values.array() > 0.0).cast<Scalar>();
        break;
      case OpKind::square:
        ensure(n.inputs[0]).array() += g.array() * 2.0 * in(0).values.array();
        break;
      case OpKind::sqrt: {
        // Subgradient 0 where the input is 0.
        auto x = in(0).values.array();
        ensure(n.inputs[0]).array() +=
            (x > 0.0).select(g.array() / (2.0 * y.values.array()), 0.0);
        break;
      }
      case OpKind::sum_reduce:
        ensure(n.inputs[0]).array() += g[0];
        break;
      case OpKind::mean_reduce:
        ensure(n.inputs[0]).array() += g[0] / static_cast<Scalar>(in(0).size());
        break;
      case OpKind::broadcast_row: {
        Eigen::Map<const Matrix> gm(g.data(), y.rows(), y.cols());
        ensure(n.inputs[0]) += gm.colwise().sum().transpose();
        break;
      }
      case OpKind::gather_rows: {
        const Tensor& x = in(0);
        Eigen::Map<const Matrix> gm(g.data(), y.rows(), y.cols());
        Eigen::Map<Matrix> dst(ensure(n.inputs[0]).data(), x.rows(), x.cols());
        for (Index i = 0; i < y.rows(); ++i) dst.row(n.attr[i]) += gm.row(i);
        break;
      }
      case OpKind::concat_last_axis: {
        const Index ca = in(0).cols();
        const Index cb = in(1).cols();
        Eigen::Map<const Matrix> gm(g.data(), y.rows(), ca + cb);
        Eigen::Map<Matrix>(ensure(n.inputs[0]).data(), y.rows(), ca) += gm.leftCols(ca);
        Eigen::Map<Matrix>(ensure(n.inputs[1]).data(), y.rows(), cb) += gm.rightCols(cb);
        break;
      }
      case OpKind::stop_gradient:
        break;
    }
  }

  GradientMap result;
  for (NodeId id = 0; id <= loss; ++id) {
    const Node& n = nodes_[id];
    if (n.kind != OpKind::leaf || !n.value->requires_grad) continue;
    if (grads_[id].size() == 0) continue;
    n.value->accumulate_grad(grads_[id]);
    result[id] = grads_[id];
  }
  return result;
}

const Vector& Graph::node_grad(NodeId id) const {
  check_node(id, "node_grad");
  static const Vector empty;
  if (static_cast<std::size_t>(id) >= grads_.size()) return empty;
  return grads_[id];
}

std::vector<NodeId> Graph::stop_gradient_affected(NodeId loss) const {
  check_node(loss, "stop_gradient_affected");
  std::vector<char> reach(nodes_.size(), 0), taint(nodes_.size(), 0);
  reach[loss] = 1;
  for (NodeId id = loss; id >= 0; --id) {
    if (!reach[id]) continue;
    const Node& n = nodes_[id];
    const bool blocks = n.kind == OpKind::stop_gradient;
    for (NodeId input : n.inputs) {
      reach[input] = 1;
      if (taint[id] || blocks) taint[input] = 1;
    }
  }
  std::vector<NodeId> affected;
  for (NodeId id = 0; id <= loss; ++id) {
    if (taint[id] && nodes_[id].kind == OpKind::leaf && nodes_[id].value->requires_grad) {
      affected.push_back(id);
    }
  }
  return affected;
}

NodeId add(Graph& g, NodeId a, NodeId b) { return g.apply(OpKind::add, {a, b}); }
NodeId subtract(Graph& g, NodeId a, NodeId b) { return g.apply(OpKind::subtract, {a, b}); }
NodeId multiply(Graph& g, NodeId a, NodeId b) { return g.apply(OpKind::multiply, {a, b}); }
NodeId matmul(Graph& g, NodeId a, NodeId b) { return g.apply(OpKind::matmul, {a, b}); }
NodeId exp(Graph& g, NodeId x) { return g.apply(OpKind::exp, {x}); }
NodeId log(Graph& g, NodeId x) { return g.apply(OpKind::log, {x}); }
NodeId tanh(Graph& g, NodeId x) { return g.apply(OpKind::tanh, {x}); }
NodeId relu(Graph& g, NodeId x) { return g.apply(OpKind::relu, {x}); }
NodeId square(Graph& g, NodeId x) { return g.apply(OpKind::square, {x}); }
NodeId sqrt(Graph& g, NodeId x) { return g.apply(OpKind::sqrt, {x}); }
NodeId sum_reduce(Graph& g, NodeId x) { return g.apply(OpKind::sum_reduce, {x}); }
NodeId mean_reduce(Graph& g, NodeId x) { return g.apply(OpKind::mean_reduce, {x}); }

NodeId broadcast_row(Graph& g, NodeId row, Index rows) {
  return g.apply(OpKind::broadcast_row, {row}, {rows});
}

NodeId gather_rows(Graph& g, NodeId x, const std::vector<Index>& rows) {
  return g.apply(OpKind::gather_rows, {x}, rows);
}

NodeId concat_last_axis(Graph& g, NodeId a, NodeId b) {
  return g.apply(OpKind::concat_last_axis, {a, b});
}

NodeId stop_gradient(Graph& g, NodeId x) { return g.apply(OpKind::stop_gradient, {x}); }

NodeId scaled(Graph& g, NodeId x, Scalar factor) {
  NodeId c = g.constant(Tensor::full(g.value(x).shape, factor));
  return multiply(g, x, c);
}

NodeId shifted(Graph& g, NodeId x, Scalar offset) {
  NodeId c = g.constant(Tensor::full(g.value(x).shape, offset));
  return add(g, x, c);
}

NodeId clamp(Graph& g, NodeId x, Scalar lo, Scalar hi) {
  if (!(lo <= hi)) throw ContractViolation("clamp: lo must not exceed hi");
  NodeId above_lo = relu(g, shifted(g, x, -lo));
  NodeId above_hi = relu(g, shifted(g, x, -hi));
  return shifted(g, subtract(g, above_lo, above_hi), lo);
}

GradCheckReport grad_check(const LossBuilder& f, const std::vector<Tensor>& point, Scalar h) {
  if (point.empty()) throw ContractViolation("grad_check: empty point");
  if (!(h > 0.0)) throw ContractViolation("grad_check: step must be positive");

  auto eval = [&](const std::vector<Tensor>& at) -> Scalar {
    Graph g;
    std::vector<NodeId> ids;
    ids.reserve(at.size());
    for (const Tensor& t : at) {
      Tensor copy = t;
      copy.requires_grad = true;
      copy.grad.reset();
      ids.push_back(g.leaf(std::move(copy)));
    }
    NodeId loss = f(g, ids);
    const Tensor& l = g.value(loss);
    if (l.size() != 1) {
      throw ContractViolation("grad_check: loss must be scalar");
    }
    return l.values[0];
  };

  Graph g;
  std::vector<NodeId> ids;
  ids.reserve(point.size());
  for (const Tensor& t : point) {
    Tensor copy = t;
    copy.requires_grad = true;
    copy.grad.reset();
    ids.push_back(g.leaf(std::move(copy)));
  }
  NodeId loss = f(g, ids);
  if (g.value(loss).size() != 1) {
    throw ContractViolation("grad_check: loss must be scalar");
  }
  if (!std::isfinite(g.value(loss).values[0])) {
    throw NumericError("grad_check: loss is not finite at the base point");
  }
  GradientMap grads = g.backward(loss);
  std::vector<NodeId> affected = g.stop_gradient_affected(loss);

  GradCheckReport report;
  std::vector<Tensor> probe = point;

  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (std::find(affected.begin(), affected.end(), ids[i]) != affected.end()) {
      report.excluded_leaves.push_back(i);
      continue;
    }
    const Index n = point[i].size();
    Vector analytic = Vector::Zero(n);
    if (auto it = grads.find(ids[i]); it != grads.end()) analytic = it->second;
    for (Index c = 0; c < n; ++c) {
      const Scalar saved = probe[i].values[c];
      probe[i].values[c] = saved + h;
      const Scalar up = eval(probe);
      probe[i].values[c] = saved - h;
      const Scalar down = eval(probe);
      probe[i].values[c] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("grad_check: non-finite loss near leaf " + std::to_string(i) +
                           " coordinate " + std::to_string(c));
      }
      const Scalar fd = (up - down) / (2.0 * h);
      const Scalar rel =
          std::abs(analytic[c] - fd) / std::max<Scalar>(1.0, std::abs(analytic[c]));
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_leaf = i;
        report.worst_coord = c;
      }
    }
  }
  return report;
}

}  // namespace dart
