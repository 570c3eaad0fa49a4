#include <doctest.h>

#include <cmath>
#include <random>

#include "dart/tensor.hpp"

using namespace dart;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, Scalar lo = -2.0, Scalar hi = 2.0) {
  std::uniform_real_distribution<Scalar> dist(lo, hi);
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (Index i = 0; i < t.size(); ++i) t.values[i] = dist(rng);
  return t;
}

}  // namespace

TEST_CASE("tensor constructors and views") {
  Tensor t = Tensor::from_matrix(Matrix{{1, 2, 3}, {4, 5, 6}});
  CHECK(t.rank() == 2);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.matrix()(1, 2) == 6);

  Tensor r = Tensor::row(Vector::LinSpaced(4, 0, 3));
  CHECK(r.rank() == 1);
  CHECK(r.rows() == 1);
  CHECK(r.cols() == 4);

  CHECK(Tensor::scalar(7.5).values[0] == 7.5);
  CHECK_THROWS_AS(Tensor({2, 3}, Vector::Zero(5)), DimensionError);
}

TEST_CASE("elementwise forward values") {
  Graph g;
  const NodeId a = g.constant(Tensor::row(Vector{{1.0, 4.0, 9.0}}));
  const NodeId b = g.constant(Tensor::row(Vector{{2.0, 0.5, -1.0}}));

  CHECK(g.value(add(g, a, b)).values[1] == 4.5);
  CHECK(g.value(subtract(g, a, b)).values[2] == 10.0);
  CHECK(g.value(multiply(g, a, b)).values[0] == 2.0);
  CHECK(g.value(sqrt(g, a)).values[2] == 3.0);
  CHECK(g.value(square(g, b)).values[2] == 1.0);
  CHECK(g.value(exp(g, b)).values[1] == doctest::Approx(std::exp(0.5)).epsilon(1e-15));
  CHECK(g.value(log(g, a)).values[1] == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  CHECK(g.value(tanh(g, b)).values[0] == doctest::Approx(std::tanh(2.0)).epsilon(1e-15));
  CHECK(g.value(relu(g, b)).values[2] == 0.0);
  CHECK(g.value(sum_reduce(g, a)).values[0] == 14.0);
  CHECK(g.value(mean_reduce(g, b)).values[0] == 0.5);
}

TEST_CASE("matmul, broadcast, gather, concat forward") {
  Graph g;
  const NodeId a = g.constant(Tensor::from_matrix(Matrix{{1, 2}, {3, 4}}));
  const NodeId b = g.constant(Tensor::from_matrix(Matrix{{5, 6}, {7, 8}}));
  const Tensor& prod = g.value(matmul(g, a, b));
  CHECK(prod.matrix()(0, 0) == 19);
  CHECK(prod.matrix()(0, 1) == 22);
  CHECK(prod.matrix()(1, 0) == 43);
  CHECK(prod.matrix()(1, 1) == 50);

  const NodeId row = g.constant(Tensor::row(Vector{{1.0, -1.0}}));
  const Tensor& tiled = g.value(broadcast_row(g, row, 3));
  CHECK(tiled.rows() == 3);
  CHECK(tiled.matrix()(2, 1) == -1.0);

  const Tensor& picked = g.value(gather_rows(g, a, {1, 1, 0}));
  CHECK(picked.rows() == 3);
  CHECK(picked.matrix()(0, 0) == 3);
  CHECK(picked.matrix()(2, 1) == 2);

  const Tensor& glued = g.value(concat_last_axis(g, a, b));
  CHECK(glued.cols() == 4);
  CHECK(glued.matrix()(1, 3) == 8);

  // rank-1 inputs stay rank-1 through concat
  const NodeId r1 = g.constant(Tensor::row(Vector{{1.0}}));
  const NodeId r2 = g.constant(Tensor::row(Vector{{2.0, 3.0}}));
  CHECK(g.value(concat_last_axis(g, r1, r2)).rank() == 1);
}

TEST_CASE("shape validation") {
  Graph g;
  const NodeId a = g.constant(Tensor::zeros({2, 3}));
  const NodeId b = g.constant(Tensor::zeros({3, 2}));
  CHECK_THROWS_AS(add(g, a, b), DimensionError);
  CHECK_THROWS_AS(matmul(g, a, a), DimensionError);
  CHECK_THROWS_AS(broadcast_row(g, a, 4), DimensionError);
  CHECK_THROWS_AS(gather_rows(g, a, {2}), LookupError);
  CHECK_THROWS_AS(concat_last_axis(g, a, b), DimensionError);
  CHECK_THROWS_AS(g.apply(OpKind::add, {a}), ContractViolation);
}

TEST_CASE("backward matches hand-computed gradients") {
  Graph g;
  Tensor xa = Tensor::from_matrix(Matrix{{1, 2}, {3, 4}}, true);
  Tensor xb = Tensor::from_matrix(Matrix{{5, 6}, {7, 8}}, true);
  const NodeId a = g.leaf(xa);
  const NodeId b = g.leaf(xb);
  const NodeId loss = sum_reduce(g, matmul(g, a, b));
  const GradientMap grads = g.backward(loss);

  // d sum(AB) / dA = 1 B^T, rows are column sums of B
  const Vector& da = grads.at(a);
  CHECK(da[0] == 11);
  CHECK(da[1] == 15);
  CHECK(da[2] == 11);
  CHECK(da[3] == 15);
  const Vector& db = grads.at(b);
  CHECK(db[0] == 4);
  CHECK(db[2] == 6);
}

TEST_CASE("relu and sqrt subgradients at zero are zero") {
  Graph g;
  Tensor x({3}, Vector{{-1.0, 0.0, 2.0}}, true);
  const NodeId leaf = g.leaf(x);
  g.backward(sum_reduce(g, relu(g, leaf)));
  CHECK(g.node_grad(leaf)[0] == 0.0);
  CHECK(g.node_grad(leaf)[1] == 0.0);
  CHECK(g.node_grad(leaf)[2] == 1.0);

  Graph g2;
  Tensor y({2}, Vector{{0.0, 4.0}}, true);
  const NodeId leaf2 = g2.leaf(y);
  g2.backward(sum_reduce(g2, sqrt(g2, leaf2)));
  CHECK(g2.node_grad(leaf2)[0] == 0.0);
  CHECK(g2.node_grad(leaf2)[1] == 0.25);
}

TEST_CASE("backward accumulates into leaf grad across calls") {
  auto t = std::make_shared<Tensor>(Tensor::row(Vector{{1.0, 2.0}}, true));
  Graph g;
  const NodeId leaf = g.leaf(t);
  const NodeId loss = sum_reduce(g, square(g, leaf));
  g.backward(loss);
  g.backward(loss);
  REQUIRE(t->grad.has_value());
  CHECK((*t->grad)[0] == 4.0);  // two passes of 2x
  CHECK((*t->grad)[1] == 8.0);
}

TEST_CASE("stop_gradient blocks flow and is reported") {
  Graph g;
  Tensor x = Tensor::row(Vector{{1.5, -0.5}}, true);
  Tensor y = Tensor::row(Vector{{2.0, 3.0}}, true);
  const NodeId xl = g.leaf(x);
  const NodeId yl = g.leaf(y);
  const NodeId loss = sum_reduce(g, multiply(g, stop_gradient(g, xl), yl));
  const GradientMap grads = g.backward(loss);

  CHECK(grads.count(xl) == 0);  // no gradient reaches x
  CHECK(grads.at(yl)[0] == 1.5);
  CHECK(g.value(stop_gradient(g, xl)).values[0] == 1.5);  // forward identity

  const auto affected = g.stop_gradient_affected(loss);
  CHECK(std::count(affected.begin(), affected.end(), xl) == 1);
  CHECK(std::count(affected.begin(), affected.end(), yl) == 0);
}

TEST_CASE("leaf with a clean path alongside a blocked path is still affected") {
  Graph g;
  Tensor x = Tensor::scalar(0.7, true);
  const NodeId xl = g.leaf(x);
  const NodeId loss = add(g, square(g, xl), stop_gradient(g, xl));
  const auto affected = g.stop_gradient_affected(loss);
  CHECK(std::count(affected.begin(), affected.end(), xl) == 1);
  CHECK(g.backward(loss).at(xl)[0] == doctest::Approx(1.4).epsilon(1e-15));
}

TEST_CASE("clamp forward and gradient") {
  Graph g;
  Tensor x({4}, Vector{{-12.0, -3.0, 3.0, 11.0}}, true);
  const NodeId leaf = g.leaf(x);
  const NodeId c = clamp(g, leaf, -10.0, 10.0);
  const Tensor& v = g.value(c);
  CHECK(v.values[0] == -10.0);
  CHECK(v.values[1] == -3.0);
  CHECK(v.values[2] == 3.0);
  CHECK(v.values[3] == 10.0);
  g.backward(sum_reduce(g, c));
  const Vector& grad = g.node_grad(leaf);
  CHECK(grad[0] == 0.0);
  CHECK(grad[1] == 1.0);
  CHECK(grad[2] == 1.0);
  CHECK(grad[3] == 0.0);
  CHECK_THROWS_AS(clamp(g, leaf, 2.0, 1.0), ContractViolation);
}

TEST_CASE("gradient linearity in the upstream seed") {
  // grad of scaled(f, alpha) equals alpha * grad of f, exactly
  std::mt19937_64 rng(99);
  Tensor x = random_tensor({3, 3}, rng);
  for (const Scalar alpha : {0.25, -3.0, 7.5}) {
    Graph g1, g2;
    const NodeId l1 = g1.leaf(x);
    const NodeId l2 = g2.leaf(x);
    const Vector base = g1.backward(sum_reduce(g1, tanh(g1, l1))).at(l1);
    const Vector scaled_grad =
        g2.backward(scaled(g2, sum_reduce(g2, tanh(g2, l2)), alpha)).at(l2);
    for (Index i = 0; i < base.size(); ++i) {
      CHECK(scaled_grad[i] == doctest::Approx(alpha * base[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("grad_check accepts every differentiable op on random cases") {
  // positive-domain ops draw from [0.2, 2.2] to stay away from kinks
  std::mt19937_64 rng(4242);
  const Scalar h = 1e-6;

  const auto check_unary = [&](OpKind kind, bool positive) {
    for (int rep = 0; rep < 50; ++rep) {
      Tensor x = positive ? random_tensor({2, 3}, rng, 0.2, 2.2)
                          : random_tensor({2, 3}, rng);
      const auto report = grad_check(
          [&](Graph& g, const std::vector<NodeId>& leaves) {
            return sum_reduce(g, g.apply(kind, {leaves[0]}));
          },
          {x}, h);
      CAPTURE(op_name(kind));
      CAPTURE(rep);
      CHECK(report.max_rel_error < 1e-6);
    }
  };
  check_unary(OpKind::exp, false);
  check_unary(OpKind::log, true);
  check_unary(OpKind::tanh, false);
  check_unary(OpKind::square, false);
  check_unary(OpKind::sqrt, true);
  check_unary(OpKind::mean_reduce, false);

  for (int rep = 0; rep < 50; ++rep) {
    Tensor a = random_tensor({2, 4}, rng);
    Tensor b = random_tensor({4, 3}, rng);
    const auto report = grad_check(
        [](Graph& g, const std::vector<NodeId>& leaves) {
          return sum_reduce(g, tanh(g, matmul(g, leaves[0], leaves[1])));
        },
        {a, b}, h);
    CHECK(report.max_rel_error < 1e-6);
  }

  for (int rep = 0; rep < 50; ++rep) {
    Tensor a = random_tensor({3, 2}, rng);
    Tensor b = random_tensor({3, 2}, rng);
    const auto report = grad_check(
        [](Graph& g, const std::vector<NodeId>& leaves) {
          const NodeId mixed = multiply(g, add(g, leaves[0], leaves[1]),
                                        subtract(g, leaves[0], leaves[1]));
          return sum_reduce(g, mixed);
        },
        {a, b}, h);
    CHECK(report.max_rel_error < 1e-6);
  }

  for (int rep = 0; rep < 50; ++rep) {
    Tensor row = random_tensor({5}, rng);
    const auto report = grad_check(
        [](Graph& g, const std::vector<NodeId>& leaves) {
          return sum_reduce(g, square(g, broadcast_row(g, leaves[0], 4)));
        },
        {row}, h);
    CHECK(report.max_rel_error < 1e-6);
  }

  for (int rep = 0; rep < 50; ++rep) {
    Tensor x = random_tensor({4, 3}, rng);
    const auto report = grad_check(
        [](Graph& g, const std::vector<NodeId>& leaves) {
          // repeated rows exercise scatter-add accumulation
          return sum_reduce(g, square(g, gather_rows(g, leaves[0], {0, 2, 2, 3})));
        },
        {x}, h);
    CHECK(report.max_rel_error < 1e-6);
  }

  for (int rep = 0; rep < 50; ++rep) {
    Tensor a = random_tensor({2, 2}, rng);
    Tensor b = random_tensor({2, 3}, rng);
    const auto report = grad_check(
        [](Graph& g, const std::vector<NodeId>& leaves) {
          return sum_reduce(g, square(g, concat_last_axis(g, leaves[0], leaves[1])));
        },
        {a, b}, h);
    CHECK(report.max_rel_error < 1e-6);
  }
}

TEST_CASE("grad_check excludes stop-gradient leaves instead of failing") {
  Tensor a = Tensor::row(Vector{{1.0, 2.0}}, true);
  Tensor b = Tensor::row(Vector{{0.5, -1.0}}, true);
  const auto report = grad_check(
      [](Graph& g, const std::vector<NodeId>& leaves) {
        return sum_reduce(g, multiply(g, stop_gradient(g, leaves[0]), leaves[1]));
      },
      {a, b}, 1e-6);
  REQUIRE(report.excluded_leaves.size() == 1);
  CHECK(report.excluded_leaves[0] == 0);
  CHECK(report.max_rel_error < 1e-10);
}

TEST_CASE("grad_check reports non-finite evaluations") {
  Tensor x = Tensor::scalar(-1.0, true);
  CHECK_THROWS_AS(grad_check(
                      [](Graph& g, const std::vector<NodeId>& leaves) {
                        return sum_reduce(g, log(g, leaves[0]));
                      },
                      {x}, 1e-6),
                  NumericError);
}
