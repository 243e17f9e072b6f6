#include <doctest.h>

#include <cmath>

#include "facelift/autodiff.hpp"
#include "oracles.hpp"

using namespace facelift;
using namespace facelift::nn;
using oracle::random_tensor;

namespace {

// Reduces any node to a scalar through fixed random weights so every output
// element contributes a distinct gradient.
Var weighted_sum(Graph& g, Var out, std::uint64_t seed) {
  Rng rng(seed);
  const Tensor& v = g.value(out);
  const Var w = g.constant(random_tensor(v.rows(), v.cols(), rng));
  return g.scale(g.mean(g.mul(out, w)), static_cast<double>(v.size()));
}

void check_fd(const oracle::Builder& b, const std::vector<Tensor>& inputs, double tol = 1e-4) {
  const auto rep = oracle::finite_difference_check(b, inputs);
  CAPTURE(rep.coordinates);
  CHECK(rep.coordinates > 0);
  CHECK(rep.max_relative_error < tol);
}

// Keeps values away from ReLU's kink so central differences stay valid.
Tensor away_from_zero(Tensor t) {
  for (auto& v : t.values())
    if (std::abs(v) < 0.05) v = v < 0 ? -0.05 - v : 0.05 + v;
  return t;
}

}  // namespace

TEST_CASE("analytic gradients") {
  Graph g;
  const Var x = g.variable(Tensor::row({1.0, 2.0}));
  g.backward(g.sum_squares(x));
  CHECK(g.grad(x)[0] == 2.0);
  CHECK(g.grad(x)[1] == 4.0);

  Graph h;
  const Var y = h.variable(Tensor::row({3.0, -1.0}));
  const Var c = h.constant(Tensor::scalar(7.0));
  h.backward(c);
  CHECK(h.grad(y)[0] == 0.0);
  CHECK(h.grad(y)[1] == 0.0);
}

TEST_CASE("backward preconditions and numeric errors") {
  Graph g;
  const Var x = g.variable(Tensor::row({1.0, 2.0}));
  CHECK_THROWS_AS(g.backward(x), std::invalid_argument);

  Graph h;
  const Var big = h.variable(Tensor::row({1e200, 1e200}));
  try {
    h.sum_squares(big);
    FAIL("overflow was not reported");
  } catch (const NumericError& e) {
    CHECK(e.node() == 1);
  }
}

TEST_CASE("finite differences, each primitive in isolation") {
  Rng rng(42);
  const Tensor a = random_tensor(3, 4, rng), b = random_tensor(4, 2, rng);
  const Tensor c = random_tensor(3, 4, rng), row = random_tensor(1, 4, rng);

  SUBCASE("matmul") {
    check_fd([](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, g.matmul(v[0], v[1]), 1); },
             {a, b});
  }
  SUBCASE("add, same shape and row broadcast") {
    check_fd([](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, g.add(v[0], v[1]), 2); },
             {a, c});
    check_fd([](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, g.add(v[0], v[1]), 3); },
             {a, row});
  }
  SUBCASE("sub") {
    check_fd([](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, g.sub(v[0], v[1]), 4); },
             {a, c});
  }
  SUBCASE("mul") {
    check_fd([](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, g.mul(v[0], v[1]), 5); },
             {a, c});
  }
  SUBCASE("scale") {
    check_fd([](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, g.scale(v[0], -2.5), 6); },
             {a});
  }
  SUBCASE("relu") {
    check_fd([](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, g.relu(v[0]), 7); },
             {away_from_zero(a)});
  }
  SUBCASE("sigmoid") {
    check_fd([](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, g.sigmoid(v[0]), 8); },
             {a});
  }
  SUBCASE("softmax") {
    check_fd([](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, g.softmax(v[0]), 9); },
             {a});
  }
  SUBCASE("log_softmax") {
    check_fd([](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, g.log_softmax(v[0]), 10); },
             {a});
  }
  SUBCASE("mean") {
    check_fd([](Graph& g, const std::vector<Var>& v) { return g.mean(v[0]); }, {a});
  }
  SUBCASE("sum_squares") {
    check_fd([](Graph& g, const std::vector<Var>& v) { return g.sum_squares(v[0]); }, {a});
  }
  SUBCASE("l2_norm") {
    check_fd([](Graph& g, const std::vector<Var>& v) { return g.l2_norm(v[0]); }, {a});
  }
  SUBCASE("pick") {
    check_fd([](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, g.pick(v[0], {1, 3, 0}), 11); },
             {a});
  }
  SUBCASE("reshape") {
    check_fd([](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, g.reshape(v[0], 2, 6), 12); },
             {a});
  }
  SUBCASE("patch_pool") {
    const PatchGeometry geo{6, 4, 3, 2, 2};
    const Tensor cells = random_tensor(2, geo.cell_values(), rng);
    check_fd([geo](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, g.patch_pool(v[0], geo), 13); },
             {cells});
  }
  SUBCASE("expand_factors") {
    const PatchGeometry geo{6, 4, 3, 3, 2};
    const Tensor factors = random_tensor(2, geo.factor_values(), rng);
    check_fd([geo](Graph& g, const std::vector<Var>& v) {
      return weighted_sum(g, g.expand_factors(v[0], geo), 14);
    }, {factors});
  }
}

TEST_CASE("l2_norm subgradient at the origin is zero") {
  Graph g;
  const Var x = g.variable(Tensor::row({0.0, 0.0, 0.0}));
  g.backward(g.l2_norm(x));
  for (const double v : g.grad(x).values()) CHECK(v == 0.0);
}

TEST_CASE("finite differences, composed 2-hidden-layer network") {
  Rng rng(7);
  const Tensor x = random_tensor(5, 6, rng);
  const Tensor w1 = random_tensor(6, 8, rng), b1 = random_tensor(1, 8, rng);
  const Tensor w2 = random_tensor(8, 8, rng), b2 = random_tensor(1, 8, rng);
  const Tensor w3 = random_tensor(8, 2, rng), b3 = random_tensor(1, 2, rng);
  const auto net = [](Graph& g, const std::vector<Var>& v) {
    const Var h1 = g.relu(g.add(g.matmul(v[0], v[1]), v[2]));
    const Var h2 = g.relu(g.add(g.matmul(h1, v[3]), v[4]));
    const Var logp = g.log_softmax(g.add(g.matmul(h2, v[5]), v[6]));
    const Var nll = g.scale(g.mean(g.pick(logp, {0, 1, 1, 0, 1})), -1.0);
    return g.add(nll, g.scale(g.sum_squares(v[1]), 1e-3));
  };
  const auto rep = oracle::finite_difference_check(net, {x, w1, b1, w2, b2, w3, b3}, 1e-5, 24, 3);
  CHECK(rep.coordinates >= 100);
  CHECK(rep.max_relative_error < 1e-4);
}

TEST_CASE("tensor shape invariants") {
  CHECK_THROWS(Tensor(2, 2, std::vector<double>{1, 2, 3}));
  Graph g;
  const Var a = g.variable(Tensor(2, 3));
  const Var b = g.variable(Tensor(2, 2));
  CHECK_THROWS_AS(g.matmul(a, b), std::invalid_argument);
  CHECK_THROWS_AS(g.add(a, b), std::invalid_argument);
  CHECK(g.value(g.reshape(a, 3, 2)).rows() == 3);
  CHECK_THROWS_AS(g.reshape(a, 4, 2), std::invalid_argument);
}
