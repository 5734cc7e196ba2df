#include <cmath>

#include "doctest.h"
#include "glimpse/grad_check.hpp"
#include "glimpse/math.hpp"
#include "glimpse/rng.hpp"
#include "glimpse/tensor.hpp"

using namespace glimpse;

TEST_CASE("tensor shape bookkeeping") {
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.rank() == 2);
  t.at(1, 2) = 5.0;
  CHECK(t[5] == 5.0);
  CHECK_THROWS_AS(Tensor({2, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor(std::vector<std::size_t>{}), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
  Tensor bad({2}, {1.0, std::nan("")});
  CHECK_THROWS_AS(bad.check_finite("test"), NumericError);
}

TEST_CASE("affine matches hand arithmetic") {
  SUBCASE("zero map annihilates") {
    Tensor w({2, 3});
    Tensor b({2});
    Tensor x({3}, {1.0, -2.0, 7.5});
    const Tensor y = affine(w, b, x);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
  }
  SUBCASE("identity map passes input through") {
    Tensor w({3, 3});
    for (std::size_t i = 0; i < 3; ++i) w.at(i, i) = 1.0;
    Tensor b({3});
    Tensor x({3}, {0.25, -1.5, 3.0});
    CHECK(affine(w, b, x) == x);
  }
  SUBCASE("2x2 hand case") {
    Tensor w({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor b({2}, {1.0, 1.0});
    Tensor x({2}, {1.0, 1.0});
    const Tensor y = affine(w, b, x);
    CHECK(y[0] == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(y[1] == doctest::Approx(8.0).epsilon(1e-15));
  }
  SUBCASE("shape mismatch names both shapes") {
    Tensor w({2, 3});
    Tensor b({2});
    Tensor x({4});
    try {
      affine(w, b, x);
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[2x3]") != std::string::npos);
      CHECK(msg.find("[4]") != std::string::npos);
    }
  }
}

TEST_CASE("softmax analytic cases") {
  SUBCASE("uniform for constant input") {
    const Tensor p = softmax(Tensor({4}));
    for (std::size_t i = 0; i < 4; ++i) CHECK(p[i] == doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("[0, ln 3] -> [0.25, 0.75]") {
    const Tensor p = softmax(Tensor({2}, {0.0, std::log(3.0)}));
    CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-12));
  }
  SUBCASE("shift invariance") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      Tensor z({5});
      for (std::size_t i = 0; i < 5; ++i) z[i] = rng.uniform(-10.0, 10.0);
      const double c = rng.uniform(-50.0, 50.0);
      Tensor shifted = z;
      for (std::size_t i = 0; i < 5; ++i) shifted[i] += c;
      const Tensor a = softmax(z);
      const Tensor b = softmax(shifted);
      for (std::size_t i = 0; i < 5; ++i) CHECK(std::fabs(a[i] - b[i]) <= 1e-12);
    }
  }
  SUBCASE("empty input is a dimension error") {
    CHECK_THROWS_AS(softmax(Tensor()), DimensionError);
  }
}

TEST_CASE("softmax is a probability vector for extreme inputs") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(8);
    Tensor z({n});
    for (std::size_t i = 0; i < n; ++i) z[i] = rng.uniform(-700.0, 700.0);
    const Tensor p = softmax(z);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(p[i] >= 0.0);
      sum += p[i];
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
  }
  // order preservation, on a range where no exponent underflows
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(7);
    Tensor z({n});
    for (std::size_t i = 0; i < n; ++i) z[i] = rng.uniform(-30.0, 30.0);
    const Tensor p = softmax(z);
    const std::size_t a = rng.uniform_index(n);
    const std::size_t b = rng.uniform_index(n);
    if (z[a] > z[b]) CHECK(p[a] > p[b]);
  }
}

TEST_CASE("sigmoid and tanh symmetries") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const double x = rng.uniform(-40.0, 40.0);
    CHECK(std::fabs(sigmoid(x) + sigmoid(-x) - 1.0) <= 1e-12);
    CHECK(std::fabs(std::tanh(-x) + std::tanh(x)) <= 1e-12);
  }
}

// Every differentiable primitive against central differences, 10 seeds each.
TEST_CASE("primitive gradients pass finite-difference checks") {
  const double eps = 1e-5;
  const double tol = 1e-6;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const std::size_t n = 4, m = 3;
    Tensor w({m, n}), b({m}), x({n}), weights_out({m}), weights_in({n});
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.normal();
    for (std::size_t i = 0; i < m; ++i) b[i] = rng.normal();
    for (std::size_t i = 0; i < n; ++i) x[i] = rng.normal();
    for (std::size_t i = 0; i < m; ++i) weights_out[i] = rng.normal();
    for (std::size_t i = 0; i < n; ++i) weights_in[i] = rng.normal();

    SUBCASE("") {}  // keep doctest quiet about empty body

    // loss = <weights_out, affine(w, b, x)>, checked w.r.t. w, b and x
    {
      Tensor dw({m, n}), db({m}), dx({n});
      affine_backward(w, x, weights_out, &dw, &db, &dx);
      auto loss_w = [&](const Tensor& cand) { return dot(weights_out, affine(cand, b, x)); };
      auto loss_b = [&](const Tensor& cand) { return dot(weights_out, affine(w, cand, x)); };
      auto loss_x = [&](const Tensor& cand) { return dot(weights_out, affine(w, b, cand)); };
      CHECK(grad_check(loss_w, w, dw, eps) <= tol);
      CHECK(grad_check(loss_b, b, db, eps) <= tol);
      CHECK(grad_check(loss_x, x, dx, eps) <= tol);
    }
    // loss = <weights_in, softmax(x)>
    {
      const Tensor p = softmax(x);
      const Tensor dz = softmax_backward(p, weights_in);
      auto loss = [&](const Tensor& cand) { return dot(weights_in, softmax(cand)); };
      CHECK(grad_check(loss, x, dz, eps) <= tol);
    }
    // loss = <weights_in, sigmoid(x)> and <weights_in, tanh(x)>
    {
      const Tensor s = sigmoid(x);
      const Tensor ds = sigmoid_backward(s, weights_in);
      auto loss_s = [&](const Tensor& cand) { return dot(weights_in, sigmoid(cand)); };
      CHECK(grad_check(loss_s, x, ds, eps) <= tol);
      const Tensor th = tanh(x);
      const Tensor dth = tanh_backward(th, weights_in);
      auto loss_t = [&](const Tensor& cand) { return dot(weights_in, tanh(cand)); };
      CHECK(grad_check(loss_t, x, dth, eps) <= tol);
    }
    // loss = <weights_in, x ⊙ y> w.r.t. x
    {
      Tensor y({n});
      for (std::size_t i = 0; i < n; ++i) y[i] = rng.normal();
      const Tensor dx = hadamard(weights_in, y);
      auto loss = [&](const Tensor& cand) { return dot(weights_in, hadamard(cand, y)); };
      CHECK(grad_check(loss, x, dx, eps) <= tol);
    }
  }
}
