#include <cmath>

#include "doctest.h"
#include "glimpse/grad_check.hpp"
#include "glimpse/math.hpp"
#include "glimpse/rng.hpp"

using namespace glimpse;

TEST_CASE("grad_check on f(x) = x^2") {
  Tensor x({1}, {3.0});
  Tensor analytic({1}, {6.0});
  auto f = [](const Tensor& t) { return t[0] * t[0]; };
  CHECK(grad_check(f, x, analytic, 1e-5) <= 1e-9);
}

// One-layer softmax classifier: loss(W) = -log softmax(W·x)[target]. The
// analytic gradient is (p - y) xᵀ; the oracle is the central-difference loop.
TEST_CASE("grad_check on a softmax classifier") {
  Rng rng(17);
  const std::size_t classes = 4, features = 5;
  Tensor w({classes, features});
  Tensor x({features});
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.normal();
  for (std::size_t i = 0; i < features; ++i) x[i] = rng.normal();
  const std::size_t target = 2;
  Tensor bias({classes});

  const Tensor probs = softmax(affine(w, bias, x));
  Tensor analytic({classes, features});
  for (std::size_t c = 0; c < classes; ++c) {
    const double delta = probs[c] - (c == target ? 1.0 : 0.0);
    for (std::size_t j = 0; j < features; ++j) analytic.at(c, j) = delta * x[j];
  }
  auto loss = [&](const Tensor& cand) {
    return -std::log(softmax(affine(cand, bias, x))[target]);
  };
  CHECK(grad_check(loss, w, analytic, 1e-5) <= 1e-7);

  SUBCASE("a 1% scaling of the analytic gradient is flagged") {
    Tensor wrong = analytic;
    for (std::size_t i = 0; i < wrong.size(); ++i) wrong[i] *= 1.01;
    const double err = grad_check(loss, w, wrong, 1e-5);
    CHECK(err > 1e-4);  // fails the acceptance threshold
    CHECK(err > 5e-3);
    CHECK(err < 2e-2);  // and sits near the injected 1e-2 fault size
  }
}

TEST_CASE("grad_check reports the offending coordinate on non-finite values") {
  Tensor x({2}, {1.0, 0.0});
  Tensor analytic({2});
  auto f = [](const Tensor& t) { return 1.0 / t[1]; };  // blows up at the perturbed origin
  try {
    grad_check(f, x, analytic, 1e-5);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("coordinate") != std::string::npos);
  }
  CHECK_THROWS_AS(grad_check([](const Tensor&) { return 0.0; }, x, analytic, 0.0),
                  ContractError);
}
