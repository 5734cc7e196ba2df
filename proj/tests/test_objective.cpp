#include <cmath>
#include <vector>

#include "doctest.h"
#include "glimpse/math.hpp"
#include "glimpse/objective.hpp"
#include "glimpse/rng.hpp"

using namespace glimpse;

TEST_CASE("cross entropy analytic cases") {
  SUBCASE("uniform prediction, C=4, T=1 -> log 4") {
    const std::vector<Tensor> y_hat{Tensor::filled({4}, 0.25)};
    const std::vector<Tensor> y{one_hot(1, 4)};
    CHECK(cross_entropy_term(y_hat, y) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  SUBCASE("perfect one-hot prediction -> 0") {
    std::vector<Tensor> y_hat, y;
    for (int t = 0; t < 3; ++t) {
      y_hat.push_back(one_hot(2, 5));
      y.push_back(one_hot(2, 5));
    }
    CHECK(cross_entropy_term(y_hat, y) == 0.0);
  }
  SUBCASE("two-step hand case") {
    const std::vector<Tensor> y_hat{Tensor({2}, {0.5, 0.5}), Tensor({2}, {0.25, 0.75})};
    const std::vector<Tensor> y{one_hot(1, 2), one_hot(1, 2)};
    const double expected = -(std::log(0.5) + std::log(0.75));
    CHECK(cross_entropy_term(y_hat, y) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.980829).epsilon(1e-6));
  }
  SUBCASE("non-one-hot target is a data error") {
    const std::vector<Tensor> y_hat{Tensor::filled({3}, 1.0 / 3.0)};
    CHECK_THROWS_AS(cross_entropy_term(y_hat, {Tensor({3}, {0.5, 0.5, 0.0})}), DataError);
    CHECK_THROWS_AS(cross_entropy_term(y_hat, {Tensor({3}, {1.0, 1.0, 0.0})}), DataError);
    CHECK_THROWS_AS(cross_entropy_term(y_hat, {Tensor({3})}), DataError);
  }
}

TEST_CASE("attention penalty analytic cases") {
  SUBCASE("uniform attention with T = K^2 is exactly zero") {
    const std::vector<Tensor> ls(4, Tensor::filled({4}, 0.25));
    CHECK(attention_penalty_term(ls, 1.0) == 0.0);
  }
  SUBCASE("one-hot at the same region, K=2, T=4 -> 12 lambda") {
    std::vector<Tensor> ls(4, one_hot(1, 4));
    CHECK(attention_penalty_term(ls, 1.0) == doctest::Approx(12.0).epsilon(1e-15));
    CHECK(attention_penalty_term(ls, 2.5) == doctest::Approx(30.0).epsilon(1e-15));
  }
  SUBCASE("lambda = 0 ignores attention entirely") {
    std::vector<Tensor> ls(3, one_hot(0, 9));
    CHECK(attention_penalty_term(ls, 0.0) == 0.0);
  }
  SUBCASE("invariant under permuting time order") {
    Rng rng(21);
    std::vector<Tensor> ls;
    for (int t = 0; t < 6; ++t) {
      Tensor z({5});
      for (std::size_t i = 0; i < 5; ++i) z[i] = rng.uniform(-2.0, 2.0);
      ls.push_back(softmax(z));
    }
    const double before = attention_penalty_term(ls, 3.0);
    std::vector<Tensor> shuffled{ls[4], ls[0], ls[5], ls[2], ls[1], ls[3]};
    CHECK(attention_penalty_term(shuffled, 3.0) == doctest::Approx(before).epsilon(1e-14));
  }
}

TEST_CASE("weight decay term") {
  SUBCASE("zero parameters") {
    Tensor a({3, 2}), b({4});
    CHECK(weight_decay_term({&a, &b}, 0.5) == 0.0);
  }
  SUBCASE("single weight hand case") {
    Tensor a({1}, {2.0});
    CHECK(weight_decay_term({&a}, 0.5) == doctest::Approx(2.0).epsilon(1e-15));
  }
  SUBCASE("random parameters match a flat-sum oracle") {
    Rng rng(4);
    Tensor a({3, 4}), b({7});
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.normal();
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = rng.normal();
    double oracle = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) oracle += a[i] * a[i];
    for (std::size_t i = 0; i < b.size(); ++i) oracle += b[i] * b[i];
    oracle *= 0.37;
    CHECK(std::fabs(weight_decay_term({&a, &b}, 0.37) - oracle) <= 1e-12 * std::fabs(oracle));
  }
}

TEST_CASE("total loss is the sum of its parts") {
  SUBCASE("all-zero case") {
    std::vector<Tensor> y_hat{one_hot(0, 3)};
    std::vector<Tensor> y{one_hot(0, 3)};
    std::vector<Tensor> ls(4, Tensor::filled({4}, 0.25));
    Tensor w({2, 2});
    const LossBreakdown b = total_loss(y_hat, y, ls, {&w}, {1.0, 1.0});
    CHECK(b.total == 0.0);
  }
  SUBCASE("hand-arithmetic additivity") {
    std::vector<Tensor> y_hat{Tensor({2}, {0.5, 0.5}), Tensor({2}, {0.25, 0.75})};
    std::vector<Tensor> y{one_hot(1, 2), one_hot(1, 2)};
    std::vector<Tensor> ls(4, one_hot(1, 4));
    Tensor w({1}, {2.0});
    const LossBreakdown b = total_loss(y_hat, y, ls, {&w}, {1.0, 0.5});
    const double expected = -(std::log(0.5) + std::log(0.75)) + 12.0 + 2.0;
    CHECK(b.total == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("random instance equals independently recomputed terms") {
    Rng rng(8);
    std::vector<Tensor> y_hat, y, ls;
    for (int t = 0; t < 5; ++t) {
      Tensor z({3});
      for (std::size_t i = 0; i < 3; ++i) z[i] = rng.normal();
      y_hat.push_back(softmax(z));
      y.push_back(one_hot(rng.uniform_index(3), 3));
      Tensor a({9});
      for (std::size_t i = 0; i < 9; ++i) a[i] = rng.normal();
      ls.push_back(softmax(a));
    }
    Tensor w({4, 4});
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.normal();
    const LossConfig cfg{2.0, 1e-3};
    const LossBreakdown b = total_loss(y_hat, y, ls, {&w}, cfg);
    const double recomputed = cross_entropy_term(y_hat, y) +
                              attention_penalty_term(ls, cfg.lambda) +
                              weight_decay_term({&w}, cfg.gamma);
    CHECK(std::fabs(b.total - recomputed) <= 1e-12);
    CHECK(b.cross_entropy >= 0.0);
    CHECK(b.attention_penalty >= 0.0);
    CHECK(b.weight_decay >= 0.0);
    CHECK(std::fabs(b.total - (b.cross_entropy + b.attention_penalty + b.weight_decay)) <= 1e-12);
  }
  SUBCASE("negative coefficients are rejected") {
    const LossConfig bad_lambda{-1.0, 0.0};
    const LossConfig bad_gamma{0.0, -1e-9};
    CHECK_THROWS_AS(bad_lambda.validate(), ConfigError);
    CHECK_THROWS_AS(bad_gamma.validate(), ConfigError);
  }
}
