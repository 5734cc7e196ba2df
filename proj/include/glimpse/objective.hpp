#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "glimpse/tensor.hpp"

namespace glimpse {

// Predicted probabilities are clamped here before the log; keeps degenerate
// predictions from producing -inf. Well below every test tolerance.
inline constexpr double kLogClamp = 1e-12;

struct LossConfig {
  double lambda = 0.0;  // attention-penalty coefficient
  double gamma = 0.0;   // weight-decay coefficient

  void validate() const {
    if (!(std::isfinite(lambda) && lambda >= 0.0)) {
      throw ConfigError("loss: lambda must be finite and nonnegative");
    }
    if (!(std::isfinite(gamma) && gamma >= 0.0)) {
      throw ConfigError("loss: gamma must be finite and nonnegative");
    }
  }
};

struct LossBreakdown {
  double cross_entropy = 0.0;
  double attention_penalty = 0.0;
  double weight_decay = 0.0;
  double total = 0.0;
};

inline Tensor one_hot(std::size_t index, std::size_t size) {
  if (index >= size) {
    throw DataError("one_hot: index " + std::to_string(index) + " out of range " +
                    std::to_string(size));
  }
  Tensor t({size});
  t[index] = 1.0;
  return t;
}

inline void check_one_hot(const Tensor& target) {
  std::size_t ones = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] == 1.0) {
      ++ones;
    } else if (target[i] != 0.0) {
      throw DataError("target vector is not one-hot: entry " + std::to_string(i) + " is " +
                      std::to_string(target[i]));
    }
  }
  if (ones != 1) {
    throw DataError("target vector is not one-hot: " + std::to_string(ones) + " ones");
  }
}

// −Σ_t Σ_i y_{t,i} log ŷ_{t,i}, summed over time (unnormalized).
inline double cross_entropy_term(const std::vector<Tensor>& y_hats,
                                 const std::vector<Tensor>& targets) {
  if (y_hats.size() != targets.size()) {
    throw DimensionError("cross_entropy: " + std::to_string(y_hats.size()) +
                         " predictions vs " + std::to_string(targets.size()) + " targets");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < y_hats.size(); ++t) {
    const Tensor& y_hat = y_hats[t];
    const Tensor& y = targets[t];
    if (!y_hat.same_shape(y)) {
      throw DimensionError("cross_entropy: prediction " + shape_str(y_hat.shape()) +
                           " vs target " + shape_str(y.shape()));
    }
    check_one_hot(y);
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] != 0.0) total -= y[i] * std::log(std::max(y_hat[i], kLogClamp));
    }
  }
  return total;
}

// λ Σ_i (1 − Σ_t l_{t,i})²: pushes total attention mass toward 1 per region.
inline double attention_penalty_term(const std::vector<Tensor>& ls, double lambda) {
  if (ls.empty() || lambda == 0.0) return 0.0;
  const std::size_t regions = ls.front().size();
  std::vector<double> mass(regions, 0.0);
  for (const Tensor& l : ls) {
    if (l.size() != regions) {
      throw DimensionError("attention_penalty: inconsistent attention sizes");
    }
    for (std::size_t i = 0; i < regions; ++i) mass[i] += l[i];
  }
  double penalty = 0.0;
  for (std::size_t i = 0; i < regions; ++i) {
    const double gap = 1.0 - mass[i];
    penalty += gap * gap;
  }
  return lambda * penalty;
}

// γ Σ θ² over every trainable weight and bias.
inline double weight_decay_term(const std::vector<const Tensor*>& params, double gamma) {
  if (gamma == 0.0) return 0.0;
  double sum_sq = 0.0;
  for (const Tensor* p : params) {
    for (std::size_t i = 0; i < p->size(); ++i) sum_sq += (*p)[i] * (*p)[i];
  }
  return gamma * sum_sq;
}

inline LossBreakdown total_loss(const std::vector<Tensor>& y_hats,
                                const std::vector<Tensor>& targets,
                                const std::vector<Tensor>& ls,
                                const std::vector<const Tensor*>& params,
                                const LossConfig& config) {
  config.validate();
  LossBreakdown out;
  out.cross_entropy = cross_entropy_term(y_hats, targets);
  out.attention_penalty = attention_penalty_term(ls, config.lambda);
  out.weight_decay = weight_decay_term(params, config.gamma);
  out.total = out.cross_entropy + out.attention_penalty + out.weight_decay;
  return out;
}

}  // namespace glimpse
