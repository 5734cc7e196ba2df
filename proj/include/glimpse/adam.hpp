#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "glimpse/tensor.hpp"

namespace glimpse {

struct AdamConfig {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;  // added outside the square root of v̂
};

// Per-parameter moment estimates, mirrored onto the model's canonical tensor
// order. step_count increments by exactly one per update.
struct AdamState {
  AdamConfig config;
  std::uint64_t step_count = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  static AdamState init_like(const std::vector<const Tensor*>& params,
                             const AdamConfig& config = {}) {
    AdamState s;
    s.config = config;
    for (const Tensor* p : params) {
      s.first_moment.push_back(Tensor::zeros_like(*p));
      s.second_moment.push_back(Tensor::zeros_like(*p));
    }
    return s;
  }
};

// Bias-corrected Adam update, applied in place:
//   m ← β1·m + (1−β1)·g        v ← β2·v + (1−β2)·g²
//   θ ← θ − α · (m / (1−β1^k)) / (√(v / (1−β2^k)) + ε)
inline void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
                      AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw ContractError("adam_step: parameter/gradient/state counts differ");
  }
  state.step_count += 1;
  const AdamConfig& c = state.config;
  const double k = static_cast<double>(state.step_count);
  const double bias1 = 1.0 - std::pow(c.beta1, k);
  const double bias2 = 1.0 - std::pow(c.beta2, k);
  for (std::size_t j = 0; j < params.size(); ++j) {
    Tensor& theta = *params[j];
    const Tensor& grad = *grads[j];
    Tensor& m = state.first_moment[j];
    Tensor& v = state.second_moment[j];
    if (!theta.same_shape(grad) || !theta.same_shape(m)) {
      throw ContractError("adam_step: shape mismatch at tensor " + std::to_string(j) + ": " +
                          shape_str(theta.shape()) + " vs " + shape_str(grad.shape()));
    }
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      theta[i] -= c.alpha * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace glimpse
