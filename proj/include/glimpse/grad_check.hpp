#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "glimpse/tensor.hpp"

namespace glimpse {

// Central-difference gradient check of a scalar function against a hand-written
// gradient. Returns the worst relative error over all coordinates:
//
//   max_i |analytic_i − numeric_i| / max(1, |analytic_i|, |numeric_i|)
//
// where numeric_i = (f(θ + ε·e_i) − f(θ − ε·e_i)) / 2ε.
template <class F>
double grad_check(F&& f, const Tensor& params, const Tensor& analytic_grad, double eps) {
  if (eps <= 0.0) throw ContractError("grad_check: eps must be positive");
  if (!params.same_shape(analytic_grad)) {
    throw DimensionError("grad_check: params " + shape_str(params.shape()) +
                         " vs analytic gradient " + shape_str(analytic_grad.shape()));
  }
  Tensor work = params;
  double worst = 0.0;
  for (std::size_t i = 0; i < work.size(); ++i) {
    const double orig = work[i];
    work[i] = orig + eps;
    const double f_plus = f(static_cast<const Tensor&>(work));
    work[i] = orig - eps;
    const double f_minus = f(static_cast<const Tensor&>(work));
    work[i] = orig;
    if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
      throw NumericError("grad_check: non-finite function value at coordinate " +
                         std::to_string(i));
    }
    const double numeric = (f_plus - f_minus) / (2.0 * eps);
    const double analytic = analytic_grad[i];
    const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
    worst = std::max(worst, std::fabs(analytic - numeric) / denom);
  }
  return worst;
}

}  // namespace glimpse
