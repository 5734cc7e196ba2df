#pragma once

#include <algorithm>
#include <cmath>

#include "glimpse/tensor.hpp"

namespace glimpse {

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Tensor sigmoid(const Tensor& x) {
  Tensor out = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid(x[i]);
  out.check_finite("sigmoid");
  return out;
}

inline Tensor tanh(const Tensor& x) {
  Tensor out = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
  out.check_finite("tanh");
  return out;
}

// W·x + bias with W stored [rows x cols] row-major.
inline Tensor affine(const Tensor& weight, const Tensor& bias, const Tensor& x) {
  if (weight.rank() != 2 || bias.rank() != 1 || x.rank() != 1 ||
      weight.extent(1) != x.extent(0) || weight.extent(0) != bias.extent(0)) {
    throw DimensionError("affine: weight " + shape_str(weight.shape()) + ", bias " +
                         shape_str(bias.shape()) + ", input " + shape_str(x.shape()) +
                         " do not conform");
  }
  const std::size_t rows = weight.extent(0);
  const std::size_t cols = weight.extent(1);
  Tensor out({rows});
  const double* w = weight.data();
  const double* xv = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = bias[r];
    const double* wr = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * xv[c];
    out[r] = acc;
  }
  out.check_finite("affine");
  return out;
}

// Accumulates d_weight += d_out ⊗ x, d_bias += d_out, d_x += Wᵀ·d_out.
// Any destination may be null to skip that gradient.
inline void affine_backward(const Tensor& weight, const Tensor& x, const Tensor& d_out,
                            Tensor* d_weight, Tensor* d_bias, Tensor* d_x) {
  const std::size_t rows = weight.extent(0);
  const std::size_t cols = weight.extent(1);
  if (d_out.size() != rows || x.size() != cols) {
    throw DimensionError("affine_backward: weight " + shape_str(weight.shape()) +
                         " vs input " + shape_str(x.shape()) + " and upstream " +
                         shape_str(d_out.shape()));
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const double g = d_out[r];
    if (d_weight != nullptr) {
      double* dw = d_weight->data() + r * cols;
      const double* xv = x.data();
      for (std::size_t c = 0; c < cols; ++c) dw[c] += g * xv[c];
    }
    if (d_bias != nullptr) (*d_bias)[r] += g;
    if (d_x != nullptr) {
      const double* wr = weight.data() + r * cols;
      double* dx = d_x->data();
      for (std::size_t c = 0; c < cols; ++c) dx[c] += g * wr[c];
    }
  }
}

// Numerically safe softmax: subtracts the max before exponentiating.
inline Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 1 || logits.size() == 0) {
    throw DimensionError("softmax: expected a non-empty vector, got " +
                         shape_str(logits.shape()));
  }
  double hi = logits[0];
  for (std::size_t i = 1; i < logits.size(); ++i) hi = std::max(hi, logits[i]);
  Tensor out = Tensor::zeros_like(logits);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - hi);
    sum += out[i];
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= sum;
  out.check_finite("softmax");
  return out;
}

// d_logits = p ⊙ (d_p − <d_p, p>)
inline Tensor softmax_backward(const Tensor& probs, const Tensor& d_probs) {
  if (!probs.same_shape(d_probs)) {
    throw DimensionError("softmax_backward: probs " + shape_str(probs.shape()) +
                         " vs upstream " + shape_str(d_probs.shape()));
  }
  double inner = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) inner += d_probs[i] * probs[i];
  Tensor out = Tensor::zeros_like(probs);
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] * (d_probs[i] - inner);
  return out;
}

inline Tensor sigmoid_backward(const Tensor& out, const Tensor& d_out) {
  Tensor d_in = Tensor::zeros_like(out);
  for (std::size_t i = 0; i < out.size(); ++i) d_in[i] = d_out[i] * out[i] * (1.0 - out[i]);
  return d_in;
}

inline Tensor tanh_backward(const Tensor& out, const Tensor& d_out) {
  Tensor d_in = Tensor::zeros_like(out);
  for (std::size_t i = 0; i < out.size(); ++i) d_in[i] = d_out[i] * (1.0 - out[i] * out[i]);
  return d_in;
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("hadamard: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros_like(a);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  out.check_finite("hadamard");
  return out;
}

inline double dot(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("dot: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// y += a·x
inline void axpy(double a, const Tensor& x, Tensor& y) {
  if (!x.same_shape(y)) {
    throw DimensionError("axpy: " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  }
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

}  // namespace glimpse
