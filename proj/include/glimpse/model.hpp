#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "glimpse/math.hpp"
#include "glimpse/objective.hpp"
#include "glimpse/rng.hpp"
#include "glimpse/tensor.hpp"

namespace glimpse {

// ---------------------------------------------------------------------------
// configuration and parameter containers
// ---------------------------------------------------------------------------

struct ModelConfig {
  std::size_t grid_side = 7;     // K: feature-cube grid side, K² attended regions
  std::size_t feat_dim = 1024;   // D: feature-slice dimensionality
  std::size_t hidden_dim = 512;  // d: LSTM hidden/cell and classifier-hidden width
  std::size_t num_layers = 3;    // L: stacked LSTM layers
  std::size_t num_classes = 2;   // C
  std::size_t block_len = 30;    // T: frames per block
  double dropout_p = 0.0;        // non-recurrent dropout probability

  std::size_t regions() const { return grid_side * grid_side; }

  void validate() const {
    if (grid_side < 1 || feat_dim < 1 || hidden_dim < 1 || num_layers < 1 || block_len < 1) {
      throw ConfigError("model config: all dimensions must be positive");
    }
    if (num_classes < 2) throw ConfigError("model config: need at least 2 classes");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
      throw ConfigError("model config: dropout_p must lie in [0, 1)");
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct AffineParams {
  Tensor weight;  // [rows x cols]
  Tensor bias;    // [rows]

  Tensor apply(const Tensor& x) const { return affine(weight, bias, x); }
};

// One hidden layer of tanh units, linear output.
struct MlpParams {
  AffineParams hidden;
  AffineParams output;
};

enum class ModelKind : std::uint8_t {
  soft_attention = 0,
  avg_pool_lstm = 1,
  max_pool_lstm = 2,
  softmax_regression = 3,
};

inline const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::soft_attention: return "attention";
    case ModelKind::avg_pool_lstm: return "avg_pool";
    case ModelKind::max_pool_lstm: return "max_pool";
    case ModelKind::softmax_regression: return "softmax_regression";
  }
  return "unknown";
}

// All trainable parameters of the recurrent models. The pooled baselines share
// the exact same LSTM/init/classifier shapes and simply have no attention map.
struct ModelParams {
  ModelConfig config;
  ModelKind kind = ModelKind::soft_attention;
  std::vector<AffineParams> lstm;  // layer 0: [4d x (d+D)]; layers >= 1: [4d x 2d]
  AffineParams attention;          // [K² x d] weights + [K²] bias; empty for pooled kinds
  MlpParams init_cell;             // D -> d tanh -> L·d, split across layers
  MlpParams init_hidden;
  AffineParams cls_hidden;  // d -> d, tanh applied by the classifier
  AffineParams cls_out;     // d -> C

  bool has_attention() const { return kind == ModelKind::soft_attention; }

  // Canonical parameter order; fixes serialization, Adam-state mirroring and
  // gradient layout.
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const {
    std::vector<std::pair<std::string, const Tensor*>> out;
    for (std::size_t l = 0; l < lstm.size(); ++l) {
      out.emplace_back("lstm" + std::to_string(l) + ".weight", &lstm[l].weight);
      out.emplace_back("lstm" + std::to_string(l) + ".bias", &lstm[l].bias);
    }
    if (has_attention()) {
      out.emplace_back("attention.weight", &attention.weight);
      out.emplace_back("attention.bias", &attention.bias);
    }
    out.emplace_back("init_cell.hidden.weight", &init_cell.hidden.weight);
    out.emplace_back("init_cell.hidden.bias", &init_cell.hidden.bias);
    out.emplace_back("init_cell.output.weight", &init_cell.output.weight);
    out.emplace_back("init_cell.output.bias", &init_cell.output.bias);
    out.emplace_back("init_hidden.hidden.weight", &init_hidden.hidden.weight);
    out.emplace_back("init_hidden.hidden.bias", &init_hidden.hidden.bias);
    out.emplace_back("init_hidden.output.weight", &init_hidden.output.weight);
    out.emplace_back("init_hidden.output.bias", &init_hidden.output.bias);
    out.emplace_back("cls_hidden.weight", &cls_hidden.weight);
    out.emplace_back("cls_hidden.bias", &cls_hidden.bias);
    out.emplace_back("cls_out.weight", &cls_out.weight);
    out.emplace_back("cls_out.bias", &cls_out.bias);
    return out;
  }

  std::vector<Tensor*> tensors() {
    std::vector<Tensor*> out;
    for (auto& [name, t] : named_tensors()) out.push_back(const_cast<Tensor*>(t));
    return out;
  }
  std::vector<const Tensor*> tensors() const {
    std::vector<const Tensor*> out;
    for (auto& [name, t] : named_tensors()) out.push_back(t);
    return out;
  }

  // Zero-filled parameter set; also the carrier for structure-mirrored gradients.
  static ModelParams zeros(const ModelConfig& config, ModelKind kind) {
    config.validate();
    if (kind == ModelKind::softmax_regression) {
      throw ContractError("ModelParams does not model softmax regression");
    }
    const std::size_t d = config.hidden_dim;
    ModelParams p;
    p.config = config;
    p.kind = kind;
    p.lstm.resize(config.num_layers);
    for (std::size_t l = 0; l < config.num_layers; ++l) {
      const std::size_t in = (l == 0) ? d + config.feat_dim : 2 * d;
      p.lstm[l].weight = Tensor({4 * d, in});
      p.lstm[l].bias = Tensor({4 * d});
    }
    if (kind == ModelKind::soft_attention) {
      p.attention.weight = Tensor({config.regions(), d});
      p.attention.bias = Tensor({config.regions()});
    }
    p.init_cell.hidden.weight = Tensor({d, config.feat_dim});
    p.init_cell.hidden.bias = Tensor({d});
    p.init_cell.output.weight = Tensor({config.num_layers * d, d});
    p.init_cell.output.bias = Tensor({config.num_layers * d});
    p.init_hidden = p.init_cell;  // same zero shapes
    p.cls_hidden.weight = Tensor({d, d});
    p.cls_hidden.bias = Tensor({d});
    p.cls_out.weight = Tensor({config.num_classes, d});
    p.cls_out.bias = Tensor({config.num_classes});
    return p;
  }

  // Glorot-uniform weights, zero biases, forget-gate bias 1. Weight tensors are
  // filled row-major in canonical order, so a seed pins the whole model.
  static ModelParams init(const ModelConfig& config, ModelKind kind, Rng& rng) {
    ModelParams p = zeros(config, kind);
    for (auto& [name, ct] : p.named_tensors()) {
      Tensor* t = const_cast<Tensor*>(ct);
      if (t->rank() != 2) continue;  // biases stay zero
      const double fan_out = static_cast<double>(t->extent(0));
      const double fan_in = static_cast<double>(t->extent(1));
      const double s = std::sqrt(6.0 / (fan_in + fan_out));
      for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] = rng.uniform(-s, s);
    }
    const std::size_t d = config.hidden_dim;
    for (auto& layer : p.lstm) {
      for (std::size_t i = d; i < 2 * d; ++i) layer.bias[i] = 1.0;
    }
    return p;
  }
};

using GradientSet = ModelParams;

// Per-step softmax over the flattened feature cube; the non-recurrent baseline.
struct SoftmaxRegressionParams {
  ModelConfig config;
  AffineParams map;  // [C x K²·D]

  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const {
    return {{"map.weight", &map.weight}, {"map.bias", &map.bias}};
  }
  std::vector<Tensor*> tensors() { return {&map.weight, &map.bias}; }
  std::vector<const Tensor*> tensors() const { return {&map.weight, &map.bias}; }

  static SoftmaxRegressionParams zeros(const ModelConfig& config) {
    config.validate();
    SoftmaxRegressionParams p;
    p.config = config;
    p.map.weight = Tensor({config.num_classes, config.regions() * config.feat_dim});
    p.map.bias = Tensor({config.num_classes});
    return p;
  }

  static SoftmaxRegressionParams init(const ModelConfig& config, Rng& rng) {
    SoftmaxRegressionParams p = zeros(config);
    const double fan_in = static_cast<double>(p.map.weight.extent(1));
    const double fan_out = static_cast<double>(p.map.weight.extent(0));
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t i = 0; i < p.map.weight.size(); ++i) p.map.weight[i] = rng.uniform(-s, s);
    return p;
  }
};

// ---------------------------------------------------------------------------
// runtime state
// ---------------------------------------------------------------------------

struct LstmState {
  std::vector<Tensor> hidden;  // L vectors [d]
  std::vector<Tensor> cell;    // L vectors [d]

  static LstmState zeros(std::size_t layers, std::size_t dim) {
    LstmState s;
    s.hidden.assign(layers, Tensor({dim}));
    s.cell.assign(layers, Tensor({dim}));
    return s;
  }
};

struct StepOutput {
  Tensor attention;     // l_t over K² regions (empty for models without attention)
  Tensor class_probs;   // ŷ_t over C classes
  Tensor pooled_input;  // x_t actually fed to the LSTM stack (pre-dropout)
};

enum class RunMode { train, eval };

enum class AttentionMode {
  learned,         // location softmax from the previous top hidden state
  forced_uniform,  // constant 1/K² everywhere (average-pooling equivalence probe)
};

// One Bernoulli keep-mask per non-recurrent connection, sampled once per block:
// layer_input[0] gates x_t into layer 0, layer_input[l] gates h^{l-1} into
// layer l, classifier_input gates h_top into the classifier. The recurrent
// h/c paths and the location-softmax input are never masked.
struct DropoutMasks {
  std::vector<Tensor> layer_input;
  Tensor classifier_input;
};

inline DropoutMasks sample_dropout_masks(const ModelConfig& config, Rng& rng) {
  DropoutMasks m;
  const double p = config.dropout_p;
  auto draw = [&](std::size_t n) {
    Tensor t({n});
    for (std::size_t i = 0; i < n; ++i) t[i] = rng.uniform() >= p ? 1.0 : 0.0;
    return t;
  };
  m.layer_input.push_back(draw(config.feat_dim));
  for (std::size_t l = 1; l < config.num_layers; ++l) m.layer_input.push_back(draw(config.hidden_dim));
  m.classifier_input = draw(config.hidden_dim);
  return m;
}

// ---------------------------------------------------------------------------
// building-block operations
// ---------------------------------------------------------------------------

namespace detail {

inline void check_cube(const Tensor& frames, const ModelConfig& config) {
  if (frames.rank() != 4 || frames.extent(1) != config.grid_side ||
      frames.extent(2) != config.grid_side || frames.extent(3) != config.feat_dim) {
    throw DataError("feature cube " + shape_str(frames.shape()) +
                    " does not match model grid " + std::to_string(config.grid_side) +
                    "x" + std::to_string(config.grid_side) + "x" +
                    std::to_string(config.feat_dim));
  }
}

inline const double* slice_ptr(const Tensor& frames, std::size_t t, std::size_t region) {
  const std::size_t regions = frames.extent(1) * frames.extent(2);
  const std::size_t depth = frames.extent(3);
  return frames.data() + (t * regions + region) * depth;
}

}  // namespace detail

// Spatial mean of one frame's K² slices, accumulated region-ascending with
// weight 1/K² — the exact arithmetic of attending with a uniform distribution.
inline Tensor frame_average(const Tensor& frames, std::size_t t) {
  const std::size_t regions = frames.extent(1) * frames.extent(2);
  const std::size_t depth = frames.extent(3);
  const double w = 1.0 / static_cast<double>(regions);
  Tensor out({depth});
  for (std::size_t i = 0; i < regions; ++i) {
    const double* s = detail::slice_ptr(frames, t, i);
    for (std::size_t j = 0; j < depth; ++j) out[j] += w * s[j];
  }
  return out;
}

// Row mean of a [T x D] matrix, summed in ascending row order.
inline Tensor mean_rows(const Tensor& rows) {
  if (rows.rank() != 2) {
    throw DimensionError("mean_rows: expected a matrix, got " + shape_str(rows.shape()));
  }
  const std::size_t n = rows.extent(0);
  const std::size_t dim = rows.extent(1);
  Tensor out({dim});
  for (std::size_t t = 0; t < n; ++t) {
    const double* r = rows.data() + t * dim;
    for (std::size_t j = 0; j < dim; ++j) out[j] += r[j];
  }
  for (std::size_t j = 0; j < dim; ++j) out[j] /= static_cast<double>(n);
  return out;
}

struct InitCache {
  Tensor mean_input;       // m
  Tensor cell_hidden_act;  // tanh activations inside init_cell
  Tensor hidden_hidden_act;
};

// Initial (c_0, h_0) from two MLPs over the frame-and-slice mean feature vector;
// each MLP emits L·d values split layer-major across the stack.
inline LstmState init_state_from_mean(const Tensor& mean_input, const ModelParams& params,
                                      InitCache* cache = nullptr) {
  const std::size_t layers = params.config.num_layers;
  const std::size_t d = params.config.hidden_dim;
  const Tensor cell_act = tanh(params.init_cell.hidden.apply(mean_input));
  const Tensor hidden_act = tanh(params.init_hidden.hidden.apply(mean_input));
  const Tensor cell_flat = params.init_cell.output.apply(cell_act);
  const Tensor hidden_flat = params.init_hidden.output.apply(hidden_act);
  LstmState state = LstmState::zeros(layers, d);
  for (std::size_t l = 0; l < layers; ++l) {
    for (std::size_t j = 0; j < d; ++j) {
      state.cell[l][j] = cell_flat[l * d + j];
      state.hidden[l][j] = hidden_flat[l * d + j];
    }
  }
  if (cache != nullptr) {
    cache->mean_input = mean_input;
    cache->cell_hidden_act = cell_act;
    cache->hidden_hidden_act = hidden_act;
  }
  return state;
}

inline LstmState init_state(const Tensor& frames, const ModelParams& params,
                            InitCache* cache = nullptr) {
  detail::check_cube(frames, params.config);
  const std::size_t steps = frames.extent(0);
  Tensor per_frame({steps, params.config.feat_dim});
  for (std::size_t t = 0; t < steps; ++t) {
    const Tensor avg = frame_average(frames, t);
    for (std::size_t j = 0; j < avg.size(); ++j) per_frame.at(t, j) = avg[j];
  }
  return init_state_from_mean(mean_rows(per_frame), params, cache);
}

// Location softmax l_t = softmax(W·h + b) over the K² regions.
inline Tensor location_softmax(const Tensor& h_prev_top, const ModelParams& params) {
  if (!params.has_attention()) {
    throw ContractError("location_softmax: model has no attention parameters");
  }
  return softmax(params.attention.apply(h_prev_top));
}

// Expectation over feature slices: x_t = Σ_i l_i · X_{t,i}.
inline Tensor attend(const Tensor& frames, std::size_t t, const Tensor& attention) {
  const std::size_t regions = frames.extent(1) * frames.extent(2);
  const std::size_t depth = frames.extent(3);
  if (frames.rank() != 4 || t >= frames.extent(0) || attention.size() != regions) {
    throw DimensionError("attend: frames " + shape_str(frames.shape()) + " step " +
                         std::to_string(t) + " attention " + shape_str(attention.shape()));
  }
  double mass = 0.0;
  for (std::size_t i = 0; i < regions; ++i) mass += attention[i];
  if (std::fabs(mass - 1.0) > 1e-6) {
    throw ContractError("attend: attention mass " + std::to_string(mass) + " is not 1");
  }
  Tensor out({depth});
  for (std::size_t i = 0; i < regions; ++i) {
    const double w = attention[i];
    const double* s = detail::slice_ptr(frames, t, i);
    for (std::size_t j = 0; j < depth; ++j) out[j] += w * s[j];
  }
  out.check_finite("attend");
  return out;
}

inline Tensor attend(const Tensor& frame, const Tensor& attention) {
  if (frame.rank() != 3) {
    throw DimensionError("attend: expected a KxKxD frame, got " + shape_str(frame.shape()));
  }
  Tensor cube({1, frame.extent(0), frame.extent(1), frame.extent(2)});
  for (std::size_t i = 0; i < frame.size(); ++i) cube[i] = frame[i];
  return attend(cube, 0, attention);
}

struct LstmLayerCache {
  Tensor input_used;  // post-dropout / post-scale input fed to the affine map
  Tensor input_gate, forget_gate, output_gate, cell_cand;
  Tensor cell, tanh_cell, hidden;
};

// One step of the stacked LSTM. Gate order inside each 4d block is
// (input, forget, output, candidate); the affine map sees [h_{t-1}; input].
inline LstmState lstm_step(const Tensor& x, const LstmState& prev, const ModelParams& params,
                           RunMode mode, const DropoutMasks* masks,
                           std::vector<LstmLayerCache>* cache = nullptr) {
  const ModelConfig& config = params.config;
  if (masks != nullptr && mode == RunMode::eval) {
    throw ContractError("lstm_step: dropout masks provided at eval time");
  }
  if (x.rank() != 1 || x.size() != config.feat_dim) {
    throw DimensionError("lstm_step: input " + shape_str(x.shape()) + ", expected [" +
                         std::to_string(config.feat_dim) + "]");
  }
  if (prev.hidden.size() != config.num_layers || prev.cell.size() != config.num_layers) {
    throw DimensionError("lstm_step: state has wrong layer count");
  }
  const std::size_t d = config.hidden_dim;
  const double keep = 1.0 - config.dropout_p;
  LstmState next = LstmState::zeros(config.num_layers, d);
  if (cache != nullptr) cache->assign(config.num_layers, LstmLayerCache{});

  Tensor layer_input = x;
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    Tensor used = layer_input;
    if (masks != nullptr) {
      used = hadamard(layer_input, masks->layer_input[l]);
    } else if (mode == RunMode::eval && config.dropout_p > 0.0) {
      for (std::size_t i = 0; i < used.size(); ++i) used[i] *= keep;
    }
    const std::size_t in_dim = used.size();
    Tensor concat({d + in_dim});
    for (std::size_t i = 0; i < d; ++i) concat[i] = prev.hidden[l][i];
    for (std::size_t i = 0; i < in_dim; ++i) concat[d + i] = used[i];

    const Tensor gates = params.lstm[l].apply(concat);
    Tensor in_gate({d}), forget_gate({d}), out_gate({d}), cand({d});
    for (std::size_t i = 0; i < d; ++i) {
      in_gate[i] = sigmoid(gates[i]);
      forget_gate[i] = sigmoid(gates[d + i]);
      out_gate[i] = sigmoid(gates[2 * d + i]);
      cand[i] = std::tanh(gates[3 * d + i]);
    }
    Tensor cell({d}), tc({d}), hidden({d});
    for (std::size_t i = 0; i < d; ++i) {
      cell[i] = forget_gate[i] * prev.cell[l][i] + in_gate[i] * cand[i];
      tc[i] = std::tanh(cell[i]);
      hidden[i] = out_gate[i] * tc[i];
    }
    cell.check_finite("lstm_step cell");
    next.cell[l] = cell;
    next.hidden[l] = hidden;
    if (cache != nullptr) {
      auto& lc = (*cache)[l];
      lc.input_used = used;
      lc.input_gate = in_gate;
      lc.forget_gate = forget_gate;
      lc.output_gate = out_gate;
      lc.cell_cand = cand;
      lc.cell = cell;
      lc.tanh_cell = tc;
      lc.hidden = hidden;
    }
    layer_input = hidden;
  }
  return next;
}

struct ClassifierCache {
  Tensor input;  // post-dropout / post-scale top hidden state
  Tensor act;    // tanh hidden-layer activations
};

// ŷ = softmax(Wo · tanh(Wh · h + bh) + bo)
inline Tensor classify(const Tensor& h_top, const ModelParams& params, RunMode mode,
                       const Tensor* mask, ClassifierCache* cache = nullptr) {
  if (mask != nullptr && mode == RunMode::eval) {
    throw ContractError("classify: dropout mask provided at eval time");
  }
  Tensor used = h_top;
  if (mask != nullptr) {
    used = hadamard(h_top, *mask);
  } else if (mode == RunMode::eval && params.config.dropout_p > 0.0) {
    const double keep = 1.0 - params.config.dropout_p;
    for (std::size_t i = 0; i < used.size(); ++i) used[i] *= keep;
  }
  const Tensor act = tanh(params.cls_hidden.apply(used));
  const Tensor probs = softmax(params.cls_out.apply(act));
  if (cache != nullptr) {
    cache->input = used;
    cache->act = act;
  }
  return probs;
}

// ---------------------------------------------------------------------------
// block forward
// ---------------------------------------------------------------------------

struct StepCache {
  Tensor h_prev_top;  // top hidden state the location softmax read (attention models)
  std::vector<LstmLayerCache> layers;
  ClassifierCache classifier;
};

struct ForwardPass {
  ModelConfig config;
  ModelKind kind = ModelKind::soft_attention;
  RunMode mode = RunMode::eval;
  AttentionMode attention_mode = AttentionMode::learned;
  std::vector<StepOutput> steps;
  LstmState final_state;

  // present only for train-mode passes (everything BPTT needs)
  bool has_cache = false;
  Tensor frames;  // block copy; attention models only
  Tensor inputs;  // [T x D] precomputed inputs; pooled models only
  InitCache init;
  LstmState state0;
  std::vector<StepCache> cache;
  bool has_masks = false;
  DropoutMasks masks;
};

namespace detail {

inline void run_steps(ForwardPass& pass, const ModelParams& params, Rng* rng,
                      const Tensor* frames, const Tensor* inputs) {
  const ModelConfig& config = params.config;
  const std::size_t steps = config.block_len;
  const bool train = pass.mode == RunMode::train;
  const bool record = train;

  if (train && config.dropout_p > 0.0) {
    if (rng == nullptr) throw ContractError("forward: training with dropout needs an rng");
    pass.masks = sample_dropout_masks(config, *rng);
    pass.has_masks = true;
  }
  const DropoutMasks* masks = pass.has_masks ? &pass.masks : nullptr;

  InitCache init_cache;
  LstmState state;
  if (frames != nullptr) {
    state = init_state(*frames, params, record ? &init_cache : nullptr);
  } else {
    state = init_state_from_mean(mean_rows(*inputs), params, record ? &init_cache : nullptr);
  }
  if (record) {
    pass.has_cache = true;
    pass.init = init_cache;
    pass.state0 = state;
    pass.cache.resize(steps);
    if (frames != nullptr) pass.frames = *frames;
    if (inputs != nullptr) pass.inputs = *inputs;
  }

  pass.steps.resize(steps);
  const std::size_t top = config.num_layers - 1;
  for (std::size_t t = 0; t < steps; ++t) {
    StepOutput& out = pass.steps[t];
    Tensor x;
    if (frames != nullptr) {
      if (pass.attention_mode == AttentionMode::forced_uniform) {
        out.attention =
            Tensor::filled({config.regions()}, 1.0 / static_cast<double>(config.regions()));
      } else {
        out.attention = location_softmax(state.hidden[top], params);
      }
      if (record) pass.cache[t].h_prev_top = state.hidden[top];
      x = attend(*frames, t, out.attention);
    } else {
      x = Tensor({config.feat_dim});
      for (std::size_t j = 0; j < config.feat_dim; ++j) x[j] = inputs->at(t, j);
    }
    out.pooled_input = x;
    state = lstm_step(x, state, params, pass.mode, masks,
                      record ? &pass.cache[t].layers : nullptr);
    out.class_probs = classify(state.hidden[top], params, pass.mode,
                               masks != nullptr ? &masks->classifier_input : nullptr,
                               record ? &pass.cache[t].classifier : nullptr);
  }
  pass.final_state = state;
}

}  // namespace detail

// Full forward pass over one T-frame block of the attention model. In train
// mode the pass carries every intermediate the backward pass needs; eval mode
// keeps only the per-step outputs. Eval mode never touches the rng.
inline ForwardPass forward_block(const Tensor& frames, const ModelParams& params, RunMode mode,
                                 Rng* rng = nullptr,
                                 AttentionMode attention_mode = AttentionMode::learned) {
  params.config.validate();
  if (!params.has_attention()) {
    throw ContractError("forward_block: params are for a pooled baseline; use forward_inputs");
  }
  detail::check_cube(frames, params.config);
  if (frames.extent(0) != params.config.block_len) {
    throw DataError("forward_block: block has " + std::to_string(frames.extent(0)) +
                    " frames, model expects " + std::to_string(params.config.block_len));
  }
  ForwardPass pass;
  pass.config = params.config;
  pass.kind = params.kind;
  pass.mode = mode;
  pass.attention_mode = attention_mode;
  detail::run_steps(pass, params, rng, &frames, nullptr);
  return pass;
}

inline ForwardPass forward_block(const Tensor& frames, const ModelParams& params, RunMode mode,
                                 Rng& rng, AttentionMode attention_mode = AttentionMode::learned) {
  return forward_block(frames, params, mode, &rng, attention_mode);
}

// Forward pass over precomputed per-step inputs (the pooled baselines):
// identical LSTM stack and classifier, no location softmax. The initial state
// comes from the time mean of the inputs, which for average pooling equals the
// attention model's frame-and-slice mean exactly.
inline ForwardPass forward_inputs(const Tensor& inputs, const ModelParams& params, RunMode mode,
                                  Rng* rng = nullptr) {
  params.config.validate();
  if (inputs.rank() != 2 || inputs.extent(0) != params.config.block_len ||
      inputs.extent(1) != params.config.feat_dim) {
    throw DataError("forward_inputs: inputs " + shape_str(inputs.shape()) + ", expected [" +
                    std::to_string(params.config.block_len) + "x" +
                    std::to_string(params.config.feat_dim) + "]");
  }
  ForwardPass pass;
  pass.config = params.config;
  pass.kind = params.kind;
  pass.mode = mode;
  detail::run_steps(pass, params, rng, nullptr, &inputs);
  return pass;
}

// ---------------------------------------------------------------------------
// objective plumbing over model containers
// ---------------------------------------------------------------------------

inline double weight_decay_term(const ModelParams& params, double gamma) {
  return weight_decay_term(params.tensors(), gamma);
}

inline LossBreakdown total_loss(const std::vector<Tensor>& y_hats,
                                const std::vector<Tensor>& targets,
                                const std::vector<Tensor>& ls, const ModelParams& params,
                                const LossConfig& config) {
  return total_loss(y_hats, targets, ls, params.tensors(), config);
}

// Loss of a cached forward pass against one label per step.
inline LossBreakdown block_loss(const ForwardPass& pass, const std::vector<int>& step_labels,
                                const ModelParams& params, const LossConfig& config) {
  const std::size_t steps = pass.steps.size();
  if (step_labels.size() != steps) {
    throw DataError("block_loss: " + std::to_string(step_labels.size()) + " labels for " +
                    std::to_string(steps) + " steps");
  }
  std::vector<Tensor> y_hats, targets, ls;
  for (std::size_t t = 0; t < steps; ++t) {
    const int label = step_labels[t];
    if (label < 0 || static_cast<std::size_t>(label) >= pass.config.num_classes) {
      throw DataError("block_loss: label " + std::to_string(label) + " out of range");
    }
    y_hats.push_back(pass.steps[t].class_probs);
    targets.push_back(one_hot(static_cast<std::size_t>(label), pass.config.num_classes));
    if (!pass.steps[t].attention.empty()) ls.push_back(pass.steps[t].attention);
  }
  return total_loss(y_hats, targets, ls, params, config);
}

// ---------------------------------------------------------------------------
// backward (hand-written BPTT)
// ---------------------------------------------------------------------------

struct BlockGradients {
  GradientSet grads;
  LossBreakdown loss;
};

// Reverse-mode gradients of the full objective for one cached block: per-step
// cross-entropy through the classifier, the attention path x_t -> l_t -> h_{t-1}
// (including the doubly stochastic penalty), the recurrent chain, the init
// MLPs, and weight decay. `params` must be the exact parameters the forward
// pass ran with.
inline BlockGradients backward_block(const ForwardPass& pass, const ModelParams& params,
                                     const std::vector<int>& step_labels,
                                     const LossConfig& loss_config) {
  loss_config.validate();
  if (!pass.has_cache || pass.mode != RunMode::train) {
    throw ContractError("backward_block: needs a train-mode forward cache");
  }
  if (pass.config != params.config || pass.kind != params.kind) {
    throw ContractError("backward_block: cache/params mismatch");
  }
  if (pass.attention_mode != AttentionMode::learned) {
    throw ContractError("backward_block: forced-uniform attention is not differentiable");
  }
  const ModelConfig& config = params.config;
  const std::size_t steps = config.block_len;
  const std::size_t layers = config.num_layers;
  const std::size_t d = config.hidden_dim;
  const std::size_t top = layers - 1;
  const bool attention = params.has_attention();
  if (step_labels.size() != steps) {
    throw DataError("backward_block: " + std::to_string(step_labels.size()) + " labels for " +
                    std::to_string(steps) + " steps");
  }

  BlockGradients out;
  out.grads = ModelParams::zeros(config, params.kind);
  out.loss = block_loss(pass, step_labels, params, loss_config);
  GradientSet& g = out.grads;

  // d(penalty)/dl_{t,i} = -2λ(1 - Σ_t l_{t,i}); identical across t.
  Tensor penalty_dl;
  if (attention) {
    penalty_dl = Tensor({config.regions()});
    if (loss_config.lambda > 0.0) {
      Tensor mass({config.regions()});
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t i = 0; i < mass.size(); ++i) mass[i] += pass.steps[t].attention[i];
      }
      for (std::size_t i = 0; i < mass.size(); ++i) {
        penalty_dl[i] = -2.0 * loss_config.lambda * (1.0 - mass[i]);
      }
    }
  }

  std::vector<Tensor> dh_carry(layers, Tensor({d}));
  std::vector<Tensor> dc_carry(layers, Tensor({d}));

  for (std::size_t ti = steps; ti-- > 0;) {
    const StepCache& sc = pass.cache[ti];
    const StepOutput& so = pass.steps[ti];

    // classifier: softmax + cross-entropy fuse to ŷ − y
    Tensor d_logits = so.class_probs;
    d_logits[static_cast<std::size_t>(step_labels[ti])] -= 1.0;
    Tensor d_act({d});
    affine_backward(params.cls_out.weight, sc.classifier.act, d_logits, &g.cls_out.weight,
                    &g.cls_out.bias, &d_act);
    const Tensor d_cls_pre = tanh_backward(sc.classifier.act, d_act);
    Tensor d_cls_in({d});
    affine_backward(params.cls_hidden.weight, sc.classifier.input, d_cls_pre,
                    &g.cls_hidden.weight, &g.cls_hidden.bias, &d_cls_in);

    std::vector<Tensor> dh(layers, Tensor({d}));
    for (std::size_t l = 0; l < layers; ++l) dh[l] = dh_carry[l];
    if (pass.has_masks) {
      for (std::size_t i = 0; i < d; ++i) {
        dh[top][i] += d_cls_in[i] * pass.masks.classifier_input[i];
      }
    } else {
      for (std::size_t i = 0; i < d; ++i) dh[top][i] += d_cls_in[i];
    }

    Tensor d_input_bottom;  // gradient w.r.t. the post-dropout layer-0 input
    for (std::size_t l = layers; l-- > 0;) {
      const LstmLayerCache& lc = sc.layers[l];
      const Tensor& c_prev = (ti > 0) ? pass.cache[ti - 1].layers[l].cell : pass.state0.cell[l];
      const Tensor& h_prev =
          (ti > 0) ? pass.cache[ti - 1].layers[l].hidden : pass.state0.hidden[l];

      const std::size_t in_dim = lc.input_used.size();
      Tensor dz({4 * d});
      Tensor new_dc({d});
      for (std::size_t i = 0; i < d; ++i) {
        const double i_g = lc.input_gate[i];
        const double f_g = lc.forget_gate[i];
        const double o_g = lc.output_gate[i];
        const double cand = lc.cell_cand[i];
        const double tc = lc.tanh_cell[i];
        const double dh_i = dh[l][i];
        const double d_o = dh_i * tc;
        const double d_cell = dc_carry[l][i] + dh_i * o_g * (1.0 - tc * tc);
        const double d_f = d_cell * c_prev[i];
        const double d_i = d_cell * cand;
        const double d_cand = d_cell * i_g;
        new_dc[i] = d_cell * f_g;
        dz[i] = d_i * i_g * (1.0 - i_g);
        dz[d + i] = d_f * f_g * (1.0 - f_g);
        dz[2 * d + i] = d_o * o_g * (1.0 - o_g);
        dz[3 * d + i] = d_cand * (1.0 - cand * cand);
      }
      dc_carry[l] = new_dc;

      Tensor concat({d + in_dim});
      for (std::size_t i = 0; i < d; ++i) concat[i] = h_prev[i];
      for (std::size_t i = 0; i < in_dim; ++i) concat[d + i] = lc.input_used[i];
      Tensor d_concat({d + in_dim});
      affine_backward(params.lstm[l].weight, concat, dz, &g.lstm[l].weight, &g.lstm[l].bias,
                      &d_concat);

      for (std::size_t i = 0; i < d; ++i) dh_carry[l][i] = d_concat[i];
      Tensor d_used({in_dim});
      for (std::size_t i = 0; i < in_dim; ++i) d_used[i] = d_concat[d + i];
      if (l > 0) {
        if (pass.has_masks) {
          for (std::size_t i = 0; i < in_dim; ++i) {
            dh[l - 1][i] += d_used[i] * pass.masks.layer_input[l][i];
          }
        } else {
          for (std::size_t i = 0; i < in_dim; ++i) dh[l - 1][i] += d_used[i];
        }
      } else {
        d_input_bottom = d_used;
      }
    }

    if (attention) {
      // through the mask back to x_t, then dl_t[i] = <dx_t, X_{t,i}> + penalty term
      Tensor dx = d_input_bottom;
      if (pass.has_masks) {
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= pass.masks.layer_input[0][i];
      }
      Tensor dl = penalty_dl;
      for (std::size_t i = 0; i < config.regions(); ++i) {
        const double* s = detail::slice_ptr(pass.frames, ti, i);
        double acc = 0.0;
        for (std::size_t j = 0; j < config.feat_dim; ++j) acc += dx[j] * s[j];
        dl[i] += acc;
      }
      const Tensor d_logits_attn = softmax_backward(so.attention, dl);
      Tensor d_h_prev_top({d});
      affine_backward(params.attention.weight, sc.h_prev_top, d_logits_attn,
                      &g.attention.weight, &g.attention.bias, &d_h_prev_top);
      for (std::size_t i = 0; i < d; ++i) dh_carry[top][i] += d_h_prev_top[i];
    }
  }

  // into the init MLPs: carries now hold d h_0 / d c_0 per layer
  Tensor d_h0_flat({layers * d});
  Tensor d_c0_flat({layers * d});
  for (std::size_t l = 0; l < layers; ++l) {
    for (std::size_t j = 0; j < d; ++j) {
      d_h0_flat[l * d + j] = dh_carry[l][j];
      d_c0_flat[l * d + j] = dc_carry[l][j];
    }
  }
  const std::size_t mlp_hidden = params.init_hidden.hidden.weight.extent(0);
  Tensor d_hidden_act({mlp_hidden});
  affine_backward(params.init_hidden.output.weight, pass.init.hidden_hidden_act, d_h0_flat,
                  &g.init_hidden.output.weight, &g.init_hidden.output.bias, &d_hidden_act);
  const Tensor d_hidden_pre = tanh_backward(pass.init.hidden_hidden_act, d_hidden_act);
  affine_backward(params.init_hidden.hidden.weight, pass.init.mean_input, d_hidden_pre,
                  &g.init_hidden.hidden.weight, &g.init_hidden.hidden.bias, nullptr);

  Tensor d_cell_act({mlp_hidden});
  affine_backward(params.init_cell.output.weight, pass.init.cell_hidden_act, d_c0_flat,
                  &g.init_cell.output.weight, &g.init_cell.output.bias, &d_cell_act);
  const Tensor d_cell_pre = tanh_backward(pass.init.cell_hidden_act, d_cell_act);
  affine_backward(params.init_cell.hidden.weight, pass.init.mean_input, d_cell_pre,
                  &g.init_cell.hidden.weight, &g.init_cell.hidden.bias, nullptr);

  if (loss_config.gamma > 0.0) {
    auto param_list = params.tensors();
    auto grad_list = g.tensors();
    for (std::size_t k = 0; k < param_list.size(); ++k) {
      axpy(2.0 * loss_config.gamma, *param_list[k], *grad_list[k]);
    }
  }
  return out;
}

}  // namespace glimpse
