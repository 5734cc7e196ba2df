#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "glimpse/adam.hpp"
#include "glimpse/checkpoint.hpp"
#include "glimpse/data.hpp"
#include "glimpse/grad_check.hpp"
#include "glimpse/model.hpp"
#include "glimpse/objective.hpp"

namespace glimpse {

// ---------------------------------------------------------------------------
// softmax-regression forward/backward (the non-recurrent baseline)
// ---------------------------------------------------------------------------

// Per-step class distribution from the flattened K²·D feature cube.
inline std::vector<Tensor> softmax_regression_forward(const Tensor& frames,
                                                      const SoftmaxRegressionParams& params) {
  const ModelConfig& config = params.config;
  if (frames.rank() != 4 || frames.extent(1) != config.grid_side ||
      frames.extent(2) != config.grid_side || frames.extent(3) != config.feat_dim) {
    throw DataError("softmax_regression: block " + shape_str(frames.shape()) +
                    " does not match the model config");
  }
  const std::size_t steps = frames.extent(0);
  const std::size_t flat = config.regions() * config.feat_dim;
  std::vector<Tensor> probs;
  probs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor x({flat});
    const double* src = frames.data() + t * flat;
    std::copy(src, src + flat, x.data());
    probs.push_back(softmax(params.map.apply(x)));
  }
  return probs;
}

inline LossBreakdown softmax_regression_backward(const Tensor& frames,
                                                 const std::vector<Tensor>& probs,
                                                 const std::vector<int>& step_labels,
                                                 const SoftmaxRegressionParams& params,
                                                 const LossConfig& loss_config,
                                                 SoftmaxRegressionParams& grads) {
  const std::size_t steps = probs.size();
  if (step_labels.size() != steps) {
    throw DataError("softmax_regression_backward: label/step count mismatch");
  }
  const std::size_t flat = params.config.regions() * params.config.feat_dim;
  LossBreakdown loss;
  for (std::size_t t = 0; t < steps; ++t) {
    const int label = step_labels[t];
    if (label < 0 || static_cast<std::size_t>(label) >= params.config.num_classes) {
      throw DataError("softmax_regression_backward: label out of range");
    }
    loss.cross_entropy -=
        std::log(std::max(probs[t][static_cast<std::size_t>(label)], kLogClamp));
    Tensor x({flat});
    const double* src = frames.data() + t * flat;
    std::copy(src, src + flat, x.data());
    Tensor d_logits = probs[t];
    d_logits[static_cast<std::size_t>(label)] -= 1.0;
    affine_backward(params.map.weight, x, d_logits, &grads.map.weight, &grads.map.bias, nullptr);
  }
  loss.weight_decay = weight_decay_term(params.tensors(), loss_config.gamma);
  if (loss_config.gamma > 0.0) {
    axpy(2.0 * loss_config.gamma, params.map.weight, grads.map.weight);
    axpy(2.0 * loss_config.gamma, params.map.bias, grads.map.bias);
  }
  loss.total = loss.cross_entropy + loss.weight_decay;
  return loss;
}

// Per-step predictions of a baseline model on one block. `requested` must name
// the kind the parameters were built for.
inline std::vector<Tensor> run_baseline_forward(const Tensor& frames, const AnyModel& model,
                                                ModelKind requested, RunMode mode) {
  if (model_kind(model) != requested) {
    throw ContractError(std::string("run_baseline_forward: params are for ") +
                        model_kind_name(model_kind(model)) + ", requested " +
                        model_kind_name(requested));
  }
  switch (requested) {
    case ModelKind::avg_pool_lstm:
    case ModelKind::max_pool_lstm: {
      const auto& params = std::get<ModelParams>(model);
      const PoolMode pool =
          requested == ModelKind::avg_pool_lstm ? PoolMode::average : PoolMode::max;
      const ForwardPass pass = forward_inputs(pool_block(frames, pool), params, mode);
      std::vector<Tensor> probs;
      for (const StepOutput& s : pass.steps) probs.push_back(s.class_probs);
      return probs;
    }
    case ModelKind::softmax_regression:
      return softmax_regression_forward(frames, std::get<SoftmaxRegressionParams>(model));
    case ModelKind::soft_attention:
      throw ContractError("run_baseline_forward: the attention model is not a baseline");
  }
  throw ContractError("run_baseline_forward: unknown kind");
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

struct TrainConfig {
  ModelKind kind = ModelKind::soft_attention;
  std::size_t hidden_dim = 512;
  std::size_t num_layers = 3;
  double dropout_p = 0.5;
  std::size_t epochs = 15;
  std::size_t batch_size = 8;
  LossConfig loss{0.0, 1e-5};
  AdamConfig adam;
  std::uint64_t seed = 1;
  std::size_t block_len = 30;
  std::size_t stride = 1;
  std::size_t frame_step = 1;

  void validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (hidden_dim < 1 || num_layers < 1) throw ConfigError("train: model dims must be >= 1");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("train: dropout_p in [0,1)");
    loss.validate();
  }
};

struct TrainResult {
  AnyModel model;
  AdamState optimizer;
  std::vector<double> loss_curve;  // per-epoch mean of per-block total losses
};

namespace detail {

inline ModelConfig infer_model_config(const LoadedDataset& data, const TrainConfig& cfg) {
  if (data.train.empty()) throw ConfigError("train: empty training split");
  if (data.num_classes() < 2) throw ConfigError("train: need at least two classes");
  const FeatureCubeClip& first = data.train.front();
  ModelConfig mc;
  mc.grid_side = first.grid_side();
  mc.feat_dim = first.feat_dim();
  mc.hidden_dim = cfg.hidden_dim;
  mc.num_layers = cfg.num_layers;
  mc.num_classes = data.num_classes();
  mc.block_len = cfg.block_len;
  mc.dropout_p = cfg.dropout_p;
  mc.validate();
  auto check = [&](const std::vector<FeatureCubeClip>& clips) {
    for (const auto& clip : clips) {
      if (clip.grid_side() != mc.grid_side || clip.feat_dim() != mc.feat_dim) {
        throw DataError("train: clip " + clip.clip_id + " has cube shape " +
                        shape_str(clip.frames.shape()) + ", inconsistent with the dataset");
      }
      for (int label : clip.labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= mc.num_classes) {
          throw DataError("train: clip " + clip.clip_id + " has out-of-range label " +
                          std::to_string(label));
        }
      }
    }
  };
  check(data.train);
  check(data.test);
  return mc;
}

// Multi-label clips are expanded into one single-label sample per label; the
// block label is replicated at every time step.
struct TrainSample {
  std::size_t block = 0;
  int label = 0;
};

inline std::pair<std::vector<Block>, std::vector<TrainSample>> build_train_samples(
    const LoadedDataset& data, const TrainConfig& cfg) {
  std::vector<Block> blocks;
  std::vector<TrainSample> samples;
  for (const FeatureCubeClip& clip : data.train) {
    for (Block& b : split_into_blocks(clip, cfg.block_len, cfg.stride, cfg.frame_step)) {
      const std::size_t index = blocks.size();
      for (int label : b.labels) samples.push_back({index, label});
      blocks.push_back(std::move(b));
    }
  }
  return {std::move(blocks), std::move(samples)};
}

}  // namespace detail

// Shuffled minibatch training: forward (train mode) -> total loss averaged over
// the minibatch's blocks -> BPTT -> Adam. Deterministic given the seed.
inline TrainResult train(const LoadedDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  const ModelConfig mc = detail::infer_model_config(data, cfg);
  auto [blocks, samples] = detail::build_train_samples(data, cfg);

  Rng rng(cfg.seed);
  const bool recurrent = cfg.kind != ModelKind::softmax_regression;
  AnyModel model = recurrent ? AnyModel(ModelParams::init(mc, cfg.kind, rng))
                             : AnyModel(SoftmaxRegressionParams::init(mc, rng));
  AdamState opt = AdamState::init_like(model_tensors(std::as_const(model)), cfg.adam);

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<double> curve;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      AnyModel grads = recurrent
                           ? AnyModel(ModelParams::zeros(mc, cfg.kind))
                           : AnyModel(SoftmaxRegressionParams::zeros(mc));
      for (std::size_t s = start; s < end; ++s) {
        const detail::TrainSample& sample = samples[order[s]];
        const Block& block = blocks[sample.block];
        const std::vector<int> step_labels(mc.block_len, sample.label);
        if (recurrent) {
          auto& params = std::get<ModelParams>(model);
          ForwardPass pass;
          if (cfg.kind == ModelKind::soft_attention) {
            pass = forward_block(block.frames, params, RunMode::train, rng);
          } else {
            const PoolMode pool =
                cfg.kind == ModelKind::avg_pool_lstm ? PoolMode::average : PoolMode::max;
            pass = forward_inputs(pool_block(block.frames, pool), params, RunMode::train, &rng);
          }
          BlockGradients bg = backward_block(pass, params, step_labels, cfg.loss);
          epoch_loss += bg.loss.total;
          auto src = bg.grads.tensors();
          auto dst = std::get<ModelParams>(grads).tensors();
          for (std::size_t k = 0; k < src.size(); ++k) axpy(1.0, *src[k], *dst[k]);
        } else {
          auto& params = std::get<SoftmaxRegressionParams>(model);
          const auto probs = softmax_regression_forward(block.frames, params);
          const LossBreakdown loss = softmax_regression_backward(
              block.frames, probs, step_labels, params, cfg.loss,
              std::get<SoftmaxRegressionParams>(grads));
          epoch_loss += loss.total;
        }
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (Tensor* g : model_tensors(grads)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] *= inv;
      }
      adam_step(model_tensors(model), model_tensors(std::as_const(grads)), opt);
    }
    curve.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return {std::move(model), std::move(opt), std::move(curve)};
}

// ---------------------------------------------------------------------------
// evaluation protocol
// ---------------------------------------------------------------------------

// Lowest index wins ties.
inline std::size_t argmax_lowest(const double* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

// AP = Σ_k precision@k · rel(k) / n_positives over the descending-score ranking;
// ties break by ascending item index. NaN when the class has no positives.
inline double average_precision(const std::vector<double>& scores,
                                const std::vector<bool>& relevant) {
  if (scores.size() != relevant.size()) {
    throw DimensionError("average_precision: score/relevance size mismatch");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t positives = 0;
  for (bool r : relevant) positives += r ? 1 : 0;
  if (positives == 0) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (relevant[order[k]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  return sum / static_cast<double>(positives);
}

struct EvalOptions {
  bool use_train_split = false;
  std::size_t stride = 1;
  std::size_t frame_step = 1;
};

struct EvalReport {
  std::vector<std::string> clip_ids;
  std::vector<std::vector<int>> clip_labels;
  Tensor scores;  // [n_clips x C]; per clip the mean over blocks of per-block
                  // mean step predictions
  double accuracy = 0.0;
  std::vector<double> per_class_ap;  // NaN where a class has no positives
  double mean_average_precision = 0.0;
  std::size_t blocks_evaluated = 0;
  Tensor attention_mass;  // [K²] mean over blocks of Σ_t l_{t,i}; attention models only
  double mean_step_entropy = std::numeric_limits<double>::quiet_NaN();
};

// Evaluation protocol: average the per-step predictions within each block,
// then average block scores per clip; accuracy counts clips whose argmax is in
// the label set, mAP averages per-class AP of the clip ranking.
inline EvalReport evaluate(const LoadedDataset& data, const AnyModel& model,
                           const EvalOptions& opts = {}) {
  const std::vector<FeatureCubeClip>& clips = opts.use_train_split ? data.train : data.test;
  if (clips.empty()) throw DataError("evaluate: evaluation split is empty");
  const ModelConfig& config = model_config(model);
  if (data.num_classes() != config.num_classes) {
    throw DataError("evaluate: dataset has " + std::to_string(data.num_classes()) +
                    " classes, model expects " + std::to_string(config.num_classes));
  }
  const ModelKind kind = model_kind(model);
  const bool attention = kind == ModelKind::soft_attention;

  EvalReport report;
  report.scores = Tensor({clips.size(), config.num_classes});
  if (attention) report.attention_mass = Tensor({config.regions()});
  double entropy_sum = 0.0;
  std::size_t entropy_steps = 0;

  for (std::size_t ci = 0; ci < clips.size(); ++ci) {
    const FeatureCubeClip& clip = clips[ci];
    report.clip_ids.push_back(clip.clip_id);
    report.clip_labels.push_back(clip.labels);
    const auto blocks = split_into_blocks(clip, config.block_len, opts.stride, opts.frame_step);
    Tensor clip_score({config.num_classes});
    for (const Block& block : blocks) {
      std::vector<Tensor> probs;
      if (attention) {
        const ForwardPass pass =
            forward_block(block.frames, std::get<ModelParams>(model), RunMode::eval);
        for (const StepOutput& s : pass.steps) probs.push_back(s.class_probs);
        for (const StepOutput& s : pass.steps) {
          for (std::size_t i = 0; i < config.regions(); ++i) {
            report.attention_mass[i] += s.attention[i];
          }
          double h = 0.0;
          for (std::size_t i = 0; i < config.regions(); ++i) {
            const double p = s.attention[i];
            if (p > 0.0) h -= p * std::log(p);
          }
          entropy_sum += h;
          ++entropy_steps;
        }
      } else {
        probs = run_baseline_forward(block.frames, model, kind, RunMode::eval);
      }
      Tensor block_score({config.num_classes});
      for (const Tensor& p : probs) axpy(1.0, p, block_score);
      for (std::size_t c = 0; c < config.num_classes; ++c) {
        block_score[c] /= static_cast<double>(probs.size());
      }
      axpy(1.0, block_score, clip_score);
      ++report.blocks_evaluated;
    }
    for (std::size_t c = 0; c < config.num_classes; ++c) {
      report.scores.at(ci, c) = clip_score[c] / static_cast<double>(blocks.size());
    }
  }

  std::size_t correct = 0;
  for (std::size_t ci = 0; ci < clips.size(); ++ci) {
    const std::size_t pick = argmax_lowest(report.scores.data() + ci * config.num_classes,
                                           config.num_classes);
    const auto& labels = report.clip_labels[ci];
    if (std::find(labels.begin(), labels.end(), static_cast<int>(pick)) != labels.end()) {
      ++correct;
    }
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(clips.size());

  double ap_sum = 0.0;
  std::size_t ap_defined = 0;
  for (std::size_t c = 0; c < config.num_classes; ++c) {
    std::vector<double> class_scores(clips.size());
    std::vector<bool> relevant(clips.size());
    for (std::size_t ci = 0; ci < clips.size(); ++ci) {
      class_scores[ci] = report.scores.at(ci, c);
      const auto& labels = report.clip_labels[ci];
      relevant[ci] =
          std::find(labels.begin(), labels.end(), static_cast<int>(c)) != labels.end();
    }
    const double ap = average_precision(class_scores, relevant);
    report.per_class_ap.push_back(ap);
    if (!std::isnan(ap)) {
      ap_sum += ap;
      ++ap_defined;
    }
  }
  report.mean_average_precision =
      ap_defined > 0 ? ap_sum / static_cast<double>(ap_defined)
                     : std::numeric_limits<double>::quiet_NaN();
  if (attention && report.blocks_evaluated > 0) {
    for (std::size_t i = 0; i < config.regions(); ++i) {
      report.attention_mass[i] /= static_cast<double>(report.blocks_evaluated);
    }
    report.mean_step_entropy = entropy_sum / static_cast<double>(entropy_steps);
  }
  return report;
}

// ---------------------------------------------------------------------------
// glimpse re-optimization
// ---------------------------------------------------------------------------

inline void zero_non_attention(GradientSet& grads) {
  for (auto& [name, ct] : grads.named_tensors()) {
    if (name.rfind("attention.", 0) == 0) continue;
    const_cast<Tensor*>(ct)->fill(0.0);
  }
}

inline double max_abs_non_attention(const GradientSet& grads) {
  double worst = 0.0;
  for (const auto& [name, t] : grads.named_tensors()) {
    if (name.rfind("attention.", 0) == 0) continue;
    for (std::size_t i = 0; i < t->size(); ++i) worst = std::max(worst, std::fabs((*t)[i]));
  }
  return worst;
}

struct GlimpseResult {
  ModelParams params;
  double loss_before = 0.0;
  double loss_after = 0.0;
  std::vector<double> loss_curve;  // mean block loss at each optimization step
  std::vector<std::vector<Tensor>> attention_before;  // [block][step] K² maps
  std::vector<std::vector<Tensor>> attention_after;
};

// Fits only the location-softmax weights to one clip, everything else frozen
// (their gradients are zeroed and asserted zero before each update). When
// `reinit_attention` is set, the attention weights first get re-drawn uniformly
// between the minimum and maximum of the original attention parameters.
inline GlimpseResult reoptimize_glimpse(const ModelParams& params, const FeatureCubeClip& clip,
                                        std::size_t steps, double lr, bool reinit_attention,
                                        const LossConfig& loss_config, Rng& rng,
                                        int target_label = -1) {
  if (!params.has_attention()) {
    throw ContractError("reoptimize_glimpse: params have no attention weights");
  }
  loss_config.validate();
  const ModelConfig& config = params.config;
  int label = target_label >= 0 ? target_label : clip.labels.at(0);
  if (label < 0 || static_cast<std::size_t>(label) >= config.num_classes) {
    throw DataError("reoptimize_glimpse: label " + std::to_string(label) + " out of range");
  }
  const auto blocks = split_into_blocks(clip, config.block_len, 1, 1);
  const std::vector<int> step_labels(config.block_len, label);

  GlimpseResult result;
  result.params = params;

  auto collect_maps = [&](const ModelParams& p) {
    std::vector<std::vector<Tensor>> maps;
    for (const Block& block : blocks) {
      const ForwardPass pass = forward_block(block.frames, p, RunMode::eval);
      std::vector<Tensor> per_step;
      for (const StepOutput& s : pass.steps) per_step.push_back(s.attention);
      maps.push_back(std::move(per_step));
    }
    return maps;
  };
  auto clip_loss = [&](const ModelParams& p) {
    double total = 0.0;
    for (const Block& block : blocks) {
      const ForwardPass pass = forward_block(block.frames, p, RunMode::eval);
      std::vector<Tensor> y_hats, targets, ls;
      for (const StepOutput& s : pass.steps) {
        y_hats.push_back(s.class_probs);
        targets.push_back(one_hot(static_cast<std::size_t>(label), config.num_classes));
        ls.push_back(s.attention);
      }
      total += total_loss(y_hats, targets, ls, p, loss_config).total;
    }
    return total / static_cast<double>(blocks.size());
  };

  result.attention_before = collect_maps(params);
  result.loss_before = clip_loss(params);

  if (reinit_attention) {
    double lo = result.params.attention.weight[0];
    double hi = lo;
    for (const Tensor* t : {&result.params.attention.weight, &result.params.attention.bias}) {
      for (std::size_t i = 0; i < t->size(); ++i) {
        lo = std::min(lo, (*t)[i]);
        hi = std::max(hi, (*t)[i]);
      }
    }
    for (Tensor* t : {&result.params.attention.weight, &result.params.attention.bias}) {
      for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] = rng.uniform(lo, hi);
    }
  }

  AdamConfig adam_cfg;
  adam_cfg.alpha = lr;
  AdamState opt = AdamState::init_like(std::as_const(result.params).tensors(), adam_cfg);
  for (std::size_t step = 0; step < steps; ++step) {
    GradientSet grads = ModelParams::zeros(config, params.kind);
    double loss_sum = 0.0;
    for (const Block& block : blocks) {
      ForwardPass pass = forward_block(block.frames, result.params, RunMode::train, rng);
      BlockGradients bg = backward_block(pass, result.params, step_labels, loss_config);
      loss_sum += bg.loss.total;
      auto src = bg.grads.tensors();
      auto dst = grads.tensors();
      for (std::size_t k = 0; k < src.size(); ++k) axpy(1.0, *src[k], *dst[k]);
    }
    const double inv = 1.0 / static_cast<double>(blocks.size());
    for (Tensor* g : grads.tensors()) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] *= inv;
    }
    zero_non_attention(grads);
    if (max_abs_non_attention(grads) != 0.0) {
      throw NumericError("reoptimize_glimpse: frozen parameter received gradient");
    }
    adam_step(result.params.tensors(), std::as_const(grads).tensors(), opt);
    result.loss_curve.push_back(loss_sum * inv);
  }

  result.attention_after = collect_maps(result.params);
  result.loss_after = clip_loss(result.params);
  return result;
}

// ---------------------------------------------------------------------------
// full-model gradient check
// ---------------------------------------------------------------------------

struct ModelGradCheck {
  double max_rel_error = 0.0;
  std::string worst_tensor;
};

// Central-difference check of the complete BPTT gradient on a random model and
// block. Requires dropout off so the objective is deterministic.
inline ModelGradCheck model_grad_check(const ModelConfig& config, const LossConfig& loss_config,
                                       std::uint64_t seed, double eps) {
  if (config.dropout_p != 0.0) {
    throw ConfigError("model_grad_check: requires dropout_p = 0");
  }
  Rng rng(seed);
  const ModelParams params = ModelParams::init(config, ModelKind::soft_attention, rng);
  Tensor frames({config.block_len, config.grid_side, config.grid_side, config.feat_dim});
  for (std::size_t i = 0; i < frames.size(); ++i) frames[i] = rng.normal();
  const int label = static_cast<int>(rng.uniform_index(config.num_classes));
  const std::vector<int> step_labels(config.block_len, label);

  const ForwardPass pass = forward_block(frames, params, RunMode::train);
  const BlockGradients analytic = backward_block(pass, params, step_labels, loss_config);

  ModelParams scratch = params;
  auto scratch_tensors = scratch.tensors();
  auto analytic_tensors = analytic.grads.tensors();
  const auto names = params.named_tensors();

  ModelGradCheck result;
  for (std::size_t k = 0; k < scratch_tensors.size(); ++k) {
    const Tensor original = *scratch_tensors[k];
    auto f = [&](const Tensor& candidate) {
      *scratch_tensors[k] = candidate;
      const ForwardPass p = forward_block(frames, scratch, RunMode::train);
      return block_loss(p, step_labels, scratch, loss_config).total;
    };
    const double err = grad_check(f, original, *analytic_tensors[k], eps);
    *scratch_tensors[k] = original;
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_tensor = names[k].first;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// report files
// ---------------------------------------------------------------------------

inline void write_loss_curve(const std::string& path, const std::vector<double>& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  char buf[64];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\n", i + 1, curve[i]);
    out << buf;
  }
  if (!out) throw IoError("write failed for " + path);
}

inline void write_scores_table(const std::string& path, const EvalReport& report,
                               const std::vector<std::string>& class_names) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "clip_id\tlabels";
  for (const auto& name : class_names) out << '\t' << name;
  out << '\n';
  char buf[64];
  for (std::size_t ci = 0; ci < report.clip_ids.size(); ++ci) {
    out << report.clip_ids[ci] << '\t';
    const auto& labels = report.clip_labels[ci];
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (j) out << ',';
      out << labels[j];
    }
    for (std::size_t c = 0; c < class_names.size(); ++c) {
      std::snprintf(buf, sizeof buf, "\t%.17g", report.scores.at(ci, c));
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

inline void write_eval_report(const std::string& path, const EvalReport& report,
                              const std::vector<std::string>& class_names) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  std::time_t now = std::time(nullptr);
  char stamp[64] = "unknown";
  if (std::tm* tm = std::gmtime(&now)) std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", tm);
  out << "# evaluation report\n# generated: " << stamp << '\n';
  out << "clips\t" << report.clip_ids.size() << '\n';
  out << "blocks\t" << report.blocks_evaluated << '\n';
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", report.accuracy);
  out << "accuracy\t" << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.6f", report.mean_average_precision);
  out << "mAP\t" << buf << '\n';
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    std::snprintf(buf, sizeof buf, "%.6f", report.per_class_ap[c]);
    out << "AP[" << class_names[c] << "]\t" << buf << '\n';
  }
  if (!report.attention_mass.empty()) {
    out << "attention_mass(sum over steps, mean over blocks)";
    for (std::size_t i = 0; i < report.attention_mass.size(); ++i) {
      std::snprintf(buf, sizeof buf, "\t%.6f", report.attention_mass[i]);
      out << buf;
    }
    out << '\n';
    std::snprintf(buf, sizeof buf, "%.6f", report.mean_step_entropy);
    out << "mean_step_entropy\t" << buf << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace glimpse
