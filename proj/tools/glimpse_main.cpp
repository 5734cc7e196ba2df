// glimpse CLI: dataset synthesis, training, evaluation, gradient checking,
// attention-map export and glimpse re-optimization over FCUB feature cubes.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 data/file error,
// 4 numeric failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "glimpse/checkpoint.hpp"
#include "glimpse/data.hpp"
#include "glimpse/pipeline.hpp"
#include "glimpse/viz.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

using KeyValues = std::vector<std::pair<std::string, std::string>>;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(bool v) { return v ? "true" : "false"; }

template <class T>
  requires std::is_integral_v<T>
std::string fmt(T v) {
  return std::to_string(v);
}

// Every command echoes its fully resolved configuration, so a run can be
// reproduced from its output directory alone.
void write_resolved_config(const std::string& out_dir, KeyValues kv) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw glimpse::IoError("cannot create " + out_dir + ": " + ec.message());
  std::sort(kv.begin(), kv.end());
  const std::string path = (std::filesystem::path(out_dir) / "resolved_config.txt").string();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw glimpse::IoError("cannot open " + path + " for writing");
  for (const auto& [key, value] : kv) out << key << '=' << value << '\n';
  if (!out) throw glimpse::IoError("write failed for " + path);
}

// Flat key=value config file applied to a subcommand's options; values given
// on the command line win. Unknown keys are rejected.
void apply_config_file(CLI::App* sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw glimpse::ConfigError("cannot open config file " + path);
  auto trim = [](const std::string& raw) {
    const auto a = raw.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    const auto b = raw.find_last_not_of(" \t\r");
    return raw.substr(a, b - a + 1);
  };
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw glimpse::ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    for (const auto& [seen, ignored] : pairs) {
      if (seen == key) {
        throw glimpse::ConfigError(path + ":" + std::to_string(line_no) + ": duplicate key '" +
                                   key + "'");
      }
    }
    pairs.emplace_back(key, value);
  }
  for (const auto& [key, value] : pairs) {
    CLI::Option* opt = nullptr;
    try {
      opt = sub->get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw glimpse::ConfigError(path + ": unknown config key '" + key + "'");
    }
    if (opt->count() > 0) continue;  // command line wins
    opt->add_result(value);
    opt->run_callback();
  }
}

void require_value(const std::string& value, const char* flag) {
  if (value.empty()) throw glimpse::ConfigError(std::string(flag) + " is required");
}

glimpse::ModelKind parse_kind(const std::string& name) {
  if (name == "attention") return glimpse::ModelKind::soft_attention;
  if (name == "avg_pool") return glimpse::ModelKind::avg_pool_lstm;
  if (name == "max_pool") return glimpse::ModelKind::max_pool_lstm;
  if (name == "softmax_regression") return glimpse::ModelKind::softmax_regression;
  throw glimpse::ConfigError("unknown mode '" + name +
                             "' (attention, avg_pool, max_pool, softmax_regression)");
}

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::string config;
  std::size_t grid = 7, feat_dim = 32, classes = 6, clip_len = 30;
  std::size_t train_clips = 120, test_clips = 60;
  double noise_sigma = 0.5, move_prob = 0.3;
  std::uint64_t seed = 1;
};

void run_synth(const SynthArgs& a) {
  glimpse::SynthConfig cfg;
  cfg.grid_side = a.grid;
  cfg.feat_dim = a.feat_dim;
  cfg.num_classes = a.classes;
  cfg.clip_len = a.clip_len;
  cfg.train_clips = a.train_clips;
  cfg.test_clips = a.test_clips;
  cfg.noise_sigma = a.noise_sigma;
  cfg.move_prob = a.move_prob;
  write_resolved_config(a.out, {{"command", "synth"},
                                {"grid", fmt(a.grid)},
                                {"feat_dim", fmt(a.feat_dim)},
                                {"classes", fmt(a.classes)},
                                {"clip_len", fmt(a.clip_len)},
                                {"train_clips", fmt(a.train_clips)},
                                {"test_clips", fmt(a.test_clips)},
                                {"noise_sigma", fmt(a.noise_sigma)},
                                {"move_prob", fmt(a.move_prob)},
                                {"seed", fmt(a.seed)}});
  glimpse::Rng rng(a.seed);
  const glimpse::SynthResult result = glimpse::synth_generate(cfg, rng);
  const std::string manifest = glimpse::write_dataset(result.data, a.out);
  std::cout << "wrote " << result.data.train.size() << " train + " << result.data.test.size()
            << " test clips, manifest at " << manifest << "\n";
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string out;
  std::string config;
  std::string mode = "attention";
  std::size_t hidden_dim = 512, layers = 3, epochs = 15, batch = 8;
  double dropout = 0.5, lambda = 0.0, gamma = 1e-5, alpha = 1e-3;
  std::size_t block_len = 30, stride = 1, fps_step = 1;
  std::uint64_t seed = 1;
};

KeyValues train_kv(const TrainArgs& a) {
  return {{"command", "train"},   {"manifest", a.manifest},
          {"mode", a.mode},       {"hidden_dim", fmt(a.hidden_dim)},
          {"layers", fmt(a.layers)}, {"epochs", fmt(a.epochs)},
          {"batch", fmt(a.batch)},   {"dropout", fmt(a.dropout)},
          {"lambda", fmt(a.lambda)}, {"gamma", fmt(a.gamma)},
          {"alpha", fmt(a.alpha)},   {"block_len", fmt(a.block_len)},
          {"stride", fmt(a.stride)}, {"fps_step", fmt(a.fps_step)},
          {"seed", fmt(a.seed)}};
}

void run_train(const TrainArgs& a) {
  glimpse::TrainConfig cfg;
  cfg.kind = parse_kind(a.mode);
  cfg.hidden_dim = a.hidden_dim;
  cfg.num_layers = a.layers;
  cfg.dropout_p = a.dropout;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.loss = {a.lambda, a.gamma};
  cfg.adam.alpha = a.alpha;
  cfg.seed = a.seed;
  cfg.block_len = a.block_len;
  cfg.stride = a.stride;
  cfg.frame_step = a.fps_step;

  write_resolved_config(a.out, train_kv(a));
  const glimpse::LoadedDataset data = glimpse::load_dataset(a.manifest);
  const glimpse::TrainResult result = glimpse::train(data, cfg);
  for (std::size_t e = 0; e < result.loss_curve.size(); ++e) {
    std::cout << "epoch " << e + 1 << " mean loss " << result.loss_curve[e] << "\n";
  }
  glimpse::write_checkpoint(join_path(a.out, "checkpoint.grnn"), result.model,
                            &result.optimizer);
  glimpse::write_loss_curve(join_path(a.out, "loss_curve.tsv"), result.loss_curve);
  std::cout << "checkpoint at " << join_path(a.out, "checkpoint.grnn") << "\n";
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string manifest;
  std::string checkpoint;
  std::string out;
  std::string config;
  std::string split = "test";
  std::size_t stride = 1, fps_step = 1;
};

void run_eval(const EvalArgs& a) {
  if (a.split != "train" && a.split != "test") {
    throw glimpse::ConfigError("eval: split must be train or test");
  }
  write_resolved_config(a.out, {{"command", "eval"},
                                {"manifest", a.manifest},
                                {"checkpoint", a.checkpoint},
                                {"split", a.split},
                                {"stride", fmt(a.stride)},
                                {"fps_step", fmt(a.fps_step)}});
  const glimpse::LoadedDataset data = glimpse::load_dataset(a.manifest);
  const glimpse::Checkpoint ckpt = glimpse::read_checkpoint(a.checkpoint);
  glimpse::EvalOptions opts;
  opts.use_train_split = a.split == "train";
  opts.stride = a.stride;
  opts.frame_step = a.fps_step;
  const glimpse::EvalReport report = glimpse::evaluate(data, ckpt.model, opts);
  glimpse::write_eval_report(join_path(a.out, "report.txt"), report, data.class_names);
  glimpse::write_scores_table(join_path(a.out, "scores.tsv"), report, data.class_names);
  std::cout << "accuracy " << report.accuracy << " mAP " << report.mean_average_precision
            << " over " << report.clip_ids.size() << " clips\n";
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
  std::string out = "gradcheck_out";
  std::string config;
  std::size_t grid = 3, feat_dim = 8, hidden_dim = 6, layers = 2, block_len = 4, classes = 3;
  double lambda = 1.0, gamma = 1e-5, eps = 1e-5, threshold = 1e-4;
  std::uint64_t seed = 1;
  std::size_t seeds = 1;
};

int run_gradcheck(const GradcheckArgs& a) {
  glimpse::ModelConfig config;
  config.grid_side = a.grid;
  config.feat_dim = a.feat_dim;
  config.hidden_dim = a.hidden_dim;
  config.num_layers = a.layers;
  config.num_classes = a.classes;
  config.block_len = a.block_len;
  config.dropout_p = 0.0;
  const glimpse::LossConfig loss{a.lambda, a.gamma};
  write_resolved_config(a.out, {{"command", "gradcheck"},
                                {"grid", fmt(a.grid)},
                                {"feat_dim", fmt(a.feat_dim)},
                                {"hidden_dim", fmt(a.hidden_dim)},
                                {"layers", fmt(a.layers)},
                                {"block_len", fmt(a.block_len)},
                                {"classes", fmt(a.classes)},
                                {"lambda", fmt(a.lambda)},
                                {"gamma", fmt(a.gamma)},
                                {"eps", fmt(a.eps)},
                                {"threshold", fmt(a.threshold)},
                                {"seed", fmt(a.seed)},
                                {"seeds", fmt(a.seeds)}});
  double worst = 0.0;
  std::string worst_tensor;
  for (std::size_t s = 0; s < a.seeds; ++s) {
    const auto result = glimpse::model_grad_check(config, loss, a.seed + s, a.eps);
    std::cout << "seed " << a.seed + s << ": max relative error " << result.max_rel_error
              << " (" << result.worst_tensor << ")\n";
    if (result.max_rel_error > worst) {
      worst = result.max_rel_error;
      worst_tensor = result.worst_tensor;
    }
  }
  std::cout << "max relative error " << worst << ", threshold " << a.threshold << "\n";
  if (worst > a.threshold) {
    std::cerr << "gradient check FAILED at " << worst_tensor << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct VizArgs {
  std::string checkpoint;
  std::string cube;
  std::string out;
  std::string config;
  std::size_t upsample = 8;
};

void run_viz(const VizArgs& a) {
  write_resolved_config(a.out, {{"command", "viz"},
                                {"checkpoint", a.checkpoint},
                                {"cube", a.cube},
                                {"upsample", fmt(a.upsample)}});
  const glimpse::Checkpoint ckpt = glimpse::read_checkpoint(a.checkpoint);
  const auto* params = std::get_if<glimpse::ModelParams>(&ckpt.model);
  if (params == nullptr || !params->has_attention()) {
    throw glimpse::ConfigError("viz: checkpoint does not hold an attention model");
  }
  const glimpse::FeatureCubeClip clip = glimpse::read_cube(a.cube);
  glimpse::viz_attention(*params, clip, a.out, a.upsample);
  std::cout << "wrote heatmaps to " << a.out << "\n";
}

// ---------------------------------------------------------------------------

struct ReglimpseArgs {
  std::string checkpoint;
  std::string cube;
  std::string out;
  std::string config;
  std::size_t steps = 100;
  double lr = 0.05, lambda = 0.0, gamma = 0.0;
  bool reinit = false;
  int target = -1;
  std::uint64_t seed = 1;
  std::size_t upsample = 8;
};

glimpse::Tensor clip_scores(const glimpse::ModelParams& params,
                            const glimpse::FeatureCubeClip& clip) {
  const auto blocks = glimpse::split_into_blocks(clip, params.config.block_len, 1, 1);
  glimpse::Tensor scores({params.config.num_classes});
  for (const auto& block : blocks) {
    const auto pass = glimpse::forward_block(block.frames, params, glimpse::RunMode::eval);
    for (const auto& step : pass.steps) glimpse::axpy(1.0, step.class_probs, scores);
  }
  const double n = static_cast<double>(blocks.size() * params.config.block_len);
  for (std::size_t c = 0; c < scores.size(); ++c) scores[c] /= n;
  return scores;
}

void run_reglimpse(const ReglimpseArgs& a) {
  write_resolved_config(a.out, {{"command", "reglimpse"},
                                {"checkpoint", a.checkpoint},
                                {"cube", a.cube},
                                {"steps", fmt(a.steps)},
                                {"lr", fmt(a.lr)},
                                {"lambda", fmt(a.lambda)},
                                {"gamma", fmt(a.gamma)},
                                {"reinit", fmt(a.reinit)},
                                {"target", fmt(a.target)},
                                {"seed", fmt(a.seed)},
                                {"upsample", fmt(a.upsample)}});
  const glimpse::Checkpoint ckpt = glimpse::read_checkpoint(a.checkpoint);
  const auto* params = std::get_if<glimpse::ModelParams>(&ckpt.model);
  if (params == nullptr || !params->has_attention()) {
    throw glimpse::ConfigError("reglimpse: checkpoint does not hold an attention model");
  }
  const glimpse::FeatureCubeClip clip = glimpse::read_cube(a.cube);
  glimpse::Rng rng(a.seed);
  const glimpse::LossConfig loss{a.lambda, a.gamma};
  const auto before = clip_scores(*params, clip);
  const auto result =
      glimpse::reoptimize_glimpse(*params, clip, a.steps, a.lr, a.reinit, loss, rng, a.target);
  const auto after = clip_scores(result.params, clip);
  char name[64];
  for (std::size_t b = 0; b < result.attention_before.size(); ++b) {
    for (std::size_t t = 0; t < result.attention_before[b].size(); ++t) {
      std::snprintf(name, sizeof name, "before_b%03zu_t%03zu", b, t);
      glimpse::write_attention_map(join_path(a.out, name), result.attention_before[b][t],
                                   params->config.grid_side, a.upsample);
      std::snprintf(name, sizeof name, "after_b%03zu_t%03zu", b, t);
      glimpse::write_attention_map(join_path(a.out, name), result.attention_after[b][t],
                                   params->config.grid_side, a.upsample);
    }
  }
  glimpse::write_loss_curve(join_path(a.out, "loss_curve.tsv"), result.loss_curve);
  glimpse::write_checkpoint(join_path(a.out, "reoptimized.grnn"), glimpse::AnyModel(result.params));
  std::cout << "loss " << result.loss_before << " -> " << result.loss_after << "\n";
  std::cout << "prediction " << glimpse::argmax_lowest(before.data(), before.size()) << " -> "
            << glimpse::argmax_lowest(after.data(), after.size()) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"glimpse: recurrent soft-attention action classifier over feature cubes"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic feature-cube dataset");
  synth->add_option("--config", synth_args.config,
                    "Flat key=value file; command-line flags override");
  synth->add_option("--out", synth_args.out, "Output directory");
  synth->add_option("--grid", synth_args.grid, "Grid side K")->capture_default_str();
  synth->add_option("--feat-dim", synth_args.feat_dim, "Slice dimensionality D")->capture_default_str();
  synth->add_option("--classes", synth_args.classes, "Number of classes")->capture_default_str();
  synth->add_option("--clip-len", synth_args.clip_len, "Frames per clip")->capture_default_str();
  synth->add_option("--train-clips", synth_args.train_clips, "Training clips")->capture_default_str();
  synth->add_option("--test-clips", synth_args.test_clips, "Test clips")->capture_default_str();
  synth->add_option("--noise-sigma", synth_args.noise_sigma, "Background noise scale")->capture_default_str();
  synth->add_option("--move-prob", synth_args.move_prob, "Walk step probability")->capture_default_str();
  synth->add_option("--seed", synth_args.seed, "Random seed")->capture_default_str();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train a model on an FCUB dataset");
  train->add_option("--config", train_args.config,
                    "Flat key=value file; command-line flags override");
  train->add_option("--manifest", train_args.manifest, "Dataset manifest");
  train->add_option("--out", train_args.out, "Output directory");
  train->add_option("--mode", train_args.mode,
                    "attention | avg_pool | max_pool | softmax_regression")
      ->capture_default_str();
  train->add_option("--hidden-dim", train_args.hidden_dim, "LSTM hidden width d")->capture_default_str();
  train->add_option("--layers", train_args.layers, "LSTM layers")->capture_default_str();
  train->add_option("--dropout", train_args.dropout, "Non-recurrent dropout p")->capture_default_str();
  train->add_option("--epochs", train_args.epochs, "Training epochs")->capture_default_str();
  train->add_option("--batch", train_args.batch, "Minibatch size (blocks)")->capture_default_str();
  train->add_option("--lambda", train_args.lambda, "Attention penalty coefficient")->capture_default_str();
  train->add_option("--gamma", train_args.gamma, "Weight decay coefficient")->capture_default_str();
  train->add_option("--alpha", train_args.alpha, "Adam step size")->capture_default_str();
  train->add_option("--block-len", train_args.block_len, "Frames per block")->capture_default_str();
  train->add_option("--stride", train_args.stride, "Block stride")->capture_default_str();
  train->add_option("--fps-step", train_args.fps_step, "Frame subsampling step")->capture_default_str();
  train->add_option("--seed", train_args.seed, "Random seed")->capture_default_str();

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  eval->add_option("--config", eval_args.config,
                   "Flat key=value file; command-line flags override");
  eval->add_option("--manifest", eval_args.manifest, "Dataset manifest");
  eval->add_option("--checkpoint", eval_args.checkpoint, "GRNN checkpoint");
  eval->add_option("--out", eval_args.out, "Output directory");
  eval->add_option("--split", eval_args.split, "train | test")->capture_default_str();
  eval->add_option("--stride", eval_args.stride, "Block stride")->capture_default_str();
  eval->add_option("--fps-step", eval_args.fps_step, "Frame subsampling step")->capture_default_str();

  GradcheckArgs gc_args;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "Finite-difference check of the full BPTT gradient");
  gradcheck->add_option("--config", gc_args.config,
                        "Flat key=value file; command-line flags override");
  gradcheck->add_option("--out", gc_args.out, "Output directory")->capture_default_str();
  gradcheck->add_option("--grid", gc_args.grid, "Grid side K")->capture_default_str();
  gradcheck->add_option("--feat-dim", gc_args.feat_dim, "Slice dimensionality D")->capture_default_str();
  gradcheck->add_option("--hidden-dim", gc_args.hidden_dim, "LSTM hidden width d")->capture_default_str();
  gradcheck->add_option("--layers", gc_args.layers, "LSTM layers")->capture_default_str();
  gradcheck->add_option("--block-len", gc_args.block_len, "Frames per block")->capture_default_str();
  gradcheck->add_option("--classes", gc_args.classes, "Number of classes")->capture_default_str();
  gradcheck->add_option("--lambda", gc_args.lambda, "Attention penalty coefficient")->capture_default_str();
  gradcheck->add_option("--gamma", gc_args.gamma, "Weight decay coefficient")->capture_default_str();
  gradcheck->add_option("--eps", gc_args.eps, "Central-difference step")->capture_default_str();
  gradcheck->add_option("--threshold", gc_args.threshold, "Failure threshold")->capture_default_str();
  gradcheck->add_option("--seed", gc_args.seed, "First random seed")->capture_default_str();
  gradcheck->add_option("--seeds", gc_args.seeds, "Number of seeds")->capture_default_str();

  VizArgs viz_args;
  CLI::App* viz = app.add_subcommand("viz", "Export per-step attention heatmaps");
  viz->add_option("--config", viz_args.config,
                  "Flat key=value file; command-line flags override");
  viz->add_option("--checkpoint", viz_args.checkpoint, "GRNN checkpoint");
  viz->add_option("--cube", viz_args.cube, "FCUB clip file");
  viz->add_option("--out", viz_args.out, "Output directory");
  viz->add_option("--upsample", viz_args.upsample, "Bilinear upsampling factor")->capture_default_str();

  ReglimpseArgs rg_args;
  CLI::App* reglimpse = app.add_subcommand(
      "reglimpse", "Re-optimize only the location-softmax weights on one clip");
  reglimpse->add_option("--config", rg_args.config,
                        "Flat key=value file; command-line flags override");
  reglimpse->add_option("--checkpoint", rg_args.checkpoint, "GRNN checkpoint");
  reglimpse->add_option("--cube", rg_args.cube, "FCUB clip file");
  reglimpse->add_option("--out", rg_args.out, "Output directory");
  reglimpse->add_option("--steps", rg_args.steps, "Adam steps")->capture_default_str();
  reglimpse->add_option("--lr", rg_args.lr, "Adam step size")->capture_default_str();
  reglimpse->add_option("--lambda", rg_args.lambda, "Attention penalty coefficient")->capture_default_str();
  reglimpse->add_option("--gamma", rg_args.gamma, "Weight decay coefficient")->capture_default_str();
  reglimpse->add_flag("--reinit", rg_args.reinit,
                      "Re-draw attention weights uniformly between the originals' min and max");
  reglimpse->add_option("--target", rg_args.target, "Target class (default: clip label)")->capture_default_str();
  reglimpse->add_option("--seed", rg_args.seed, "Random seed")->capture_default_str();
  reglimpse->add_option("--upsample", rg_args.upsample, "Heatmap upsampling factor")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    std::cerr << app.help() << "\n";
    return kExitConfig;
  }

  try {
    if (app.got_subcommand(synth)) {
      if (!synth_args.config.empty()) apply_config_file(synth, synth_args.config);
      require_value(synth_args.out, "--out");
      run_synth(synth_args);
    } else if (app.got_subcommand(train)) {
      if (!train_args.config.empty()) apply_config_file(train, train_args.config);
      require_value(train_args.manifest, "--manifest");
      require_value(train_args.out, "--out");
      run_train(train_args);
    } else if (app.got_subcommand(eval)) {
      if (!eval_args.config.empty()) apply_config_file(eval, eval_args.config);
      require_value(eval_args.manifest, "--manifest");
      require_value(eval_args.checkpoint, "--checkpoint");
      require_value(eval_args.out, "--out");
      run_eval(eval_args);
    } else if (app.got_subcommand(gradcheck)) {
      if (!gc_args.config.empty()) apply_config_file(gradcheck, gc_args.config);
      return run_gradcheck(gc_args);
    } else if (app.got_subcommand(viz)) {
      if (!viz_args.config.empty()) apply_config_file(viz, viz_args.config);
      require_value(viz_args.checkpoint, "--checkpoint");
      require_value(viz_args.cube, "--cube");
      require_value(viz_args.out, "--out");
      run_viz(viz_args);
    } else if (app.got_subcommand(reglimpse)) {
      if (!rg_args.config.empty()) apply_config_file(reglimpse, rg_args.config);
      require_value(rg_args.checkpoint, "--checkpoint");
      require_value(rg_args.cube, "--cube");
      require_value(rg_args.out, "--out");
      run_reglimpse(rg_args);
    }
  } catch (const glimpse::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const glimpse::ContractError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const glimpse::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const glimpse::Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
