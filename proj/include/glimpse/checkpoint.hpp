#pragma once

#include <cstdint>
#include <cstring>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "glimpse/adam.hpp"
#include "glimpse/bytes.hpp"
#include "glimpse/crc32.hpp"
#include "glimpse/model.hpp"

namespace glimpse {

using AnyModel = std::variant<ModelParams, SoftmaxRegressionParams>;

inline ModelKind model_kind(const AnyModel& model) {
  if (const auto* p = std::get_if<ModelParams>(&model)) return p->kind;
  return ModelKind::softmax_regression;
}

inline const ModelConfig& model_config(const AnyModel& model) {
  if (const auto* p = std::get_if<ModelParams>(&model)) return p->config;
  return std::get<SoftmaxRegressionParams>(model).config;
}

inline std::vector<const Tensor*> model_tensors(const AnyModel& model) {
  if (const auto* p = std::get_if<ModelParams>(&model)) return p->tensors();
  return std::get<SoftmaxRegressionParams>(model).tensors();
}

inline std::vector<Tensor*> model_tensors(AnyModel& model) {
  if (auto* p = std::get_if<ModelParams>(&model)) return p->tensors();
  return std::get<SoftmaxRegressionParams>(model).tensors();
}

/*
 * "GRNN" checkpoint, version 1. All integers little-endian.
 *
 *   offset  size  field
 *   0       4     magic "GRNN"
 *   4       4     u32 version (1)
 *   8       1     u8 model kind (0 attention, 1 avg-pool, 2 max-pool,
 *                 3 softmax-regression)
 *   9       1     u8 has-optimizer-state flag
 *   10      24    u32 grid_side, feat_dim, hidden_dim, num_layers,
 *                 num_classes, block_len
 *   34      8     f64 dropout_p
 *   42      ...   parameter tensors in the model's canonical declared order,
 *                 raw little-endian float64 (shapes are implied by the config)
 *   ...           optimizer state, if flagged: u64 step_count; f64 alpha,
 *                 beta1, beta2, epsilon; first-moment tensors; second-moment
 *                 tensors (both in the same declared order)
 *   end-4   4     u32 CRC-32 of every preceding byte
 */
inline constexpr char kCheckpointMagic[4] = {'G', 'R', 'N', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  AnyModel model;
  std::optional<AdamState> optimizer;
};

namespace detail {

inline void put_tensor(std::vector<unsigned char>& buf, const Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i) bytes::put_f64(buf, t[i]);
}

inline void get_tensor(bytes::Reader& r, Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = r.f64();
}

}  // namespace detail

inline void write_checkpoint(const std::string& path, const AnyModel& model,
                             const AdamState* optimizer = nullptr) {
  std::vector<unsigned char> buf;
  buf.insert(buf.end(), kCheckpointMagic, kCheckpointMagic + 4);
  bytes::put_u32(buf, kCheckpointVersion);
  buf.push_back(static_cast<unsigned char>(model_kind(model)));
  buf.push_back(optimizer != nullptr ? 1 : 0);
  const ModelConfig& config = model_config(model);
  bytes::put_u32(buf, static_cast<std::uint32_t>(config.grid_side));
  bytes::put_u32(buf, static_cast<std::uint32_t>(config.feat_dim));
  bytes::put_u32(buf, static_cast<std::uint32_t>(config.hidden_dim));
  bytes::put_u32(buf, static_cast<std::uint32_t>(config.num_layers));
  bytes::put_u32(buf, static_cast<std::uint32_t>(config.num_classes));
  bytes::put_u32(buf, static_cast<std::uint32_t>(config.block_len));
  bytes::put_f64(buf, config.dropout_p);
  const auto tensors = model_tensors(model);
  for (const Tensor* t : tensors) detail::put_tensor(buf, *t);
  if (optimizer != nullptr) {
    if (optimizer->first_moment.size() != tensors.size()) {
      throw ContractError("write_checkpoint: optimizer state does not mirror the model");
    }
    bytes::put_u64(buf, optimizer->step_count);
    bytes::put_f64(buf, optimizer->config.alpha);
    bytes::put_f64(buf, optimizer->config.beta1);
    bytes::put_f64(buf, optimizer->config.beta2);
    bytes::put_f64(buf, optimizer->config.epsilon);
    for (const Tensor& t : optimizer->first_moment) detail::put_tensor(buf, t);
    for (const Tensor& t : optimizer->second_moment) detail::put_tensor(buf, t);
  }
  bytes::put_u32(buf, crc32(buf.data(), buf.size()));
  bytes::write_file(path, buf);
}

inline Checkpoint read_checkpoint(const std::string& path) {
  const std::vector<unsigned char> buf = bytes::read_file(path);
  if (buf.size() < 4) throw ParseError(path + ": truncated, no room for a CRC trailer");
  const std::size_t crc_offset = buf.size() - 4;
  const std::uint32_t computed = crc32(buf.data(), crc_offset);
  std::uint32_t stored = 0;
  for (int k = 0; k < 4; ++k) stored |= static_cast<std::uint32_t>(buf[crc_offset + k]) << (8 * k);

  bytes::Reader r(buf.data(), crc_offset, path);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw ParseError(path + ": bad magic, not a GRNN checkpoint");
  }
  if (stored != computed) {
    std::ostringstream os;
    os << path << ": CRC mismatch, trailer at offset " << crc_offset << " stores 0x" << std::hex
       << stored << " but bytes [0, " << std::dec << crc_offset << ") hash to 0x" << std::hex
       << computed;
    throw ParseError(os.str());
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ParseError(path + ": unsupported GRNN version " + std::to_string(version));
  }
  std::uint8_t kind_byte = 0, opt_byte = 0;
  r.raw(&kind_byte, 1);
  r.raw(&opt_byte, 1);
  if (kind_byte > 3 || opt_byte > 1) {
    throw ParseError(path + ": bad kind/optimizer flags");
  }
  const ModelKind kind = static_cast<ModelKind>(kind_byte);
  ModelConfig config;
  config.grid_side = r.u32();
  config.feat_dim = r.u32();
  config.hidden_dim = r.u32();
  config.num_layers = r.u32();
  config.num_classes = r.u32();
  config.block_len = r.u32();
  config.dropout_p = r.f64();
  constexpr std::size_t kMaxExtent = 1u << 20;
  if (config.grid_side > kMaxExtent || config.feat_dim > kMaxExtent ||
      config.hidden_dim > kMaxExtent || config.num_layers > kMaxExtent ||
      config.num_classes > kMaxExtent || config.block_len > kMaxExtent) {
    throw ParseError(path + ": implausible config extents");
  }
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw ParseError(path + ": invalid config: " + e.what());
  }

  Checkpoint out{kind == ModelKind::softmax_regression
                     ? AnyModel(SoftmaxRegressionParams::zeros(config))
                     : AnyModel(ModelParams::zeros(config, kind)),
                 std::nullopt};
  auto tensors = model_tensors(out.model);
  for (Tensor* t : tensors) detail::get_tensor(r, *t);
  if (opt_byte == 1) {
    AdamState state;
    state.step_count = r.u64();
    state.config.alpha = r.f64();
    state.config.beta1 = r.f64();
    state.config.beta2 = r.f64();
    state.config.epsilon = r.f64();
    for (const Tensor* t : model_tensors(std::as_const(out.model))) {
      Tensor m = Tensor::zeros_like(*t);
      detail::get_tensor(r, m);
      state.first_moment.push_back(std::move(m));
    }
    for (const Tensor* t : model_tensors(std::as_const(out.model))) {
      Tensor v = Tensor::zeros_like(*t);
      detail::get_tensor(r, v);
      state.second_moment.push_back(std::move(v));
    }
    out.optimizer = std::move(state);
  }
  if (r.remaining() != 0) {
    throw ParseError(path + ": " + std::to_string(r.remaining()) +
                     " unexpected bytes before the CRC trailer");
  }
  return out;
}

}  // namespace glimpse
