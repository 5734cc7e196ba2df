#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "glimpse/data.hpp"
#include "glimpse/model.hpp"
#include "glimpse/tensor.hpp"

namespace glimpse {

// Bilinear upsampling of a [K x K] map by an integer factor, sampling at output
// pixel centers (src = (dst + 0.5)/factor − 0.5, clamped to the border). A
// factor of 1 reproduces the input.
inline Tensor bilinear_upsample(const Tensor& map, std::size_t factor) {
  if (map.rank() != 2 || map.extent(0) != map.extent(1)) {
    throw DimensionError("bilinear_upsample: expected a square map, got " +
                         shape_str(map.shape()));
  }
  if (factor < 1) throw ConfigError("bilinear_upsample: factor must be >= 1");
  const std::size_t k = map.extent(0);
  const std::size_t n = k * factor;
  Tensor out({n, n});
  for (std::size_t r = 0; r < n; ++r) {
    const double sr = std::clamp((static_cast<double>(r) + 0.5) / static_cast<double>(factor) - 0.5,
                                 0.0, static_cast<double>(k - 1));
    const std::size_t r0 = static_cast<std::size_t>(sr);
    const std::size_t r1 = std::min(r0 + 1, k - 1);
    const double fr = sr - static_cast<double>(r0);
    for (std::size_t c = 0; c < n; ++c) {
      const double sc =
          std::clamp((static_cast<double>(c) + 0.5) / static_cast<double>(factor) - 0.5, 0.0,
                     static_cast<double>(k - 1));
      const std::size_t c0 = static_cast<std::size_t>(sc);
      const std::size_t c1 = std::min(c0 + 1, k - 1);
      const double fc = sc - static_cast<double>(c0);
      out.at(r, c) = (1.0 - fr) * ((1.0 - fc) * map.at(r0, c0) + fc * map.at(r0, c1)) +
                     fr * ((1.0 - fc) * map.at(r1, c0) + fc * map.at(r1, c1));
    }
  }
  return out;
}

// Binary "P5" PGM, maxval 255.
inline void write_pgm(const std::string& path, const std::vector<std::uint8_t>& pixels,
                      std::size_t width, std::size_t height) {
  if (pixels.size() != width * height) {
    throw DimensionError("write_pgm: pixel count does not match dimensions");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) throw IoError("write failed for " + path);
}

// Gray levels scaled so the frame's maximum attention maps to 255.
inline std::vector<std::uint8_t> to_gray_max255(const Tensor& map) {
  double hi = 0.0;
  for (std::size_t i = 0; i < map.size(); ++i) hi = std::max(hi, map[i]);
  std::vector<std::uint8_t> out(map.size(), 0);
  if (hi <= 0.0) return out;
  for (std::size_t i = 0; i < map.size(); ++i) {
    const long g = std::lround(map[i] / hi * 255.0);
    out[i] = static_cast<std::uint8_t>(std::clamp(g, 0L, 255L));
  }
  return out;
}

// One attention distribution as both a raw text grid and an upsampled PGM.
inline void write_attention_map(const std::string& path_base, const Tensor& attention,
                                std::size_t grid_side, std::size_t upsample) {
  if (attention.size() != grid_side * grid_side) {
    throw DimensionError("write_attention_map: attention " + shape_str(attention.shape()) +
                         " does not fill a " + std::to_string(grid_side) + "² grid");
  }
  Tensor map({grid_side, grid_side});
  for (std::size_t i = 0; i < attention.size(); ++i) map[i] = attention[i];

  std::ofstream txt(path_base + ".txt", std::ios::trunc);
  if (!txt) throw IoError("cannot open " + path_base + ".txt for writing");
  char buf[64];
  for (std::size_t r = 0; r < grid_side; ++r) {
    for (std::size_t c = 0; c < grid_side; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", map.at(r, c));
      txt << buf << (c + 1 < grid_side ? '\t' : '\n');
    }
  }
  if (!txt) throw IoError("write failed for " + path_base + ".txt");

  const Tensor up = bilinear_upsample(map, upsample);
  write_pgm(path_base + ".pgm", to_gray_max255(up), up.extent(1), up.extent(0));
}

// Per-step heatmaps for every (non-overlapping) block of a clip.
inline void viz_attention(const ModelParams& params, const FeatureCubeClip& clip,
                          const std::string& out_dir, std::size_t upsample) {
  if (!params.has_attention()) {
    throw ContractError("viz_attention: params have no attention weights");
  }
  if (upsample < 1) throw ConfigError("viz_attention: upsample must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  const auto blocks = split_into_blocks(clip, params.config.block_len, params.config.block_len, 1);
  char name[64];
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const ForwardPass pass = forward_block(blocks[b].frames, params, RunMode::eval);
    for (std::size_t t = 0; t < pass.steps.size(); ++t) {
      std::snprintf(name, sizeof name, "attn_b%03zu_t%03zu", b, t);
      write_attention_map((std::filesystem::path(out_dir) / name).string(),
                          pass.steps[t].attention, params.config.grid_side, upsample);
    }
  }
}

}  // namespace glimpse
