#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "glimpse/bytes.hpp"
#include "glimpse/crc32.hpp"
#include "glimpse/rng.hpp"
#include "glimpse/tensor.hpp"

namespace glimpse {

// One clip's feature-cube sequence. frames is [T_clip x K x K x D]; the slice
// at grid cell (row, col) has region index i = row·K + col.
struct FeatureCubeClip {
  Tensor frames;
  std::vector<int> labels;  // one or more class ids
  std::string clip_id;
  double fps_tag = 30.0;  // nominal fps of the stored sampling (not serialized)

  std::size_t clip_len() const { return frames.extent(0); }
  std::size_t grid_side() const { return frames.extent(1); }
  std::size_t feat_dim() const { return frames.extent(3); }
};

/*
 * "FCUB" cube file, version 1. All integers little-endian.
 *
 *   offset  size  field
 *   0       4     magic "FCUB"
 *   4       4     u32 version (1)
 *   8       4     u32 T_clip
 *   12      4     u32 K
 *   16      4     u32 D
 *   20      2     u16 label count n
 *   22      2n    u16 labels
 *   22+2n   4TK²D payload: float32, t-major, then row-major over the grid,
 *                 then channel (t slowest, channel fastest)
 *   end-4   4     u32 CRC-32 of every preceding byte
 *
 * Features are stored at 32-bit precision (CNN features are float32) and
 * promoted to 64-bit on load, so any clip whose values are exact float32
 * round-trips bit-identically.
 */
inline constexpr char kCubeMagic[4] = {'F', 'C', 'U', 'B'};
inline constexpr std::uint32_t kCubeVersion = 1;

inline void write_cube(const std::string& path, const FeatureCubeClip& clip) {
  if (clip.frames.rank() != 4 || clip.frames.extent(1) != clip.frames.extent(2)) {
    throw DataError("write_cube: frames must be [T x K x K x D], got " +
                    shape_str(clip.frames.shape()));
  }
  if (clip.labels.empty()) throw DataError("write_cube: clip has no labels");
  std::vector<unsigned char> buf;
  buf.insert(buf.end(), kCubeMagic, kCubeMagic + 4);
  bytes::put_u32(buf, kCubeVersion);
  bytes::put_u32(buf, static_cast<std::uint32_t>(clip.clip_len()));
  bytes::put_u32(buf, static_cast<std::uint32_t>(clip.grid_side()));
  bytes::put_u32(buf, static_cast<std::uint32_t>(clip.feat_dim()));
  bytes::put_u16(buf, static_cast<std::uint16_t>(clip.labels.size()));
  for (int label : clip.labels) {
    if (label < 0 || label > 0xffff) {
      throw DataError("write_cube: label " + std::to_string(label) + " does not fit u16");
    }
    bytes::put_u16(buf, static_cast<std::uint16_t>(label));
  }
  for (std::size_t i = 0; i < clip.frames.size(); ++i) {
    const float v = static_cast<float>(clip.frames[i]);
    if (!std::isfinite(v)) {
      throw DataError("write_cube: value at flat index " + std::to_string(i) +
                      " is not representable as a finite float32");
    }
    bytes::put_f32(buf, v);
  }
  bytes::put_u32(buf, crc32(buf.data(), buf.size()));
  bytes::write_file(path, buf);
}

inline FeatureCubeClip read_cube(const std::string& path) {
  const std::vector<unsigned char> buf = bytes::read_file(path);
  bytes::Reader r(buf.data(), buf.size(), path);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kCubeMagic, 4) != 0) {
    throw ParseError(path + ": bad magic, not an FCUB file");
  }
  const std::uint32_t version = r.u32();
  if (version != kCubeVersion) {
    throw ParseError(path + ": unsupported FCUB version " + std::to_string(version));
  }
  const std::uint64_t t_clip = r.u32();
  const std::uint64_t grid = r.u32();
  const std::uint64_t depth = r.u32();
  if (t_clip == 0 || grid == 0 || depth == 0) {
    throw ParseError(path + ": zero extent in header");
  }
  constexpr std::uint64_t kMaxExtent = 1u << 20;
  if (t_clip > kMaxExtent || grid > kMaxExtent || depth > kMaxExtent) {
    throw ParseError(path + ": implausible header extents");
  }
  const std::uint64_t n_labels = r.u16();
  if (n_labels == 0) throw ParseError(path + ": no labels");
  const std::uint64_t expected = 22 + 2 * n_labels + 4 * t_clip * grid * grid * depth + 4;
  if (buf.size() != expected) {
    throw ParseError(path + ": file is " + std::to_string(buf.size()) + " bytes, header implies " +
                     std::to_string(expected));
  }
  const std::size_t crc_offset = buf.size() - 4;
  const std::uint32_t computed = crc32(buf.data(), crc_offset);
  std::uint32_t stored = 0;
  for (int k = 0; k < 4; ++k) stored |= static_cast<std::uint32_t>(buf[crc_offset + k]) << (8 * k);
  if (stored != computed) {
    std::ostringstream os;
    os << path << ": CRC mismatch, trailer at offset " << crc_offset << " stores 0x" << std::hex
       << stored << " but bytes [0, " << std::dec << crc_offset << ") hash to 0x" << std::hex
       << computed;
    throw ParseError(os.str());
  }

  FeatureCubeClip clip;
  for (std::uint64_t k = 0; k < n_labels; ++k) clip.labels.push_back(r.u16());
  clip.frames = Tensor({static_cast<std::size_t>(t_clip), static_cast<std::size_t>(grid),
                        static_cast<std::size_t>(grid), static_cast<std::size_t>(depth)});
  for (std::size_t i = 0; i < clip.frames.size(); ++i) {
    clip.frames[i] = static_cast<double>(r.f32());
  }
  clip.clip_id = std::filesystem::path(path).stem().string();
  return clip;
}

// ---------------------------------------------------------------------------
// block sampling
// ---------------------------------------------------------------------------

// One training/evaluation sample cut from a clip.
struct Block {
  Tensor frames;  // [block_len x K x K x D]
  std::vector<int> labels;
  std::string clip_id;
  std::size_t offset = 0;
  bool padded = false;  // clip was shorter than one block; final frame repeated
};

// Blocks start at offsets 0, stride, 2·stride, ... and take block_len frames
// spaced frame_step apart. Blocks that would run past the clip end are not
// emitted; a clip shorter than one block yields a single block padded by
// repeating its final frame, flagged as such.
inline std::vector<Block> split_into_blocks(const FeatureCubeClip& clip, std::size_t block_len,
                                            std::size_t stride, std::size_t frame_step) {
  if (block_len < 1 || stride < 1 || frame_step < 1) {
    throw ConfigError("split_into_blocks: block_len, stride and frame_step must be >= 1");
  }
  const std::size_t t_clip = clip.clip_len();
  const std::size_t grid = clip.grid_side();
  const std::size_t depth = clip.feat_dim();
  const std::size_t frame_elems = grid * grid * depth;
  const std::size_t span = (block_len - 1) * frame_step + 1;

  auto cut = [&](std::size_t offset, bool clamp) {
    Block b;
    b.frames = Tensor({block_len, grid, grid, depth});
    b.labels = clip.labels;
    b.clip_id = clip.clip_id;
    b.offset = offset;
    b.padded = clamp;
    for (std::size_t j = 0; j < block_len; ++j) {
      std::size_t src = offset + j * frame_step;
      if (clamp) src = std::min(src, t_clip - 1);
      const double* from = clip.frames.data() + src * frame_elems;
      double* to = b.frames.data() + j * frame_elems;
      std::copy(from, from + frame_elems, to);
    }
    return b;
  };

  std::vector<Block> blocks;
  if (t_clip < span) {
    blocks.push_back(cut(0, true));
    return blocks;
  }
  for (std::size_t offset = 0; offset + span <= t_clip; offset += stride) {
    blocks.push_back(cut(offset, false));
  }
  return blocks;
}

// Per-frame reduction of the K² slices to one D-vector.
enum class PoolMode { average, max };

inline PoolMode parse_pool_mode(const std::string& name) {
  if (name == "average" || name == "avg") return PoolMode::average;
  if (name == "max") return PoolMode::max;
  throw ConfigError("unknown pool mode '" + name + "' (expected average or max)");
}

// Average pooling accumulates region-ascending with weight 1/K², the exact
// arithmetic of attending with a uniform distribution.
inline Tensor pool_block(const Tensor& frames, PoolMode mode) {
  if (frames.rank() != 4) {
    throw DimensionError("pool_block: expected [T x K x K x D], got " +
                         shape_str(frames.shape()));
  }
  const std::size_t steps = frames.extent(0);
  const std::size_t regions = frames.extent(1) * frames.extent(2);
  const std::size_t depth = frames.extent(3);
  Tensor out({steps, depth});
  for (std::size_t t = 0; t < steps; ++t) {
    double* row = out.data() + t * depth;
    switch (mode) {
      case PoolMode::average: {
        const double w = 1.0 / static_cast<double>(regions);
        for (std::size_t i = 0; i < regions; ++i) {
          const double* s = frames.data() + (t * regions + i) * depth;
          for (std::size_t j = 0; j < depth; ++j) row[j] += w * s[j];
        }
        break;
      }
      case PoolMode::max: {
        const double* first = frames.data() + t * regions * depth;
        for (std::size_t j = 0; j < depth; ++j) row[j] = first[j];
        for (std::size_t i = 1; i < regions; ++i) {
          const double* s = frames.data() + (t * regions + i) * depth;
          for (std::size_t j = 0; j < depth; ++j) row[j] = std::max(row[j], s[j]);
        }
        break;
      }
      default:
        throw ConfigError("pool_block: unknown mode");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// dataset manifest
// ---------------------------------------------------------------------------

/*
 * Manifest: line-oriented, tab-separated text.
 *   line 1:  <num classes> TAB <comma-separated class names>
 *   line 2+: <cube path, relative to the manifest> TAB <comma-separated label ids>
 *            TAB <train|test>
 */
struct DatasetManifest {
  struct Entry {
    std::string path;
    std::vector<int> labels;
    bool is_train = true;
  };
  std::vector<std::string> class_names;
  std::vector<Entry> entries;
};

struct LoadedDataset {
  std::vector<std::string> class_names;
  std::vector<FeatureCubeClip> train;
  std::vector<FeatureCubeClip> test;

  std::size_t num_classes() const { return class_names.size(); }
};

namespace detail {

inline std::vector<std::string> split_on(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) out.push_back(field);
  return out;
}

inline std::vector<int> parse_labels(const std::string& field, std::size_t num_classes,
                                     const std::string& where) {
  std::vector<int> labels;
  for (const std::string& tok : split_on(field, ',')) {
    std::size_t used = 0;
    int label = 0;
    try {
      label = std::stoi(tok, &used);
    } catch (const std::exception&) {
      throw ParseError(where + ": bad label '" + tok + "'");
    }
    if (used != tok.size() || label < 0 || static_cast<std::size_t>(label) >= num_classes) {
      throw ParseError(where + ": label '" + tok + "' out of range for " +
                       std::to_string(num_classes) + " classes");
    }
    labels.push_back(label);
  }
  if (labels.empty()) throw ParseError(where + ": empty label set");
  return labels;
}

}  // namespace detail

inline void write_manifest(const std::string& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << manifest.class_names.size() << '\t';
  for (std::size_t i = 0; i < manifest.class_names.size(); ++i) {
    if (i) out << ',';
    out << manifest.class_names[i];
  }
  out << '\n';
  for (const auto& e : manifest.entries) {
    out << e.path << '\t';
    for (std::size_t i = 0; i < e.labels.size(); ++i) {
      if (i) out << ',';
      out << e.labels[i];
    }
    out << '\t' << (e.is_train ? "train" : "test") << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

inline DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  DatasetManifest manifest;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty manifest");
  {
    const auto fields = detail::split_on(line, '\t');
    if (fields.size() != 2) throw ParseError(path + ": header needs <C>\\t<names>");
    manifest.class_names = detail::split_on(fields[1], ',');
    std::size_t declared = 0;
    try {
      declared = static_cast<std::size_t>(std::stoul(fields[0]));
    } catch (const std::exception&) {
      throw ParseError(path + ": bad class count '" + fields[0] + "'");
    }
    if (declared < 2 || manifest.class_names.size() != declared) {
      throw ParseError(path + ": class count " + fields[0] + " does not match " +
                       std::to_string(manifest.class_names.size()) + " names");
    }
  }
  std::size_t line_no = 1;
  bool any_train = false, any_test = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const auto fields = detail::split_on(line, '\t');
    if (fields.size() != 3) throw ParseError(where + ": expected 3 tab-separated fields");
    DatasetManifest::Entry e;
    e.path = fields[0];
    e.labels = detail::parse_labels(fields[1], manifest.class_names.size(), where);
    if (fields[2] == "train") {
      e.is_train = true;
      any_train = true;
    } else if (fields[2] == "test") {
      e.is_train = false;
      any_test = true;
    } else {
      throw ParseError(where + ": split must be train or test, got '" + fields[2] + "'");
    }
    manifest.entries.push_back(std::move(e));
  }
  if (!any_train || !any_test) {
    throw ParseError(path + ": manifest needs at least one train and one test entry");
  }
  return manifest;
}

inline LoadedDataset load_dataset(const std::string& manifest_path) {
  const DatasetManifest manifest = read_manifest(manifest_path);
  const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
  LoadedDataset data;
  data.class_names = manifest.class_names;
  std::size_t grid = 0, depth = 0;
  for (const auto& e : manifest.entries) {
    const std::filesystem::path cube_path = base / e.path;
    if (!std::filesystem::exists(cube_path)) {
      throw DataError("manifest entry not resolvable: " + cube_path.string());
    }
    FeatureCubeClip clip = read_cube(cube_path.string());
    clip.labels = e.labels;  // manifest labels are authoritative
    if (grid == 0) {
      grid = clip.grid_side();
      depth = clip.feat_dim();
    } else if (clip.grid_side() != grid || clip.feat_dim() != depth) {
      throw DataError(cube_path.string() + ": cube shape differs from the rest of the dataset");
    }
    (e.is_train ? data.train : data.test).push_back(std::move(clip));
  }
  return data;
}

// ---------------------------------------------------------------------------
// synthetic attention-discriminative dataset
// ---------------------------------------------------------------------------

// Each class gets a fixed random unit signature vector; each clip hides that
// signature at one grid cell whose position follows a random walk starting at
// the grid center (it moves to a 4-neighbor with probability 0.3 per frame),
// the way camera framing centers the subject in real footage. Every other
// cell is isotropic Gaussian noise, so a classifier must localize the
// signature to do better than chance.
struct SynthConfig {
  std::size_t grid_side = 7;
  std::size_t feat_dim = 32;
  std::size_t num_classes = 6;
  std::size_t clip_len = 30;
  std::size_t train_clips = 120;
  std::size_t test_clips = 60;
  double noise_sigma = 0.5;
  double move_prob = 0.3;

  void validate() const {
    if (grid_side < 1 || feat_dim < 1 || clip_len < 1 || train_clips < 1 || test_clips < 1) {
      throw ConfigError("synth: all dimensions and clip counts must be positive");
    }
    if (num_classes < 2) throw ConfigError("synth: need at least 2 classes");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
      throw ConfigError("synth: noise_sigma must be finite and nonnegative");
    }
    if (!(move_prob >= 0.0 && move_prob <= 1.0)) {
      throw ConfigError("synth: move_prob must lie in [0, 1]");
    }
  }
};

struct SynthResult {
  LoadedDataset data;
  Tensor signatures;  // [C x D] unit vectors (float32-quantized)
};

namespace detail {

inline FeatureCubeClip synth_clip(const SynthConfig& cfg, const Tensor& signatures, int label,
                                  const std::string& clip_id, Rng& rng) {
  const std::size_t grid = cfg.grid_side;
  const std::size_t regions = grid * grid;
  FeatureCubeClip clip;
  clip.labels = {label};
  clip.clip_id = clip_id;
  clip.frames = Tensor({cfg.clip_len, grid, grid, cfg.feat_dim});

  std::size_t cell = (grid / 2) * grid + grid / 2;
  for (std::size_t t = 0; t < cfg.clip_len; ++t) {
    if (t > 0 && rng.uniform() < cfg.move_prob) {
      const std::size_t row = cell / grid;
      const std::size_t col = cell % grid;
      std::vector<std::size_t> neighbors;
      if (row > 0) neighbors.push_back(cell - grid);
      if (row + 1 < grid) neighbors.push_back(cell + grid);
      if (col > 0) neighbors.push_back(cell - 1);
      if (col + 1 < grid) neighbors.push_back(cell + 1);
      cell = neighbors[rng.uniform_index(neighbors.size())];
    }
    for (std::size_t i = 0; i < regions; ++i) {
      double* v = clip.frames.data() + (t * regions + i) * cfg.feat_dim;
      for (std::size_t j = 0; j < cfg.feat_dim; ++j) {
        double value = cfg.noise_sigma * rng.normal();
        if (i == cell) value += signatures.at(static_cast<std::size_t>(label), j);
        v[j] = static_cast<double>(static_cast<float>(value));  // float32 storage semantics
      }
    }
  }
  return clip;
}

}  // namespace detail

inline SynthResult synth_generate(const SynthConfig& cfg, Rng& rng) {
  cfg.validate();
  SynthResult result;
  result.signatures = Tensor({cfg.num_classes, cfg.feat_dim});
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    double norm_sq = 0.0;
    std::vector<double> raw(cfg.feat_dim);
    for (std::size_t j = 0; j < cfg.feat_dim; ++j) {
      raw[j] = rng.normal();
      norm_sq += raw[j] * raw[j];
    }
    const double norm = std::sqrt(norm_sq);
    for (std::size_t j = 0; j < cfg.feat_dim; ++j) {
      result.signatures.at(c, j) = static_cast<double>(static_cast<float>(raw[j] / norm));
    }
    result.data.class_names.push_back("class_" + std::to_string(c));
  }
  char id[64];
  for (std::size_t n = 0; n < cfg.train_clips; ++n) {
    const int label = static_cast<int>(n % cfg.num_classes);
    std::snprintf(id, sizeof id, "train_%04zu", n);
    result.data.train.push_back(detail::synth_clip(cfg, result.signatures, label, id, rng));
  }
  for (std::size_t n = 0; n < cfg.test_clips; ++n) {
    const int label = static_cast<int>(n % cfg.num_classes);
    std::snprintf(id, sizeof id, "test_%04zu", n);
    result.data.test.push_back(detail::synth_clip(cfg, result.signatures, label, id, rng));
  }
  return result;
}

// Writes every clip as <clip_id>.fcub plus manifest.tsv; returns the manifest path.
inline std::string write_dataset(const LoadedDataset& data, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  DatasetManifest manifest;
  manifest.class_names = data.class_names;
  auto emit = [&](const std::vector<FeatureCubeClip>& clips, bool is_train) {
    for (const FeatureCubeClip& clip : clips) {
      const std::string file = clip.clip_id + ".fcub";
      write_cube((std::filesystem::path(out_dir) / file).string(), clip);
      manifest.entries.push_back({file, clip.labels, is_train});
    }
  };
  emit(data.train, true);
  emit(data.test, false);
  const std::string manifest_path = (std::filesystem::path(out_dir) / "manifest.tsv").string();
  write_manifest(manifest_path, manifest);
  return manifest_path;
}

}  // namespace glimpse
