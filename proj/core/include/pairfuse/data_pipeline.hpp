// ----------------------------------------------------------------------------
// Copyright 2026 The pairfuse Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ----------------------------------------------------------------------------

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pairfuse/geometry.hpp"
#include "pairfuse/image.hpp"
#include "pairfuse/tensor.hpp"

namespace pairfuse {

inline constexpr std::size_t kDamageClasses = 4;

enum class Split { train, test };
std::string_view to_string(Split split);

/// One building in a pre/post image pair. Paths are absolute after loading.
struct BuildingRecord {
  std::filesystem::path pre_image_path;
  std::filesystem::path post_image_path;
  std::vector<Point2> polygon;
  int label = 0;
  Split split = Split::train;

  bool operator==(const BuildingRecord&) const = default;
};

/// JSON-lines manifest, one record per line:
///   {"pre": "a.png", "post": "b.png", "polygon": [[x, y], ...], "label": 2, "split": "train"}
/// Relative paths resolve against the manifest's directory. Blank lines are
/// skipped. Throws parse_error (with line number) or validation_error.
std::vector<BuildingRecord> load_manifest(const std::filesystem::path& path);

/// Writes paths relative to the manifest directory when possible.
void write_manifest(const std::filesystem::path& path, std::span<const BuildingRecord> records);

struct SamplePair {
  Image pre;
  Image post;
  int label = 0;

  bool operator==(const SamplePair&) const = default;
};

/// Crops one record: min-area rectangle (optionally grown by `margin`),
/// perspective warp to a square, resize to `size`.
SamplePair prepare_record(const BuildingRecord& record, std::size_t size, double margin = 0.0);

/// Augmentation ranges. Geometric transforms and blur are shared by both
/// crops so they stay registered; Gaussian noise is drawn per crop.
struct AugmentParams {
  double p_hflip = 0.5;
  double p_vflip = 0.5;
  double rotation_deg = 15.0;
  double translate = 0.1;  // fraction of the crop side
  double scale_min = 0.9;
  double scale_max = 1.1;
  double p_blur = 0.3;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 2.0;
  double p_noise = 0.3;
  double noise_sigma_min = 0.01;
  double noise_sigma_max = 0.05;
  std::uint64_t seed = 0;

  /// Every probability zero and every range collapsed to the identity.
  static AugmentParams identity(std::uint64_t seed = 0);
  bool operator==(const AugmentParams&) const = default;
};

/// Throws invalid_config when a probability leaves [0, 1] or a range is inverted.
void validate(const AugmentParams& params);

SamplePair augment(const SamplePair& pair, const AugmentParams& params);

Image gaussian_blur(const Image& image, double sigma);

struct ChannelStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> std{1.0, 1.0, 1.0};
  bool operator==(const ChannelStats&) const = default;
};

/// Per-channel population mean / std over the pre and post crops together.
ChannelStats compute_channel_stats(std::span<const SamplePair> pairs);

SamplePair normalize(const SamplePair& pair, const ChannelStats& stats);
SamplePair denormalize(const SamplePair& pair, const ChannelStats& stats);

std::string channel_stats_to_json(const ChannelStats& stats);
ChannelStats channel_stats_from_json(const std::string& text);

/// Labelled pairs with a train/test assignment per sample.
struct PairDataset {
  std::vector<SamplePair> samples;
  std::vector<Split> splits;

  std::vector<std::size_t> indices(Split split) const;
  std::vector<int> labels() const;
};

struct SynthConfig {
  std::array<double, kDamageClasses> proportions{0.6851, 0.2313, 0.0807, 0.0030};
  std::size_t n_samples = 2000;
  std::size_t image_size = 32;
  /// Fraction of post-image pixels replaced per class.
  std::array<double, kDamageClasses> corruption{0.00, 0.15, 0.40, 0.80};
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

/// Class sizes by largest-remainder apportionment of n over the proportions.
std::array<std::size_t, kDamageClasses> apportion(const std::array<double, kDamageClasses>& p,
                                                  std::size_t n);

/// Deterministic desk-scale stand-in for a damage dataset: a random building
/// texture as the pre crop; the post crop has a class-dependent fraction of
/// its pixels replaced by random colours. The test split is stratified.
PairDataset synth_generate(const SynthConfig& cfg);

/// Writes images (PNG) and a manifest whose polygons cover each whole image.
void write_synth_dataset(const PairDataset& data, const std::filesystem::path& dir);

/// Per-epoch mini-batch order: a permutation of [0, n) from (seed, epoch)
/// split into consecutive batches; the last may be short.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch,
                                                    bool shuffle = true);

struct Batch {
  Tensor tensor_a;  // (N, 3, S, S)
  Tensor tensor_b;
  std::vector<int> labels;
  std::vector<std::size_t> indices;
};

/// Converts HWC crops to NCHW tensors.
Batch make_batch(std::span<const SamplePair> pairs);

/// Streams batches of `pairs` for one epoch.
class BatchIterator {
 public:
  BatchIterator(std::span<const SamplePair> pairs, std::size_t batch_size, std::uint64_t seed,
                std::size_t epoch = 0, bool shuffle = true);

  std::optional<Batch> next();
  std::size_t batch_count() const noexcept { return order_.size(); }

 private:
  std::span<const SamplePair> pairs_;
  std::vector<std::vector<std::size_t>> order_;
  std::size_t cursor_ = 0;
};

/// Crop store written by `prepare`: crops/NNNNNN_{pre,post}.png plus
/// crops.jsonl ({"pre", "post", "label", "split"} per line).
PairDataset load_crop_store(const std::filesystem::path& dir);
void write_crop_store(const PairDataset& data, const std::filesystem::path& dir);

}  // namespace pairfuse
