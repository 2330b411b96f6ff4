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

#include "pairfuse/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "pairfuse/error.hpp"
#include "pairfuse/random.hpp"

namespace pairfuse {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Split split) { return split == Split::train ? "train" : "test"; }

namespace {

Split split_from_string(const std::string& s, std::size_t line) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  raise(ErrorCode::validation_error,
        "line " + std::to_string(line) + ": unknown split '" + s + "'");
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

std::string relative_to(const fs::path& p, const fs::path& base) {
  if (base.empty()) return p.string();
  const fs::path rel = p.lexically_relative(base);
  return rel.empty() ? p.string() : rel.string();
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
}

}  // namespace

std::vector<BuildingRecord> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::io_error, "cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  std::vector<BuildingRecord> records;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    json j;
    BuildingRecord rec;
    try {
      j = json::parse(line);
      rec.pre_image_path = resolve(base, j.at("pre").get<std::string>());
      rec.post_image_path = resolve(base, j.at("post").get<std::string>());
      for (const json& v : j.at("polygon")) {
        if (!v.is_array() || v.size() != 2) throw json::type_error::create(302, "vertex must be [x, y]", nullptr);
        rec.polygon.push_back(Point2{v[0].get<double>(), v[1].get<double>()});
      }
      rec.label = j.at("label").get<int>();
    } catch (const json::exception& e) {
      raise(ErrorCode::parse_error, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    rec.split = split_from_string(j.value("split", std::string("train")), lineno);
    if (rec.polygon.size() < 3) {
      raise(ErrorCode::validation_error, path.string() + ":" + std::to_string(lineno) +
                                             ": polygon needs at least 3 vertices");
    }
    if (!(polygon_area(rec.polygon) > 0.0)) {
      raise(ErrorCode::validation_error,
            path.string() + ":" + std::to_string(lineno) + ": polygon has zero area");
    }
    if (rec.label < 0 || rec.label >= static_cast<int>(kDamageClasses)) {
      raise(ErrorCode::validation_error, path.string() + ":" + std::to_string(lineno) +
                                             ": label " + std::to_string(rec.label) +
                                             " outside [0, 3]");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_manifest(const fs::path& path, std::span<const BuildingRecord> records) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::io_error, "cannot write manifest " + path.string());
  const fs::path base = path.parent_path();
  for (const BuildingRecord& r : records) {
    json poly = json::array();
    for (const Point2& p : r.polygon) poly.push_back({p.x, p.y});
    json j{{"pre", relative_to(r.pre_image_path, base)},
           {"post", relative_to(r.post_image_path, base)},
           {"polygon", poly},
           {"label", r.label},
           {"split", std::string(to_string(r.split))}};
    out << j.dump() << '\n';
  }
}

SamplePair prepare_record(const BuildingRecord& record, std::size_t size, double margin) {
  const Quad rect = expand_quad(min_area_rect(record.polygon), margin);
  const Image pre = load_png(record.pre_image_path);
  const Image post = load_png(record.post_image_path);
  return SamplePair{warp_to_square(pre, rect, size), warp_to_square(post, rect, size), record.label};
}

// ---------------------------------------------------------------------------
// Augmentation

AugmentParams AugmentParams::identity(std::uint64_t seed) {
  AugmentParams p;
  p.p_hflip = p.p_vflip = 0.0;
  p.rotation_deg = 0.0;
  p.translate = 0.0;
  p.scale_min = p.scale_max = 1.0;
  p.p_blur = 0.0;
  p.p_noise = 0.0;
  p.seed = seed;
  return p;
}

void validate(const AugmentParams& p) {
  for (double prob : {p.p_hflip, p.p_vflip, p.p_blur, p.p_noise}) {
    if (!(prob >= 0.0 && prob <= 1.0)) raise(ErrorCode::invalid_config, "probability outside [0, 1]");
  }
  if (p.rotation_deg < 0.0 || p.translate < 0.0 || p.scale_min <= 0.0 ||
      p.scale_min > p.scale_max || p.blur_sigma_min <= 0.0 ||
      p.blur_sigma_min > p.blur_sigma_max || p.noise_sigma_min < 0.0 ||
      p.noise_sigma_min > p.noise_sigma_max) {
    raise(ErrorCode::invalid_config, "augmentation range is empty or inverted");
  }
}

namespace {

Image flip(const Image& img, bool horizontal) {
  Image out(img.width, img.height, img.channels);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const std::size_t sx = horizontal ? img.width - 1 - x : x;
      const std::size_t sy = horizontal ? y : img.height - 1 - y;
      for (std::size_t c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

struct Affine {
  double angle_rad, tx, ty, scale;
  bool is_identity() const { return angle_rad == 0.0 && tx == 0.0 && ty == 0.0 && scale == 1.0; }
};

// Rotation + scale about the centre, then translation; sampled by inverse map.
Image apply_affine(const Image& img, const Affine& a) {
  Image out(img.width, img.height, img.channels);
  const double cx = static_cast<double>(img.width) / 2.0;
  const double cy = static_cast<double>(img.height) / 2.0;
  const double c = std::cos(a.angle_rad), s = std::sin(a.angle_rad);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const double dx = (static_cast<double>(x) + 0.5 - cx - a.tx) / a.scale;
      const double dy = (static_cast<double>(y) + 0.5 - cy - a.ty) / a.scale;
      const double sx = cx + c * dx + s * dy;
      const double sy = cy - s * dx + c * dy;
      for (std::size_t ch = 0; ch < img.channels; ++ch) out.at(x, y, ch) = sample_bilinear(img, sx, sy, ch);
    }
  }
  return out;
}

void add_noise(Image& img, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sigma);
  for (float& v : img.pixels) v = static_cast<float>(v + dist(rng));
}

}  // namespace

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = w;
    total += w;
  }
  for (double& w : kernel) w /= total;
  auto clampi = [](std::ptrdiff_t v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(v, 0, static_cast<std::ptrdiff_t>(n) - 1));
  };
  Image tmp(img.width, img.height, img.channels);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
          acc += kernel[static_cast<std::size_t>(i + radius)] *
                 img.at(clampi(static_cast<std::ptrdiff_t>(x) + i, img.width), y, c);
        }
        tmp.at(x, y, c) = static_cast<float>(acc);
      }
    }
  }
  Image out(img.width, img.height, img.channels);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
          acc += kernel[static_cast<std::size_t>(i + radius)] *
                 tmp.at(x, clampi(static_cast<std::ptrdiff_t>(y) + i, img.height), c);
        }
        out.at(x, y, c) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

SamplePair augment(const SamplePair& pair, const AugmentParams& p) {
  validate(p);
  std::mt19937_64 rng(p.seed);
  // Fixed draw order keeps the stream stable regardless of which branches fire.
  const bool hflip = uniform(rng, 0, 1) < p.p_hflip;
  const bool vflip = uniform(rng, 0, 1) < p.p_vflip;
  const double angle = uniform(rng, -p.rotation_deg, p.rotation_deg) * std::numbers::pi / 180.0;
  const double side = static_cast<double>(pair.pre.width);
  const double tx = uniform(rng, -p.translate, p.translate) * side;
  const double ty = uniform(rng, -p.translate, p.translate) * side;
  const double scale = uniform(rng, p.scale_min, p.scale_max);
  const bool blur = uniform(rng, 0, 1) < p.p_blur;
  const double blur_sigma = uniform(rng, p.blur_sigma_min, p.blur_sigma_max);
  const bool noise_pre = uniform(rng, 0, 1) < p.p_noise;
  const double sigma_pre = uniform(rng, p.noise_sigma_min, p.noise_sigma_max);
  const bool noise_post = uniform(rng, 0, 1) < p.p_noise;
  const double sigma_post = uniform(rng, p.noise_sigma_min, p.noise_sigma_max);

  const Affine affine{angle, tx, ty, scale};
  auto geometric = [&](Image img) {
    if (hflip) img = flip(img, true);
    if (vflip) img = flip(img, false);
    if (!affine.is_identity()) img = apply_affine(img, affine);
    if (blur) img = gaussian_blur(img, blur_sigma);
    return img;
  };
  SamplePair out{geometric(pair.pre), geometric(pair.post), pair.label};
  if (noise_pre && sigma_pre > 0.0) add_noise(out.pre, sigma_pre, mix_seed({p.seed, 1}));
  if (noise_post && sigma_post > 0.0) add_noise(out.post, sigma_post, mix_seed({p.seed, 2}));
  return out;
}

// ---------------------------------------------------------------------------
// Normalisation

ChannelStats compute_channel_stats(std::span<const SamplePair> pairs) {
  std::array<double, 3> sum{}, sq{};
  std::size_t count = 0;
  for (const SamplePair& p : pairs) {
    for (const Image* img : {&p.pre, &p.post}) {
      if (img->channels != 3) raise(ErrorCode::dataset_error, "crops must be RGB");
      for (std::size_t i = 0; i < img->pixels.size(); i += 3) {
        for (std::size_t c = 0; c < 3; ++c) {
          const double v = img->pixels[i + c];
          sum[c] += v;
          sq[c] += v * v;
        }
      }
      count += img->width * img->height;
    }
  }
  if (count == 0) raise(ErrorCode::empty_input, "no pixels to compute statistics from");
  ChannelStats s;
  for (std::size_t c = 0; c < 3; ++c) {
    const double n = static_cast<double>(count);
    s.mean[c] = sum[c] / n;
    s.std[c] = std::sqrt(std::max(0.0, sq[c] / n - s.mean[c] * s.mean[c]));
  }
  return s;
}

namespace {
Image affine_channels(const Image& img, const ChannelStats& stats, bool forward) {
  Image out = img;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const std::size_t c = i % out.channels;
    const double v = out.pixels[i];
    out.pixels[i] = static_cast<float>(forward ? (v - stats.mean[c]) / stats.std[c]
                                               : v * stats.std[c] + stats.mean[c]);
  }
  return out;
}

void require_positive_std(const ChannelStats& stats) {
  for (double s : stats.std) {
    if (!(s > 0.0)) raise(ErrorCode::zero_std, "channel standard deviation must be positive");
  }
}
}  // namespace

SamplePair normalize(const SamplePair& pair, const ChannelStats& stats) {
  require_positive_std(stats);
  return {affine_channels(pair.pre, stats, true), affine_channels(pair.post, stats, true), pair.label};
}

SamplePair denormalize(const SamplePair& pair, const ChannelStats& stats) {
  require_positive_std(stats);
  return {affine_channels(pair.pre, stats, false), affine_channels(pair.post, stats, false), pair.label};
}

std::string channel_stats_to_json(const ChannelStats& stats) {
  return json{{"mean", stats.mean}, {"std", stats.std}}.dump(2) + "\n";
}

ChannelStats channel_stats_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ChannelStats s;
    s.mean = j.at("mean").get<std::array<double, 3>>();
    s.std = j.at("std").get<std::array<double, 3>>();
    return s;
  } catch (const json::exception& e) {
    raise(ErrorCode::parse_error, std::string("normalisation stats: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Datasets

std::vector<std::size_t> PairDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == split) out.push_back(i);
  }
  return out;
}

std::vector<int> PairDataset::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const SamplePair& s : samples) out.push_back(s.label);
  return out;
}

std::array<std::size_t, kDamageClasses> apportion(const std::array<double, kDamageClasses>& p,
                                                  std::size_t n) {
  std::array<std::size_t, kDamageClasses> counts{};
  std::array<double, kDamageClasses> remainder{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < kDamageClasses; ++k) {
    const double exact = p[k] * static_cast<double>(n);
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    remainder[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  std::array<std::size_t, kDamageClasses> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % kDamageClasses]];
  return counts;
}

namespace {

Image building_texture(std::size_t size, std::mt19937_64& rng) {
  Image img(size, size, 3);
  const double s = static_cast<double>(size);
  std::array<double, 3> ground{uniform(rng, 0.2, 0.5), uniform(rng, 0.3, 0.6), uniform(rng, 0.2, 0.4)};
  const double fx = uniform(rng, 0.5, 3.0), fy = uniform(rng, 0.5, 3.0);
  const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  std::array<double, 3> roof{uniform(rng, 0.3, 0.95), uniform(rng, 0.3, 0.95), uniform(rng, 0.3, 0.95)};
  const double half_w = uniform(rng, 0.2, 0.35) * s, half_h = uniform(rng, 0.2, 0.35) * s;
  const double cx = s / 2.0 + uniform(rng, -0.08, 0.08) * s;
  const double cy = s / 2.0 + uniform(rng, -0.08, 0.08) * s;
  const double theta = uniform(rng, -0.5, 0.5);
  const double ct = std::cos(theta), st = std::sin(theta);
  const bool ridge_x = uniform(rng, 0, 1) < 0.5;

  struct Patch { double x0, y0, x1, y1; std::array<double, 3> colour; };
  std::vector<Patch> patches;
  const int n_patches = static_cast<int>(uniform(rng, 2.0, 6.0));
  for (int i = 0; i < n_patches; ++i) {
    const double x0 = uniform(rng, 0, s), y0 = uniform(rng, 0, s);
    patches.push_back({x0, y0, x0 + uniform(rng, 1, s / 6), y0 + uniform(rng, 1, s / 6),
                       {uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1)}});
  }
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
      const double wave = 0.08 * std::sin(2.0 * std::numbers::pi * (fx * px + fy * py) / s + phase);
      std::array<double, 3> v{ground[0] + wave, ground[1] + wave, ground[2] + wave};
      for (const Patch& p : patches) {
        if (px >= p.x0 && px < p.x1 && py >= p.y0 && py < p.y1) v = p.colour;
      }
      const double u = ct * (px - cx) + st * (py - cy);
      const double w = -st * (px - cx) + ct * (py - cy);
      if (std::abs(u) <= half_w && std::abs(w) <= half_h) {
        const bool edge = std::abs(u) > half_w - 1.0 || std::abs(w) > half_h - 1.0;
        const bool ridge = ridge_x ? std::abs(w) < 0.75 : std::abs(u) < 0.75;
        const double shade = edge ? 0.55 : (ridge ? 0.8 : ((ridge_x ? w : u) > 0 ? 0.92 : 1.0));
        v = {roof[0] * shade, roof[1] * shade, roof[2] * shade};
      }
      for (std::size_t c = 0; c < 3; ++c) {
        img.at(x, y, c) = static_cast<float>(std::clamp(v[c] + uniform(rng, -0.02, 0.02), 0.0, 1.0));
      }
    }
  }
  return quantize_8bit(img);
}

Image corrupt(const Image& pre, double fraction, std::mt19937_64& rng) {
  Image post = pre;
  const std::size_t pixels = pre.width * pre.height;
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pixels)));
  std::vector<std::size_t> order(pixels);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pixels - 1);
    std::swap(order[i], order[pick(rng)]);
    for (std::size_t c = 0; c < 3; ++c) {
      post.pixels[order[i] * 3 + c] = static_cast<float>(uniform(rng, 0.0, 1.0));
    }
  }
  return quantize_8bit(post);
}

}  // namespace

PairDataset synth_generate(const SynthConfig& cfg) {
  const double total = std::accumulate(cfg.proportions.begin(), cfg.proportions.end(), 0.0);
  // Rounded percentages rarely sum to exactly 1; accept a small slack and renormalise.
  if (std::abs(total - 1.0) > 1e-3 ||
      std::any_of(cfg.proportions.begin(), cfg.proportions.end(), [](double p) { return p < 0.0; })) {
    raise(ErrorCode::invalid_config, "class proportions must be non-negative and sum to 1");
  }
  if (cfg.n_samples == 0 || cfg.image_size < 8) {
    raise(ErrorCode::invalid_config, "synthetic dataset needs n >= 1 and size >= 8");
  }
  if (!(cfg.test_fraction >= 0.0 && cfg.test_fraction < 1.0)) {
    raise(ErrorCode::invalid_config, "test fraction must be in [0, 1)");
  }
  for (double f : cfg.corruption) {
    if (!(f >= 0.0 && f <= 1.0)) raise(ErrorCode::invalid_config, "corruption fraction outside [0, 1]");
  }

  std::mt19937_64 rng(cfg.seed);
  std::array<double, kDamageClasses> shares = cfg.proportions;
  for (double& p : shares) p /= total;
  const auto counts = apportion(shares, cfg.n_samples);
  std::vector<int> labels;
  for (std::size_t k = 0; k < kDamageClasses; ++k) labels.insert(labels.end(), counts[k], static_cast<int>(k));
  std::shuffle(labels.begin(), labels.end(), rng);

  PairDataset data;
  data.samples.reserve(labels.size());
  for (int label : labels) {
    std::mt19937_64 sample_rng(mix_seed({cfg.seed, data.samples.size()}));
    Image pre = building_texture(cfg.image_size, sample_rng);
    Image post = corrupt(pre, cfg.corruption[static_cast<std::size_t>(label)], sample_rng);
    data.samples.push_back(SamplePair{std::move(pre), std::move(post), label});
  }

  data.splits.assign(labels.size(), Split::train);
  for (std::size_t k = 0; k < kDamageClasses; ++k) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == static_cast<int>(k)) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_test = static_cast<std::size_t>(
        std::llround(cfg.test_fraction * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < n_test && i < members.size(); ++i) data.splits[members[i]] = Split::test;
  }
  return data;
}

namespace {
std::string sample_stem(std::size_t i) {
  std::ostringstream s;
  s << std::setw(6) << std::setfill('0') << i;
  return s.str();
}
}  // namespace

void write_synth_dataset(const PairDataset& data, const fs::path& dir) {
  fs::create_directories(dir / "images");
  std::vector<BuildingRecord> records;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const SamplePair& s = data.samples[i];
    BuildingRecord r;
    r.pre_image_path = dir / "images" / (sample_stem(i) + "_pre.png");
    r.post_image_path = dir / "images" / (sample_stem(i) + "_post.png");
    save_png(s.pre, r.pre_image_path);
    save_png(s.post, r.post_image_path);
    const auto w = static_cast<double>(s.pre.width), h = static_cast<double>(s.pre.height);
    r.polygon = {{0, 0}, {w, 0}, {w, h}, {0, h}};
    r.label = s.label;
    r.split = data.splits[i];
    records.push_back(std::move(r));
  }
  write_manifest(dir / "manifest.jsonl", records);
}

void write_crop_store(const PairDataset& data, const fs::path& dir) {
  fs::create_directories(dir / "crops");
  std::ofstream out(dir / "crops.jsonl", std::ios::binary);
  if (!out) raise(ErrorCode::io_error, "cannot write crop index in " + dir.string());
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const std::string pre = "crops/" + sample_stem(i) + "_pre.png";
    const std::string post = "crops/" + sample_stem(i) + "_post.png";
    save_png(data.samples[i].pre, dir / pre);
    save_png(data.samples[i].post, dir / post);
    out << json{{"pre", pre}, {"post", post}, {"label", data.samples[i].label},
                {"split", std::string(to_string(data.splits[i]))}}.dump()
        << '\n';
  }
}

PairDataset load_crop_store(const fs::path& dir) {
  std::ifstream in(dir / "crops.jsonl");
  if (!in) raise(ErrorCode::dataset_error, "no crop index (crops.jsonl) in " + dir.string());
  PairDataset data;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      SamplePair s{load_png(resolve(dir, j.at("pre").get<std::string>())),
                   load_png(resolve(dir, j.at("post").get<std::string>())), j.at("label").get<int>()};
      if (s.pre.width != s.post.width || s.pre.height != s.post.height) {
        raise(ErrorCode::dataset_error, "crop pair " + std::to_string(lineno) + " differs in size");
      }
      data.samples.push_back(std::move(s));
      data.splits.push_back(split_from_string(j.value("split", std::string("train")), lineno));
    } catch (const json::exception& e) {
      raise(ErrorCode::parse_error, "crops.jsonl:" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return data;
}

// ---------------------------------------------------------------------------
// Batching

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch,
                                                    bool shuffle) {
  if (batch_size == 0) raise(ErrorCode::invalid_config, "batch size must be at least 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    std::mt19937_64 rng(mix_seed({seed, epoch, 0xBA7C4ull}));
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  }
  return batches;
}

Batch make_batch(std::span<const SamplePair> pairs) {
  if (pairs.empty()) raise(ErrorCode::empty_input, "empty batch");
  const Image& first = pairs.front().pre;
  const Shape shape{pairs.size(), first.channels, first.height, first.width};
  Batch batch{Tensor(shape), Tensor(shape), {}, {}};
  for (std::size_t n = 0; n < pairs.size(); ++n) {
    const SamplePair& p = pairs[n];
    if (p.pre.width != first.width || p.pre.height != first.height ||
        p.post.width != first.width || p.post.height != first.height) {
      raise(ErrorCode::shape_mismatch, "crops in a batch must share one size");
    }
    for (std::size_t y = 0; y < first.height; ++y) {
      for (std::size_t x = 0; x < first.width; ++x) {
        for (std::size_t c = 0; c < first.channels; ++c) {
          batch.tensor_a.at(n, c, y, x) = p.pre.at(x, y, c);
          batch.tensor_b.at(n, c, y, x) = p.post.at(x, y, c);
        }
      }
    }
    batch.labels.push_back(p.label);
  }
  return batch;
}

BatchIterator::BatchIterator(std::span<const SamplePair> pairs, std::size_t batch_size,
                             std::uint64_t seed, std::size_t epoch, bool shuffle)
    : pairs_(pairs), order_(epoch_batches(pairs.size(), batch_size, seed, epoch, shuffle)) {}

std::optional<Batch> BatchIterator::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const auto& idx = order_[cursor_++];
  std::vector<SamplePair> chosen;
  chosen.reserve(idx.size());
  for (std::size_t i : idx) chosen.push_back(pairs_[i]);
  Batch b = make_batch(chosen);
  b.indices = idx;
  return b;
}

}  // namespace pairfuse
