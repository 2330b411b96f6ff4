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

#include <cstddef>
#include <filesystem>
#include <vector>

namespace pairfuse {

/// Interleaved (HWC) float image. Pixel values of loaded 8-bit images are in
/// [0, 1]; normalised images may hold any finite value.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 3;
  std::vector<float> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::size_t c = 3, float fill = 0.0f)
      : width(w), height(h), channels(c), pixels(w * h * c, fill) {}

  float& at(std::size_t x, std::size_t y, std::size_t ch) {
    return pixels[(y * width + x) * channels + ch];
  }
  float at(std::size_t x, std::size_t y, std::size_t ch) const {
    return pixels[(y * width + x) * channels + ch];
  }
  bool empty() const noexcept { return pixels.empty(); }
  bool operator==(const Image&) const = default;
};

/// 8-bit RGB PNG in, [0, 1] floats out. Throws io_error.
Image load_png(const std::filesystem::path& path);

/// Clamps to [0, 1] and rounds to 8 bits.
void save_png(const Image& image, const std::filesystem::path& path);

/// Quantises to 8 bits and back, matching a save/load round trip.
Image quantize_8bit(const Image& image);

}  // namespace pairfuse
