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

#include "pairfuse/image.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/imgcodecs.hpp>

#include "pairfuse/error.hpp"

namespace pairfuse {
namespace {
std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}
}  // namespace

Image load_png(const std::filesystem::path& path) {
  const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) raise(ErrorCode::io_error, "cannot read image " + path.string());
  Image img(static_cast<std::size_t>(bgr.cols), static_cast<std::size_t>(bgr.rows), 3);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        img.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), c) =
            static_cast<float>(row[x][static_cast<int>(2 - c)]) / 255.0f;
      }
    }
  }
  return img;
}

void save_png(const Image& image, const std::filesystem::path& path) {
  if (image.channels != 3) raise(ErrorCode::io_error, "only RGB images can be written");
  cv::Mat bgr(static_cast<int>(image.height), static_cast<int>(image.width), CV_8UC3);
  for (std::size_t y = 0; y < image.height; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(static_cast<int>(y));
    for (std::size_t x = 0; x < image.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        row[x][static_cast<int>(2 - c)] = to_byte(image.at(x, y, c));
      }
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), bgr)) {
    raise(ErrorCode::io_error, "cannot write image " + path.string());
  }
}

Image quantize_8bit(const Image& image) {
  Image out = image;
  for (float& v : out.pixels) v = static_cast<float>(to_byte(v)) / 255.0f;
  return out;
}

}  // namespace pairfuse
