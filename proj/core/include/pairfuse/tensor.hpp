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
#include <span>
#include <string>
#include <vector>

namespace pairfuse {

/// Rank-4 shape (batch, channels, height, width). A flattened feature vector
/// is (N, C, 1, 1).
struct Shape {
  std::size_t n = 1;
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  std::size_t size() const noexcept { return n * c * h * w; }
  std::size_t plane() const noexcept { return h * w; }
  std::size_t sample() const noexcept { return c * h * w; }

  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& shape);

/// Dense row-major (NCHW) array of doubles with value semantics.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h,
                     std::size_t w) const noexcept {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data_[offset(n, c, h, w)];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data_[offset(n, c, h, w)];
  }

  /// Same storage viewed under a different shape of equal size.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const noexcept;
  void fill(double value) noexcept;

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_{0, 0, 0, 0};
  std::vector<double> data_;
};

}  // namespace pairfuse
