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

#include "pairfuse/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "pairfuse/error.hpp"

namespace pairfuse {

std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," +
         std::to_string(s.h) + "," + std::to_string(s.w) + ")";
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(shape), data_(std::move(values)) {
  if (data_.size() != shape_.size()) {
    raise(ErrorCode::shape_mismatch, "tensor of shape " + to_string(shape_) +
                                         " given " + std::to_string(data_.size()) +
                                         " values");
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.size() != size()) {
    raise(ErrorCode::shape_mismatch,
          "cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  Tensor out = *this;
  out.shape_ = shape;
  return out;
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

}  // namespace pairfuse
