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

#include <cstdint>
#include <span>
#include <vector>

#include "pairfuse/model_config.hpp"
#include "pairfuse/tensor.hpp"

/// Batched tensor primitives with explicit backward passes.
namespace pairfuse::ops {

std::size_t conv_output_extent(std::size_t extent, std::size_t kernel, std::size_t stride,
                               std::size_t pad);

/// weight (Cout, Cin, k, k), bias (1, Cout, 1, 1).
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad);

/// Accumulates into grad_weight / grad_bias; writes grad_x when non-null.
void conv2d_backward(const Tensor& x, const Tensor& weight, std::size_t stride, std::size_t pad,
                     const Tensor& grad_y, Tensor* grad_x, Tensor& grad_weight,
                     Tensor& grad_bias);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& y, const Tensor& grad_y);

/// 2x2 window, stride 2, floor. `argmax` receives per-output source offsets
/// for max pooling.
Tensor pool2(const Tensor& x, PoolKind kind, std::vector<std::uint32_t>* argmax);
Tensor pool2_backward(const Shape& input_shape, PoolKind kind,
                      const std::vector<std::uint32_t>& argmax, const Tensor& grad_y);

/// Average over bins [floor(i*H/oh), ceil((i+1)*H/oh)).
Tensor adaptive_avg_pool(const Tensor& x, std::size_t out_h, std::size_t out_w);
Tensor adaptive_avg_pool_backward(const Shape& input_shape, const Tensor& grad_y);

Tensor concat_channels(std::span<const Tensor* const> parts);
/// Adds the matching channel slice of grad_y into each part's gradient.
void concat_channels_backward(const Tensor& grad_y, std::span<Tensor* const> grad_parts);

/// x (N, in, 1, 1), weight (out, in, 1, 1), bias (1, out, 1, 1).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
void linear_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_y, Tensor* grad_x,
                     Tensor& grad_weight, Tensor& grad_bias);

/// Adds b into a elementwise; shapes must match.
void accumulate(Tensor& a, const Tensor& b);

}  // namespace pairfuse::ops
