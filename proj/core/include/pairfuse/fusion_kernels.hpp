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
#include <optional>
#include <string>

#include "pairfuse/error.hpp"
#include "pairfuse/tensor.hpp"

namespace pairfuse {

/// Identifier of one of the thirteen fusion functions (1..13).
///
///    1  a * b                       8  min(a, b)
///    2  |a - b|                     9  |a^2 * b^2|
///    3  sqrt(|a^2 - b^2|)          10  per-slice a @ b^T
///    4  per-slice a @ b            11  sample std of {a, b}
///    5  a + b                      12  sqrt(a^2 + b^2)
///    6  mean(a, b)                 13  sample variance of {a, b}
///    7  max(a, b)
///
/// All of them preserve the input shape. 4 and 10 multiply the (H, W) planes
/// of every (batch, channel) pair and therefore need H == W.
class FuseFunctionId {
 public:
  static constexpr int kMin = 1;
  static constexpr int kMax = 13;

  /// Throws invalid_config when `id` is outside [1, 13].
  explicit FuseFunctionId(int id);

  int value() const noexcept { return id_; }
  bool square_spatial_only() const noexcept { return id_ == 4 || id_ == 10; }
  bool commutative() const noexcept {
    return id_ != 3 && id_ != 4 && id_ != 10;
  }
  /// Short human-readable name, e.g. "abs_diff".
  std::string_view name() const noexcept;

  static std::array<FuseFunctionId, 13> all();

  bool operator==(const FuseFunctionId&) const = default;
  auto operator<=>(const FuseFunctionId&) const = default;

 private:
  int id_;
};

struct FuseGradPair {
  Tensor grad_a;
  Tensor grad_b;
};

struct ShapeProblem {
  ErrorCode code;
  std::string message;
};

/// Reports why fuse_forward would reject the shapes, or nullopt when it
/// would accept them. Does no arithmetic.
std::optional<ShapeProblem> validate_shapes(FuseFunctionId fid, const Shape& a,
                                            const Shape& b);

Tensor fuse_forward(FuseFunctionId fid, const Tensor& a, const Tensor& b);

/// Gradients w.r.t. both inputs given dL/d(output) = upstream.
///
/// Conventions at non-differentiable points: sign(0) = 0 for 2 and 11, ties
/// of max/min route the whole upstream value to `a`, and square roots in 3
/// and 12 are differentiated as sqrt(u + 1e-12).
FuseGradPair fuse_backward(FuseFunctionId fid, const Tensor& a, const Tensor& b,
                           const Tensor& upstream);

inline constexpr double kSqrtGradEpsilon = 1e-12;

}  // namespace pairfuse
