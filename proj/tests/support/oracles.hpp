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
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "pairfuse/data_pipeline.hpp"
#include "pairfuse/fusion_kernels.hpp"
#include "pairfuse/geometry.hpp"
#include "pairfuse/model_config.hpp"
#include "pairfuse/tensor.hpp"

namespace pairfuse::testing {

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0);

/// Scalar-loop reference for every fusion function; fids 4 and 10 use a naive
/// triple loop per (n, c) plane.
Tensor fuse_oracle(int fid, const Tensor& a, const Tensor& b);

/// Direct nested-loop convolution with zero padding.
Tensor conv2d_oracle(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
                     std::size_t pad);

/// |x - y| / max(1, |x|, |y|), the largest over all elements.
double max_relative_error(const Tensor& x, const Tensor& y);

/// Central differences of f with respect to every entry of `values`.
std::vector<double> central_differences(const std::function<double()>& f, std::span<double> values,
                                        double step = 1e-4);

/// |a - n| / max(|a|, |n|, floor).
double gradient_error(double analytic, double numeric, double floor = 1e-6);

/// Rank-4 shape with small random extents; square planes on request.
Shape random_shape(std::mt19937_64& rng, bool square);

/// False when any element pair sits within 1e-2 of a kink of the fusion function.
bool away_from_kinks(int fid, const Tensor& a, const Tensor& b);

/// Worst gradient_error of fuse_backward against central differences of
/// sum(g * fuse(a, b)) over `cases` kink-free random draws.
double fuse_backward_worst_error(FuseFunctionId fid, std::mt19937_64& rng, int cases = 40);

/// Worst gradient_error over every parameter of a randomly initialised
/// tiny_config(plan) model under weighted MSE on a batch of three. Draws that
/// land on a ReLU or max-pool kink are replaced; infinity if 20 draws all do.
double model_gradient_worst_error(const FusePlan& plan, std::uint64_t seed);

/// Minimum bounding-rectangle area over orientations sampled every `step_deg`.
double rotation_sweep_min_area(std::span<const Point2> points, double step_deg = 0.1);

/// Star-shaped polygon of 4-12 vertices, radii in [0.5, 1] of a random scale,
/// like a building footprint.
std::vector<Point2> random_footprint(std::mt19937_64& rng);

/// Axis-aligned bounding-box area.
double aabb_area(std::span<const Point2> points);

/// Small three-channel model for fast training tests: 8x8 inputs, stages (4, 8).
ModelConfig small_rgb_config(FusePlan plan, std::size_t size = 8);

/// Synthetic dataset tuned for quick tests.
PairDataset small_dataset(std::size_t n, std::size_t size, std::uint64_t seed);

}  // namespace pairfuse::testing
