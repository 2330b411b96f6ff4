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
#include <optional>
#include <string>
#include <vector>

#include "pairfuse/fusion_kernels.hpp"

namespace pairfuse {

enum class PoolKind { none, avg2, max2 };

/// One feature-extraction block: same-padded convolution, ReLU, optional 2x2 pool.
struct StageSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  PoolKind pool = PoolKind::none;

  bool operator==(const StageSpec&) const = default;
};

/// Widths of the affine layers; the last one must equal out_classes.
struct MLPSpec {
  std::vector<std::size_t> layer_widths;
  std::size_t out_classes = 4;

  bool operator==(const MLPSpec&) const = default;
};

enum class Architecture {
  fuse_h,
  fuse_v,
  fuse_hv,
  retrofit_single,
  retrofit_double,
  concat_baseline,
};

struct FusePlan {
  Architecture mode = Architecture::fuse_hv;
  std::optional<FuseFunctionId> h_fid;
  std::optional<FuseFunctionId> v_fid;

  bool operator==(const FusePlan&) const = default;
};

/// Declarative description of a two-branch network. `stages` describes one
/// extraction branch (both branches share the layout), `post_stages` run after
/// fusion and `head` is the classifier.
struct ModelConfig {
  std::size_t input_channels = 3;
  std::size_t input_height = 32;
  std::size_t input_width = 32;
  std::vector<StageSpec> stages;
  std::vector<StageSpec> post_stages;
  MLPSpec head;
  FusePlan plan;

  bool operator==(const ModelConfig&) const = default;
};

std::string_view to_string(PoolKind pool);
std::string_view to_string(Architecture arch);
PoolKind pool_kind_from_string(std::string_view text);
Architecture architecture_from_string(std::string_view text);

/// Builds a chain of 3x3 stages with the given widths. Every stage uses `pool`.
std::vector<StageSpec> make_stages(std::size_t in_channels, const std::vector<std::size_t>& widths,
                                   PoolKind pool, std::size_t kernel = 3);

/// Desk-scale defaults: branch widths (16, 32, 64, 64) with 2x2 max pooling,
/// post-stages (64, 64), MLP (256, 128, 64, 4), 32x32 RGB input.
ModelConfig desk_scale_config(FusePlan plan, std::size_t input_size = 32);

/// Two stages on 8x8 inputs; small enough for finite-difference checks.
ModelConfig tiny_config(FusePlan plan);

}  // namespace pairfuse
