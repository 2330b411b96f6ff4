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

#include "pairfuse/model_config.hpp"

#include "pairfuse/error.hpp"

namespace pairfuse {

std::string_view to_string(PoolKind pool) {
  switch (pool) {
    case PoolKind::none: return "none";
    case PoolKind::avg2: return "avg2";
    case PoolKind::max2: return "max2";
  }
  return "none";
}

std::string_view to_string(Architecture arch) {
  switch (arch) {
    case Architecture::fuse_h: return "fuse_h";
    case Architecture::fuse_v: return "fuse_v";
    case Architecture::fuse_hv: return "fuse_hv";
    case Architecture::retrofit_single: return "retrofit_single";
    case Architecture::retrofit_double: return "retrofit_double";
    case Architecture::concat_baseline: return "concat_baseline";
  }
  return "fuse_hv";
}

PoolKind pool_kind_from_string(std::string_view text) {
  for (PoolKind p : {PoolKind::none, PoolKind::avg2, PoolKind::max2}) {
    if (to_string(p) == text) return p;
  }
  raise(ErrorCode::invalid_config, "unknown pool kind '" + std::string(text) + "'");
}

Architecture architecture_from_string(std::string_view text) {
  for (Architecture a : {Architecture::fuse_h, Architecture::fuse_v, Architecture::fuse_hv,
                         Architecture::retrofit_single, Architecture::retrofit_double,
                         Architecture::concat_baseline}) {
    if (to_string(a) == text) return a;
  }
  raise(ErrorCode::invalid_config, "unknown architecture '" + std::string(text) + "'");
}

std::vector<StageSpec> make_stages(std::size_t in_channels, const std::vector<std::size_t>& widths,
                                   PoolKind pool, std::size_t kernel) {
  std::vector<StageSpec> stages;
  stages.reserve(widths.size());
  for (std::size_t width : widths) {
    stages.push_back(StageSpec{in_channels, width, kernel, 1, pool});
    in_channels = width;
  }
  return stages;
}

ModelConfig desk_scale_config(FusePlan plan, std::size_t input_size) {
  ModelConfig cfg;
  cfg.input_channels = 3;
  cfg.input_height = input_size;
  cfg.input_width = input_size;
  cfg.stages = make_stages(3, {16, 32, 64, 64}, PoolKind::max2);
  // in_channels of post-stages are resolved by the graph builder.
  const bool retrofit = plan.mode == Architecture::retrofit_single ||
                        plan.mode == Architecture::retrofit_double ||
                        plan.mode == Architecture::concat_baseline;
  // Retrofit variants fuse right before the head.
  if (!retrofit) cfg.post_stages = make_stages(0, {64, 64}, PoolKind::none);
  cfg.head.layer_widths = {256, 128, 64, 4};
  cfg.head.out_classes = 4;
  cfg.plan = plan;
  return cfg;
}

ModelConfig tiny_config(FusePlan plan) {
  ModelConfig cfg;
  cfg.input_channels = 2;
  cfg.input_height = 8;
  cfg.input_width = 8;
  cfg.stages = make_stages(2, {3, 4}, PoolKind::max2);
  cfg.post_stages = make_stages(0, {3}, PoolKind::none);
  cfg.head.layer_widths = {5, 4};
  cfg.head.out_classes = 4;
  cfg.plan = plan;
  return cfg;
}

}  // namespace pairfuse
