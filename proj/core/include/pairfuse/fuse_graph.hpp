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
#include <optional>

#include "pairfuse/fusion_kernels.hpp"
#include "pairfuse/model_config.hpp"
#include "pairfuse/nn_core.hpp"

namespace pairfuse {

/// Horizontal fusion of the two branch tensors at the same depth.
Tensor fuse_h_apply(FuseFunctionId h_fid, const Tensor& ft_a, const Tensor& ft_b);

/// Brings an earlier-stage tensor to a later stage's (C, H, W): spatial
/// average pooling, then a pointwise channel projection when the channel
/// counts differ. Without a projection the channel count must already match.
struct ShapeAdapter {
  Shape target;  // n is ignored
  std::optional<Tensor> projection_weight;  // (C_out, C_in, 1, 1)
  std::optional<Tensor> projection_bias;    // (1, C_out, 1, 1)
};

Tensor apply_adapter(const ShapeAdapter& adapter, const Tensor& x);

/// Vertical fusion: fuse(v_fid, adapter(earlier), later).
Tensor fuse_v_apply(FuseFunctionId v_fid, const Tensor& earlier, const Tensor& later,
                    const ShapeAdapter& adapter);

/// Each stage output pair is fused horizontally; the fused maps are average
/// pooled to the last stage's spatial size, concatenated on channels and fed
/// to the post-stages and head. Branch weights are independent.
Model build_fuse_h_model(const ModelConfig& cfg, FuseFunctionId h_fid);

/// In each branch, stage k's output is fused with the adapted fused output of
/// stage k-1 (residual-style chain over consecutive stages). The two branch
/// results are concatenated before the post-stages.
Model build_fuse_v_model(const ModelConfig& cfg, FuseFunctionId v_fid);

/// Horizontal fusion at every stage, then vertical fusion as a pairwise tree:
/// (f1, f2), (f3, f4), ... and again over the results until a single tensor
/// remains. No concatenation.
Model build_fuse_hv_model(const ModelConfig& cfg, FuseFunctionId h_fid, FuseFunctionId v_fid);

enum class RetrofitMode { single, double_path, concat_baseline };

/// One fusion point between a staged extractor and the head. `single` shares
/// the extractor between both images, `double_path` keeps two copies,
/// `concat_baseline` keeps two copies and concatenates instead of fusing.
Model retrofit_backbone(const ModelConfig& backbone, RetrofitMode mode,
                        std::optional<FuseFunctionId> h_fid);

/// Dispatches on cfg.plan.mode.
Model build_model(const ModelConfig& cfg);

/// build_model followed by initialize_parameters.
Model init_parameters(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace pairfuse
