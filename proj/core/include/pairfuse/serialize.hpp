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
#include <filesystem>
#include <string>
#include <string_view>

#include "pairfuse/nn_core.hpp"

namespace pairfuse {

/// Model description as JSON:
///   {"input": [c, h, w],
///    "stages": [{"in": 3, "out": 16, "kernel": 3, "stride": 1, "pool": "max2"}, ...],
///    "post_stages": [...],
///    "head": {"layers": [256, 128, 64, 4], "classes": 4},
///    "plan": {"mode": "fuse_hv", "h_fid": 11, "v_fid": 8}}
/// "in": 0 on a post stage means "take it from the shape before it".
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(std::string_view text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string hash_hex(std::uint64_t hash);

/// Hash of the canonical JSON form of the config.
std::string config_hash(const ModelConfig& cfg);

inline constexpr int kCheckpointVersion = 1;

/// JSON container: {"format": "pairfuse-checkpoint", "version": 1,
/// "config": {...}, "config_hash": "...", "parameters": [{"name", "shape", "values"}]}.
/// Values are written at round-trip precision.
void save_checkpoint(const Model& model, const std::filesystem::path& path);

/// Rebuilds the graph from the stored config and fills parameters by name.
/// Throws schema_version_mismatch, parse_error or validation_error.
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace pairfuse
