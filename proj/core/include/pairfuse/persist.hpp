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

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pairfuse/experiment.hpp"

namespace pairfuse {

inline constexpr int kResultsSchemaVersion = 1;

/// Files carry {"schema_version", "kind", ...}; kind is "runs", "grid_cell",
/// "grid" or "bench". Doubles are written at round-trip precision and keys in
/// sorted order, so save -> load -> save reproduces the same bytes. Wall-clock
/// time is left out unless asked for; it goes to timing.csv instead.
std::string results_kind(const std::filesystem::path& path);

struct RunsFile {
  std::string config_hash;
  TrainConfig config;
  std::vector<RunResult> runs;
};

void save_runs(const RunsFile& file, const std::filesystem::path& path, bool include_timing = false);
RunsFile load_runs(const std::filesystem::path& path);

void save_cell(const GridCell& cell, const std::string& config_hash,
               const std::filesystem::path& path, bool include_timing = false);
/// nullopt when the file is missing, unreadable or from another config.
std::optional<GridCell> load_cell(const std::filesystem::path& path, const std::string& config_hash);

std::filesystem::path cell_path(const std::filesystem::path& grid_dir, int h_fid, int v_fid);

/// results.csv: one row per seed per cell
///   h_fid,v_fid,seed,train_acc,test_acc,test_f1,params
/// timing.csv: h_fid,v_fid,seed,wall_s
std::string grid_results_csv(const GridResult& grid);
std::string grid_timing_csv(const GridResult& grid);

/// Writes summary.json and results.csv (plus timing.csv on request) into `dir`.
void save_grid(const GridResult& grid, const std::filesystem::path& dir, bool include_timing = false);
/// Reads summary.json plus the cell files it lists.
GridResult load_grid(const std::filesystem::path& dir);

void save_bench(const BenchReport& report, const std::filesystem::path& path);
BenchReport load_bench(const std::filesystem::path& path);

/// index,series,ms with series "baseline" or "fid<k>".
std::string bench_latency_csv(const BenchReport& report);

/// Writes `text` to `path` through a temporary file and rename.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace pairfuse
