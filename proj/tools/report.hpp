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
#include <string>
#include <vector>

#include "pairfuse/experiment.hpp"

namespace pairfuse::cli {

struct CellRow {
  int h_fid = 0;
  int v_fid = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double test_f1 = 0.0;
  std::size_t seeds = 0;
};

/// Successful cells averaged over seeds, sorted by test accuracy (desc), then
/// F1 (desc), then (h, v); at most `limit` rows.
std::vector<CellRow> top_cells(const GridResult& grid, std::size_t limit = 5);

std::string top_cells_csv(const std::vector<CellRow>& rows);
std::string top_cells_markdown(const std::vector<CellRow>& rows);

/// heatmap.png, heatmap.csv, top5.csv, top5.md. Returns the written paths.
std::vector<std::filesystem::path> write_grid_report(const GridResult& grid, const std::filesystem::path& dir);

/// latency.png (one series per fid plus the baseline) and latency.csv.
std::vector<std::filesystem::path> write_bench_report(const BenchReport& report, const std::filesystem::path& dir);

/// runs.md with one row per seed.
std::vector<std::filesystem::path> write_runs_report(const std::vector<RunResult>& runs,
                                                     const std::filesystem::path& dir);

}  // namespace pairfuse::cli
