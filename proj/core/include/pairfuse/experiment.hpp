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
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pairfuse/data_pipeline.hpp"
#include "pairfuse/loss_metrics.hpp"
#include "pairfuse/nn_core.hpp"

namespace pairfuse {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool operator==(const AdamConfig&) const = default;
};

/// Adam with bias correction; one moment pair per model parameter.
class Adam {
 public:
  Adam(const Model& model, AdamConfig cfg);

  void step(Model& model, const std::vector<Tensor>& grads, double lr);
  std::size_t steps() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

enum class Monitor { val_loss, train_loss };
std::string_view to_string(Monitor m);
Monitor monitor_from_string(std::string_view text);

struct PlateauConfig {
  Monitor monitor = Monitor::val_loss;
  double factor = 0.1;
  std::size_t patience = 5;
  double threshold = 1e-4;  // relative
  double min_lr = 1e-6;
  bool operator==(const PlateauConfig&) const = default;
};

struct PlateauState {
  double lr = 1e-3;
  double best = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs = 0;
  std::size_t reductions = 0;
};

/// A value improves when it is below best * (1 - threshold). After `patience`
/// consecutive non-improving values lr drops by `factor`, floored at min_lr,
/// and the counter restarts.
PlateauState lr_plateau_step(PlateauState state, const PlateauConfig& cfg, double monitored);

struct TrainConfig {
  ModelConfig model;
  std::size_t epochs = 60;
  std::size_t seeds = 5;
  std::uint64_t seed = 0;  // first seed; runs use seed, seed + 1, ...
  std::size_t batch_size = 32;
  AdamConfig adam;
  PlateauConfig plateau;
  double val_fraction = 0.1;
  bool augment = true;
  AugmentParams augmentation;
  bool operator==(const TrainConfig&) const = default;
};

/// Throws invalid_config on epochs, seeds, batch size or lr out of range.
void validate(const TrainConfig& cfg);

/// Desk-scale defaults around a Fuse_HV model.
TrainConfig default_train_config(FusePlan plan, std::size_t input_size = 32);

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(std::string_view text);

/// Hash of the canonical JSON form, seeds included.
std::string train_config_hash(const TrainConfig& cfg);

struct EvalMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_f1;
  std::vector<std::vector<std::size_t>> confusion;
  bool operator==(const EvalMetrics&) const = default;
};

EvalMetrics compute_metrics(std::span<const int> preds, std::span<const int> labels,
                            std::size_t classes = kDamageClasses);

/// Runs the model over `pairs` (normalised with `stats`). No parameter updates.
/// Throws shape_mismatch when crops disagree with the model input.
EvalMetrics evaluate(const Model& model, std::span<const SamplePair> pairs,
                     const ChannelStats& stats, std::size_t batch_size = 64);

/// Argmax predictions in input order.
std::vector<int> predict(const Model& model, std::span<const SamplePair> pairs,
                         const ChannelStats& stats, std::size_t batch_size = 64);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  bool operator==(const EpochRecord&) const = default;
};

struct RunResult {
  std::uint64_t seed = 0;
  std::optional<int> h_fid;
  std::optional<int> v_fid;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  double final_train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double test_macro_f1 = 0.0;
  std::vector<double> test_per_class_f1;
  std::vector<std::vector<std::size_t>> test_confusion;
  std::size_t test_samples = 0;
  std::size_t parameters = 0;
  double wall_seconds = 0.0;  // not part of equality or the results files
  bool operator==(const RunResult& o) const;
};

struct TrainOutcome {
  RunResult result;
  Model model;  // best-validation checkpoint
  ChannelStats stats;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains one seed. Normalisation stats come from the train split; 10% of it
/// (stratified, seeded) is held out to drive the plateau scheduler and the
/// best-model checkpoint. Test metrics use that checkpoint.
/// Throws dataset_error, diverged_loss.
TrainOutcome train(const TrainConfig& cfg, const PairDataset& data, std::uint64_t seed,
                   const EpochCallback& on_epoch = {});

/// The held-out validation indices (into data.samples) for a seed.
std::vector<std::size_t> validation_indices(const PairDataset& data, double fraction,
                                            std::uint64_t seed);

struct GridCell {
  int h_fid = 0;
  int v_fid = 0;
  std::vector<RunResult> runs;
  bool failed = false;
  std::string error;

  double mean_test_accuracy() const;
  double mean_test_f1() const;
  bool operator==(const GridCell& o) const = default;
};

struct GridResult {
  std::vector<int> h_fids;
  std::vector<int> v_fids;
  std::string config_hash;
  std::vector<GridCell> cells;  // row-major over (h_fids, v_fids)
  std::size_t computed_cells = 0;  // cells trained by this call, not loaded
  bool complete = true;

  const GridCell* cell(int h, int v) const;
  bool operator==(const GridResult& o) const {
    return h_fids == o.h_fids && v_fids == o.v_fids && config_hash == o.config_hash &&
           cells == o.cells && complete == o.complete;
  }
};

struct GridConfig {
  std::vector<int> h_fids;
  std::vector<int> v_fids;
  TrainConfig train;
  std::filesystem::path out_dir;
  std::size_t jobs = 1;
  /// Stop after training this many new cells (leaves the grid incomplete).
  std::optional<std::size_t> max_new_cells;
  /// Keep wall-clock seconds in cell files and write timing.csv.
  bool record_timing = false;
};

/// Default fid lists: every fid but 4 and 10 horizontally, but 3 and 4 vertically.
std::vector<int> default_h_fids();
std::vector<int> default_v_fids();

using CellCallback = std::function<void(const GridCell&, bool computed)>;

/// Trains every (h, v) cell over cfg.train.seeds seeds with a Fuse_HV model.
/// Each finished cell is written to out_dir/cells/ right away; existing cell
/// files with a matching config hash are loaded instead of retrained. A cell
/// whose training throws is recorded as failed and the grid moves on.
GridResult grid_cross_analysis(const GridConfig& cfg, const PairDataset& data,
                               const CellCallback& on_cell = {});

struct LatencySummary {
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double mean_ms = 0.0;
  bool operator==(const LatencySummary&) const = default;
};

LatencySummary summarize_latency(std::span<const double> samples_ms);

struct FidLatency {
  int fid = 0;
  std::vector<double> samples_ms;
  LatencySummary summary;
  double overhead_ratio = 0.0;  // median / baseline median
  bool operator==(const FidLatency&) const = default;
};

struct BenchConfig {
  Shape shape{1, 32, 32, 32};
  std::vector<int> fids{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13};
  std::size_t n_inputs = 1000;
  std::size_t warmup = 10;
  std::uint64_t seed = 0;
};

struct BenchReport {
  Shape shape;
  std::size_t n_inputs = 0;
  std::size_t warmup = 0;
  std::vector<double> baseline_ms;
  LatencySummary baseline;
  std::vector<FidLatency> fids;
  bool operator==(const BenchReport&) const = default;
};

/// Per input, times the pass-through (no-fuse) forward and then fuse_forward
/// for each fid on the same tensors. Summaries skip the first `warmup`
/// samples; the full series are kept.
BenchReport bench_fuse_overhead(const BenchConfig& cfg);

}  // namespace pairfuse
