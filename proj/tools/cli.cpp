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

#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <thread>

#include "pairfuse/data_pipeline.hpp"
#include "pairfuse/error.hpp"
#include "pairfuse/experiment.hpp"
#include "pairfuse/fuse_graph.hpp"
#include "pairfuse/loss_metrics.hpp"
#include "pairfuse/persist.hpp"
#include "pairfuse/serialize.hpp"
#include "report.hpp"

namespace pairfuse::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::optional<std::string> config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<std::size_t> size;
};

struct TrainFlags {
  std::optional<std::string> data;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> seeds;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<std::size_t> patience;
  std::optional<double> val_fraction;
  std::optional<std::string> arch;
  std::optional<int> h_fid;
  std::optional<int> v_fid;
  bool no_augment = false;
  bool timing = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON config file; command-line flags override its values");
  sub->add_option("--out", c.out, "Output directory (default: $PAIRFUSE_OUT, else ./pairfuse_out)");
  sub->add_option("--seed", c.seed, "Base random seed");
  sub->add_option("--jobs", c.jobs, "Worker threads for independent runs")->check(CLI::PositiveNumber);
  sub->add_option("--size", c.size, "Square crop / input side in pixels")->check(CLI::Range(8, 4096));
}

void add_train_flags(CLI::App* sub, TrainFlags& f) {
  sub->add_option("--data", f.data, "Crop store directory written by `prepare`");
  sub->add_option("--epochs", f.epochs, "Training epochs per run");
  sub->add_option("--seeds", f.seeds, "Number of seeds (seed, seed+1, ...)");
  sub->add_option("--batch-size", f.batch_size, "Mini-batch size");
  sub->add_option("--lr", f.lr, "Initial Adam learning rate");
  sub->add_option("--patience", f.patience, "Plateau scheduler patience in epochs");
  sub->add_option("--val-fraction", f.val_fraction, "Share of the train split held out for validation");
  sub->add_option("--arch", f.arch, "fuse_h | fuse_v | fuse_hv | retrofit_single | retrofit_double | concat_baseline");
  sub->add_option("--h-fid", f.h_fid, "Horizontal fuse function (1-13)");
  sub->add_option("--v-fid", f.v_fid, "Vertical fuse function (1-13)");
  sub->add_flag("--no-augment", f.no_augment, "Disable training-time augmentation");
  sub->add_flag("--timing", f.timing, "Also record wall-clock seconds (timing.csv)");
}

json load_config(const Common& c) {
  if (!c.config) return json::object();
  json j;
  try {
    j = json::parse(read_text_file(*c.config));
  } catch (const json::exception& e) {
    raise(ErrorCode::parse_error, *c.config + ": " + e.what());
  }
  if (!j.is_object()) raise(ErrorCode::validation_error, *c.config + ": top level must be an object");
  static const std::vector<std::string> known{"out",     "seed", "jobs", "size",  "data",
                                              "train",   "synth", "prepare", "grid", "bench"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      raise(ErrorCode::validation_error, *c.config + ": unknown key '" + key + "'");
    }
  }
  return j;
}

template <typename T>
T pick(const std::optional<T>& flag, const json& cfg, const char* key, T fallback) {
  if (flag) return *flag;
  if (cfg.contains(key)) {
    try {
      return cfg.at(key).get<T>();
    } catch (const json::exception& e) {
      raise(ErrorCode::validation_error, std::string("config key '") + key + "': " + e.what());
    }
  }
  return fallback;
}

const json& section(const json& cfg, const char* key) {
  static const json empty = json::object();
  return cfg.contains(key) ? cfg.at(key) : empty;
}

fs::path out_dir(const Common& c, const json& cfg) {
  if (c.out) return *c.out;
  if (cfg.contains("out")) return cfg.at("out").get<std::string>();
  if (const char* env = std::getenv("PAIRFUSE_OUT"); env != nullptr && *env != '\0') return env;
  return "pairfuse_out";
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    const std::string item = text.substr(start, end - start);
    if (!item.empty()) {
      int v = 0;
      const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || p != item.data() + item.size()) {
        raise(ErrorCode::invalid_config, std::string(what) + ": '" + item + "' is not an integer");
      }
      out.push_back(v);
    }
    start = end + 1;
  }
  if (out.empty()) raise(ErrorCode::invalid_config, std::string(what) + " list is empty");
  return out;
}

std::vector<int> fid_list(const std::optional<std::string>& flag, const json& sec, const char* key,
                          std::vector<int> fallback, const char* what) {
  std::vector<int> fids = fallback;
  if (flag) {
    fids = parse_int_list(*flag, what);
  } else if (sec.contains(key)) {
    fids = sec.at(key).get<std::vector<int>>();
    if (fids.empty()) raise(ErrorCode::invalid_config, std::string(what) + " list is empty");
  }
  for (int f : fids) (void)FuseFunctionId(f);
  return fids;
}

TrainConfig resolve_train(const Common& c, const TrainFlags& f, const json& cfg) {
  TrainConfig t = cfg.contains("train")
                      ? train_config_from_json(cfg.at("train").dump())
                      : default_train_config(FusePlan{Architecture::fuse_hv, FuseFunctionId(11), FuseFunctionId(8)});
  t.seed = pick(c.seed, cfg, "seed", t.seed);
  if (f.epochs) t.epochs = *f.epochs;
  if (f.seeds) t.seeds = *f.seeds;
  if (f.batch_size) t.batch_size = *f.batch_size;
  if (f.lr) t.adam.lr = *f.lr;
  if (f.patience) t.plateau.patience = *f.patience;
  if (f.val_fraction) t.val_fraction = *f.val_fraction;
  if (f.no_augment) t.augment = false;

  FusePlan plan = t.model.plan;
  if (f.arch) plan.mode = architecture_from_string(*f.arch);
  if (f.h_fid) plan.h_fid = FuseFunctionId(*f.h_fid);
  if (f.v_fid) plan.v_fid = FuseFunctionId(*f.v_fid);
  const std::optional<std::size_t> size = c.size ? c.size : cfg.contains("size") ? std::optional(cfg.at("size").get<std::size_t>()) : std::nullopt;
  if (f.arch || (size && *size != t.model.input_height)) {
    t.model = desk_scale_config(plan, size.value_or(t.model.input_height));
  } else {
    t.model.plan = plan;
  }
  validate(t);
  (void)build_model(t.model);
  return t;
}

fs::path data_dir(const TrainFlags& f, const json& cfg) {
  if (f.data) return *f.data;
  if (cfg.contains("data")) return cfg.at("data").get<std::string>();
  raise(ErrorCode::invalid_config, "--data is required (a crop store written by `prepare`)");
}

std::string pct(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

json weights_summary(std::span<const int> labels) {
  const std::vector<std::size_t> counts = class_counts(labels, kDamageClasses);
  json j{{"counts", counts}, {"total", labels.size()}};
  try {
    j["weights"] = class_weights(counts).w;
  } catch (const Error& e) {
    j["weights"] = nullptr;
    j["note"] = e.what();
  }
  return j;
}

// --- subcommands ----------------------------------------------------------

int cmd_synth(const Common& c, std::optional<std::size_t> n, std::optional<double> test_fraction,
              std::ostream& out) {
  const json cfg = load_config(c);
  const json& sec = section(cfg, "synth");
  SynthConfig s;
  s.n_samples = n ? *n : sec.value("n_samples", s.n_samples);
  s.image_size = c.size ? *c.size : sec.value("image_size", pick(std::optional<std::size_t>{}, cfg, "size", s.image_size));
  s.seed = c.seed ? *c.seed : sec.value("seed", pick(std::optional<std::uint64_t>{}, cfg, "seed", s.seed));
  s.test_fraction = test_fraction ? *test_fraction : sec.value("test_fraction", s.test_fraction);
  if (sec.contains("proportions")) s.proportions = sec.at("proportions").get<std::array<double, 4>>();
  if (sec.contains("corruption")) s.corruption = sec.at("corruption").get<std::array<double, 4>>();
  const fs::path dir = out_dir(c, cfg);
  const PairDataset data = synth_generate(s);
  write_synth_dataset(data, dir);
  const auto counts = class_counts(data.labels(), kDamageClasses);
  out << "synth: " << data.samples.size() << " pairs (" << counts[0] << "/" << counts[1] << "/" << counts[2] << "/"
      << counts[3] << "), " << data.indices(Split::test).size() << " test -> " << (dir / "manifest.jsonl").string()
      << "\n";
  return kExitOk;
}

int cmd_prepare(const Common& c, std::optional<std::string> manifest, std::optional<double> margin,
                std::ostream& out, std::ostream& err) {
  const json cfg = load_config(c);
  const json& sec = section(cfg, "prepare");
  if (!manifest && sec.contains("manifest")) manifest = sec.at("manifest").get<std::string>();
  if (!manifest) raise(ErrorCode::invalid_config, "--manifest is required");
  const double m = margin ? *margin : sec.value("margin", 0.0);
  if (!(m >= 0.0)) raise(ErrorCode::invalid_config, "margin must be non-negative");
  const std::size_t size = c.size ? *c.size : pick(std::optional<std::size_t>{}, cfg, "size", std::size_t{32});
  const fs::path dir = out_dir(c, cfg);

  const std::vector<BuildingRecord> records = load_manifest(*manifest);
  PairDataset data;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      data.samples.push_back(prepare_record(records[i], size, m));
      data.splits.push_back(records[i].split);
    } catch (const Error& e) {
      ++failures;
      err << "record " << i + 1 << " (" << records[i].pre_image_path.string() << "): " << e.what() << "\n";
    }
  }
  if (failures > 0) {
    raise(ErrorCode::dataset_error, std::to_string(failures) + " of " + std::to_string(records.size()) +
                                        " records could not be prepared");
  }
  if (data.samples.empty()) raise(ErrorCode::dataset_error, "manifest has no records");
  write_crop_store(data, dir);

  std::vector<SamplePair> train_pairs;
  std::vector<int> all_labels, train_labels;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    all_labels.push_back(data.samples[i].label);
    if (data.splits[i] == Split::train) {
      train_pairs.push_back(data.samples[i]);
      train_labels.push_back(data.samples[i].label);
    }
  }
  const ChannelStats stats = compute_channel_stats(train_pairs.empty() ? data.samples : train_pairs);
  write_text_file(dir / "stats.json", channel_stats_to_json(stats));
  const json summary{{"schema_version", kResultsSchemaVersion},
                     {"kind", "class_summary"},
                     {"all", weights_summary(all_labels)},
                     {"train", weights_summary(train_labels)}};
  write_text_file(dir / "class_summary.json", summary.dump(2) + "\n");
  out << "prepare: " << data.samples.size() << " crop pairs (" << size << "x" << size << ") -> " << dir.string()
      << "\n";
  return kExitOk;
}

PairDataset load_data(const fs::path& dir) {
  if (!fs::exists(dir / "crops.jsonl")) {
    raise(ErrorCode::dataset_error, dir.string() + " has no crops.jsonl; run `prepare` on the manifest first");
  }
  return load_crop_store(dir);
}

int cmd_train(const Common& c, const TrainFlags& f, std::ostream& out) {
  const json cfg = load_config(c);
  const TrainConfig t = resolve_train(c, f, cfg);
  const std::size_t jobs = pick(c.jobs, cfg, "jobs", std::size_t{1});
  const fs::path dir = out_dir(c, cfg);
  const PairDataset data = load_data(data_dir(f, cfg));

  std::vector<std::optional<TrainOutcome>> outcomes(t.seeds);
  std::vector<std::exception_ptr> errors(t.seeds);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next.fetch_add(1); k < t.seeds; k = next.fetch_add(1)) {
      try {
        outcomes[k] = train(t, data, t.seed + k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 1; i < std::min(jobs, t.seeds); ++i) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  RunsFile file{train_config_hash(t), t, {}};
  std::string timing = "seed,wall_s\n";
  for (std::size_t k = 0; k < t.seeds; ++k) {
    const TrainOutcome& o = *outcomes[k];
    file.runs.push_back(o.result);
    save_checkpoint(o.model, dir / "checkpoints" / ("seed_" + std::to_string(o.result.seed) + ".json"));
    timing += std::to_string(o.result.seed) + "," + std::to_string(o.result.wall_seconds) + "\n";
    out << "seed " << o.result.seed << ": train " << pct(o.result.final_train_accuracy) << "  test "
        << pct(o.result.test_accuracy) << "  F1 " << pct(o.result.test_macro_f1) << "  best epoch "
        << o.result.best_epoch << "  params " << o.result.parameters << "\n";
  }
  write_text_file(dir / "stats.json", channel_stats_to_json(outcomes.front()->stats));
  save_runs(file, dir / "results.json");
  if (f.timing) write_text_file(dir / "timing.csv", timing);
  return kExitOk;
}

int cmd_eval(const Common& c, const std::string& checkpoint, std::optional<std::string> stats_path,
             const std::string& split, const TrainFlags& f, std::ostream& out) {
  const json cfg = load_config(c);
  const fs::path dir = out_dir(c, cfg);
  const Model model = load_checkpoint(checkpoint);
  const fs::path sp = stats_path ? fs::path(*stats_path) : fs::path(checkpoint).parent_path().parent_path() / "stats.json";
  const ChannelStats stats = channel_stats_from_json(read_text_file(sp));
  const PairDataset data = load_data(data_dir(f, cfg));
  std::vector<SamplePair> pairs;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    if (split == "all" || to_string(data.splits[i]) == split) pairs.push_back(data.samples[i]);
  }
  if (pairs.empty()) raise(ErrorCode::dataset_error, "no samples in split '" + split + "'");
  const EvalMetrics m = evaluate(model, pairs, stats);
  const json doc{{"schema_version", kResultsSchemaVersion},
                 {"kind", "metrics"},
                 {"split", split},
                 {"samples", pairs.size()},
                 {"accuracy", m.accuracy},
                 {"macro_f1", m.macro_f1},
                 {"per_class_f1", m.per_class_f1},
                 {"confusion", m.confusion}};
  write_text_file(dir / "metrics.json", doc.dump(2) + "\n");
  out << "eval (" << split << ", " << pairs.size() << " pairs): accuracy " << pct(m.accuracy) << "  macro-F1 "
      << pct(m.macro_f1) << "\n";
  return kExitOk;
}

int cmd_grid(const Common& c, const TrainFlags& f, const std::optional<std::string>& h_text,
             const std::optional<std::string>& v_text, std::optional<std::size_t> max_new, std::ostream& out) {
  const json cfg = load_config(c);
  const json& sec = section(cfg, "grid");
  GridConfig g;
  g.h_fids = fid_list(h_text, sec, "h_fids", default_h_fids(), "horizontal fid");
  g.v_fids = fid_list(v_text, sec, "v_fids", default_v_fids(), "vertical fid");
  g.train = resolve_train(c, f, cfg);
  g.out_dir = out_dir(c, cfg);
  g.jobs = pick(c.jobs, cfg, "jobs", std::size_t{1});
  g.max_new_cells = max_new ? max_new : sec.contains("max_new_cells") ? std::optional(sec.at("max_new_cells").get<std::size_t>()) : std::nullopt;
  g.record_timing = f.timing;
  const PairDataset data = load_data(data_dir(f, cfg));
  const GridResult grid = grid_cross_analysis(g, data, [&](const GridCell& cell, bool computed) {
    out << "cell H: " << cell.h_fid << ", V: " << cell.v_fid << "  ";
    if (cell.failed) {
      out << "failed (" << cell.error << ")";
    } else {
      out << "test " << pct(cell.mean_test_accuracy()) << "  F1 " << pct(cell.mean_test_f1()) << "  over "
          << cell.runs.size() << " seeds";
    }
    out << (computed ? "" : "  [loaded]") << "\n";
  });
  out << "grid: " << grid.cells.size() << "/" << g.h_fids.size() * g.v_fids.size() << " cells, "
      << grid.computed_cells << " trained" << (grid.complete ? "" : " (incomplete; rerun to resume)") << " -> "
      << g.out_dir.string() << "\n";
  return kExitOk;
}

int cmd_bench(const Common& c, std::optional<std::size_t> n, std::optional<std::size_t> warmup,
              const std::optional<std::string>& fids, const std::optional<std::string>& shape, std::ostream& out) {
  const json cfg = load_config(c);
  const json& sec = section(cfg, "bench");
  BenchConfig b;
  b.n_inputs = n ? *n : sec.value("n", b.n_inputs);
  b.warmup = warmup ? *warmup : sec.value("warmup", b.warmup);
  b.seed = pick(c.seed, cfg, "seed", b.seed);
  b.fids = fid_list(fids, sec, "fids", b.fids, "fid");
  std::vector<int> dims{static_cast<int>(b.shape.n), static_cast<int>(b.shape.c), static_cast<int>(b.shape.h),
                        static_cast<int>(b.shape.w)};
  if (shape) {
    dims = parse_int_list(*shape, "shape");
  } else if (sec.contains("shape")) {
    dims = sec.at("shape").get<std::vector<int>>();
  }
  if (dims.size() != 4 || std::any_of(dims.begin(), dims.end(), [](int d) { return d < 1; })) {
    raise(ErrorCode::invalid_config, "shape must be four positive extents n,c,h,w");
  }
  b.shape = Shape{static_cast<std::size_t>(dims[0]), static_cast<std::size_t>(dims[1]),
                  static_cast<std::size_t>(dims[2]), static_cast<std::size_t>(dims[3])};
  if (c.size) b.shape.h = b.shape.w = *c.size;
  const fs::path dir = out_dir(c, cfg);
  const BenchReport rep = bench_fuse_overhead(b);
  save_bench(rep, dir / "bench.json");
  write_text_file(dir / "latency.csv", bench_latency_csv(rep));
  out << "bench " << to_string(b.shape) << ", " << rep.n_inputs << " inputs, " << rep.warmup << " warm-up\n";
  out << "  no fuse  median " << rep.baseline.median_ms << " ms  p95 " << rep.baseline.p95_ms << " ms\n";
  for (const FidLatency& fl : rep.fids) {
    out << "  fid " << fl.fid << "  median " << fl.summary.median_ms << " ms  p95 " << fl.summary.p95_ms
        << " ms  x" << fl.overhead_ratio << "\n";
  }
  return kExitOk;
}

int cmd_report(const Common& c, const std::string& results, std::ostream& out) {
  const json cfg = load_config(c);
  const fs::path dir = out_dir(c, cfg);
  fs::path path(results);
  std::vector<fs::path> files;
  if (fs::is_directory(path)) path /= "summary.json";
  const std::string kind = results_kind(path);
  if (kind == "grid") {
    files = write_grid_report(load_grid(path.parent_path()), dir);
  } else if (kind == "bench") {
    files = write_bench_report(load_bench(path), dir);
  } else if (kind == "runs") {
    files = write_runs_report(load_runs(path).runs, dir);
  } else {
    raise(ErrorCode::validation_error, path.string() + ": cannot report on '" + kind + "' files");
  }
  for (const fs::path& p : files) out << "wrote " << p.string() << "\n";
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_config:
    case ErrorCode::validation_error:
    case ErrorCode::parse_error:
      return kExitUsage;
    default:
      return kExitFailure;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"pairfuse: pre/post image-pair damage classification with fuse modules"};
  app.name("pairfuse");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  Common common;
  TrainFlags tf;
  std::optional<std::size_t> n, warmup, max_new;
  std::optional<double> test_fraction, margin;
  std::optional<std::string> manifest, h_fids, v_fids, fids, shape, stats;
  std::string checkpoint, results, split = "test";

  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic pre/post dataset (images + manifest)");
  add_common(synth, common);
  synth->add_option("--n", n, "Number of building pairs");
  synth->add_option("--test-fraction", test_fraction, "Stratified share of pairs in the test split");

  CLI::App* prepare = app.add_subcommand("prepare", "Crop buildings from a manifest into a crop store");
  add_common(prepare, common);
  prepare->add_option("--manifest", manifest, "JSON-lines manifest of building records");
  prepare->add_option("--margin", margin, "Grow the min-area rectangle by this fraction of its side on every edge");

  CLI::App* train_cmd = app.add_subcommand("train", "Train one model over one or more seeds");
  add_common(train_cmd, common);
  add_train_flags(train_cmd, tf);

  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a crop store");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file written by `train`")->required();
  eval_cmd->add_option("--data", tf.data, "Crop store directory");
  eval_cmd->add_option("--stats", stats, "Normalisation stats (default: stats.json next to the checkpoints dir)");
  eval_cmd->add_option("--split", split, "test | train | all")->check(CLI::IsMember({"test", "train", "all"}));

  CLI::App* grid = app.add_subcommand("grid", "Cross-analyse horizontal x vertical fuse functions");
  add_common(grid, common);
  add_train_flags(grid, tf);
  grid->add_option("--h-fids", h_fids, "Comma-separated horizontal fids (default: all but 4 and 10)");
  grid->add_option("--v-fids", v_fids, "Comma-separated vertical fids (default: all but 3 and 4)");
  grid->add_option("--max-new-cells", max_new, "Stop after training this many new cells");

  CLI::App* bench = app.add_subcommand("bench", "Time the fuse module against a pass-through");
  add_common(bench, common);
  bench->add_option("--n", n, "Timed inputs per series")->check(CLI::PositiveNumber);
  bench->add_option("--warmup", warmup, "Leading samples left out of the summaries");
  bench->add_option("--fids", fids, "Comma-separated fids (default: 1-13)");
  bench->add_option("--shape", shape, "Tensor shape n,c,h,w (default 1,32,32,32)");

  CLI::App* report = app.add_subcommand("report", "Render heatmap, top-5 table or latency plot from results");
  add_common(report, common);
  report->add_option("--results", results, "Grid directory, summary.json, bench.json or results.json")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(common, n, test_fraction, out);
    if (prepare->parsed()) return cmd_prepare(common, manifest, margin, out, err);
    if (train_cmd->parsed()) return cmd_train(common, tf, out);
    if (eval_cmd->parsed()) return cmd_eval(common, checkpoint, stats, split, tf, out);
    if (grid->parsed()) return cmd_grid(common, tf, h_fids, v_fids, max_new, out);
    if (bench->parsed()) return cmd_bench(common, n, warmup, fids, shape, out);
    if (report->parsed()) return cmd_report(common, results, out);
  } catch (const Error& e) {
    err << "pairfuse: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "pairfuse: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace pairfuse::cli
