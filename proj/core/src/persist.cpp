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

#include "pairfuse/persist.hpp"

#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "pairfuse/error.hpp"

namespace pairfuse {

using nlohmann::json;
namespace fs = std::filesystem;

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::io_error, "cannot write " + tmp.string());
    out << text;
    if (!out.flush()) raise(ErrorCode::io_error, "short write on " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) raise(ErrorCode::io_error, "cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::io_error, "cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

namespace {

std::string num(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

json document(std::string_view kind) {
  return json{{"schema_version", kResultsSchemaVersion}, {"kind", std::string(kind)}};
}

json parse_document(const fs::path& path, std::string_view kind) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    raise(ErrorCode::parse_error, path.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("schema_version")) {
    raise(ErrorCode::parse_error, path.string() + ": missing schema_version");
  }
  const int version = j.at("schema_version").get<int>();
  if (version != kResultsSchemaVersion) {
    raise(ErrorCode::schema_version_mismatch, path.string() + ": schema version " + std::to_string(version) +
                                                  ", this build reads " +
                                                  std::to_string(kResultsSchemaVersion));
  }
  if (!kind.empty() && j.value("kind", std::string()) != kind) {
    raise(ErrorCode::validation_error,
          path.string() + ": expected a '" + std::string(kind) + "' file, found '" + j.value("kind", std::string()) + "'");
  }
  return j;
}

json opt_int(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }
std::optional<int> get_opt_int(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<int>();
}

json run_json(const RunResult& r, bool timing) {
  json epochs = json::array();
  for (const EpochRecord& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"train_accuracy", e.train_accuracy},
                      {"val_loss", e.val_loss},
                      {"lr", e.lr}});
  }
  json j{{"seed", r.seed},
         {"h_fid", opt_int(r.h_fid)},
         {"v_fid", opt_int(r.v_fid)},
         {"epochs", epochs},
         {"best_epoch", r.best_epoch},
         {"best_val_loss", r.best_val_loss},
         {"final_train_accuracy", r.final_train_accuracy},
         {"test_accuracy", r.test_accuracy},
         {"test_macro_f1", r.test_macro_f1},
         {"test_per_class_f1", r.test_per_class_f1},
         {"test_confusion", r.test_confusion},
         {"test_samples", r.test_samples},
         {"parameters", r.parameters}};
  if (timing) j["wall_seconds"] = r.wall_seconds;
  return j;
}

RunResult run_from(const json& j) {
  RunResult r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.h_fid = get_opt_int(j, "h_fid");
  r.v_fid = get_opt_int(j, "v_fid");
  for (const json& e : j.at("epochs")) {
    r.epochs.push_back(EpochRecord{e.at("epoch").get<std::size_t>(), e.at("train_loss").get<double>(),
                                   e.at("train_accuracy").get<double>(), e.at("val_loss").get<double>(),
                                   e.at("lr").get<double>()});
  }
  r.best_epoch = j.at("best_epoch").get<std::size_t>();
  r.best_val_loss = j.at("best_val_loss").get<double>();
  r.final_train_accuracy = j.at("final_train_accuracy").get<double>();
  r.test_accuracy = j.at("test_accuracy").get<double>();
  r.test_macro_f1 = j.at("test_macro_f1").get<double>();
  r.test_per_class_f1 = j.at("test_per_class_f1").get<std::vector<double>>();
  r.test_confusion = j.at("test_confusion").get<std::vector<std::vector<std::size_t>>>();
  r.test_samples = j.at("test_samples").get<std::size_t>();
  r.parameters = j.at("parameters").get<std::size_t>();
  r.wall_seconds = j.value("wall_seconds", 0.0);
  for (double acc : {r.final_train_accuracy, r.test_accuracy}) {
    if (!(acc >= 0.0 && acc <= 1.0)) raise(ErrorCode::validation_error, "accuracy outside [0, 1]");
  }
  return r;
}

template <typename Fn>
auto guarded(const fs::path& path, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    raise(ErrorCode::parse_error, path.string() + ": " + e.what());
  }
}

json cell_json(const GridCell& c, bool timing) {
  json runs = json::array();
  for (const RunResult& r : c.runs) runs.push_back(run_json(r, timing));
  return json{{"h_fid", c.h_fid}, {"v_fid", c.v_fid}, {"failed", c.failed}, {"error", c.error}, {"runs", runs}};
}

GridCell cell_from(const json& j) {
  GridCell c;
  c.h_fid = j.at("h_fid").get<int>();
  c.v_fid = j.at("v_fid").get<int>();
  c.failed = j.at("failed").get<bool>();
  c.error = j.at("error").get<std::string>();
  for (const json& r : j.at("runs")) c.runs.push_back(run_from(r));
  return c;
}

json summary_json(const LatencySummary& s) {
  return json{{"median_ms", s.median_ms}, {"p95_ms", s.p95_ms}, {"mean_ms", s.mean_ms}};
}

LatencySummary summary_from(const json& j) {
  return LatencySummary{j.at("median_ms").get<double>(), j.at("p95_ms").get<double>(), j.at("mean_ms").get<double>()};
}

}  // namespace

std::string results_kind(const fs::path& path) { return parse_document(path, "").value("kind", std::string()); }

void save_runs(const RunsFile& file, const fs::path& path, bool include_timing) {
  json doc = document("runs");
  doc["config_hash"] = file.config_hash;
  doc["config"] = json::parse(train_config_to_json(file.config));
  json runs = json::array();
  for (const RunResult& r : file.runs) runs.push_back(run_json(r, include_timing));
  doc["runs"] = runs;
  write_text_file(path, doc.dump(2) + "\n");
}

RunsFile load_runs(const fs::path& path) {
  const json doc = parse_document(path, "runs");
  return guarded(path, [&] {
    RunsFile f;
    f.config_hash = doc.at("config_hash").get<std::string>();
    f.config = train_config_from_json(doc.at("config").dump());
    for (const json& r : doc.at("runs")) f.runs.push_back(run_from(r));
    return f;
  });
}

fs::path cell_path(const fs::path& grid_dir, int h_fid, int v_fid) {
  return grid_dir / "cells" / ("h" + std::to_string(h_fid) + "_v" + std::to_string(v_fid) + ".json");
}

void save_cell(const GridCell& cell, const std::string& config_hash, const fs::path& path, bool include_timing) {
  json doc = document("grid_cell");
  doc["config_hash"] = config_hash;
  doc["cell"] = cell_json(cell, include_timing);
  write_text_file(path, doc.dump(2) + "\n");
}

std::optional<GridCell> load_cell(const fs::path& path, const std::string& config_hash) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    const json doc = parse_document(path, "grid_cell");
    if (doc.at("config_hash").get<std::string>() != config_hash) return std::nullopt;
    return cell_from(doc.at("cell"));
  } catch (const Error&) {
    return std::nullopt;
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

std::string grid_results_csv(const GridResult& grid) {
  std::string csv = "h_fid,v_fid,seed,train_acc,test_acc,test_f1,params\n";
  for (const GridCell& c : grid.cells) {
    for (const RunResult& r : c.runs) {
      csv += std::to_string(c.h_fid) + "," + std::to_string(c.v_fid) + "," + std::to_string(r.seed) + "," +
             num(r.final_train_accuracy) + "," + num(r.test_accuracy) + "," + num(r.test_macro_f1) + "," +
             std::to_string(r.parameters) + "\n";
    }
  }
  return csv;
}

std::string grid_timing_csv(const GridResult& grid) {
  std::string csv = "h_fid,v_fid,seed,wall_s\n";
  for (const GridCell& c : grid.cells) {
    for (const RunResult& r : c.runs) {
      csv += std::to_string(c.h_fid) + "," + std::to_string(c.v_fid) + "," + std::to_string(r.seed) + "," +
             num(r.wall_seconds) + "\n";
    }
  }
  return csv;
}

void save_grid(const GridResult& grid, const fs::path& dir, bool include_timing) {
  json doc = document("grid");
  doc["config_hash"] = grid.config_hash;
  doc["h_fids"] = grid.h_fids;
  doc["v_fids"] = grid.v_fids;
  doc["complete"] = grid.complete;
  json cells = json::array();
  for (const GridCell& c : grid.cells) {
    cells.push_back({{"h_fid", c.h_fid},
                     {"v_fid", c.v_fid},
                     {"failed", c.failed},
                     {"error", c.error},
                     {"seeds", c.runs.size()},
                     {"mean_test_accuracy", c.mean_test_accuracy()},
                     {"mean_test_f1", c.mean_test_f1()},
                     {"file", cell_path(fs::path(), c.h_fid, c.v_fid).generic_string()}});
  }
  doc["cells"] = cells;
  write_text_file(dir / "summary.json", doc.dump(2) + "\n");
  write_text_file(dir / "results.csv", grid_results_csv(grid));
  if (include_timing) write_text_file(dir / "timing.csv", grid_timing_csv(grid));
}

GridResult load_grid(const fs::path& dir) {
  const fs::path summary = dir / "summary.json";
  const json doc = parse_document(summary, "grid");
  return guarded(summary, [&] {
    GridResult g;
    g.config_hash = doc.at("config_hash").get<std::string>();
    g.h_fids = doc.at("h_fids").get<std::vector<int>>();
    g.v_fids = doc.at("v_fids").get<std::vector<int>>();
    g.complete = doc.at("complete").get<bool>();
    for (const json& c : doc.at("cells")) {
      const fs::path p = dir / c.at("file").get<std::string>();
      const json cell_doc = parse_document(p, "grid_cell");
      g.cells.push_back(guarded(p, [&] { return cell_from(cell_doc.at("cell")); }));
    }
    return g;
  });
}

void save_bench(const BenchReport& r, const fs::path& path) {
  json doc = document("bench");
  doc["shape"] = {r.shape.n, r.shape.c, r.shape.h, r.shape.w};
  doc["n_inputs"] = r.n_inputs;
  doc["warmup"] = r.warmup;
  doc["baseline"] = {{"samples_ms", r.baseline_ms}, {"summary", summary_json(r.baseline)}};
  json fids = json::array();
  for (const FidLatency& f : r.fids) {
    fids.push_back({{"fid", f.fid},
                    {"samples_ms", f.samples_ms},
                    {"summary", summary_json(f.summary)},
                    {"overhead_ratio", f.overhead_ratio}});
  }
  doc["fids"] = fids;
  write_text_file(path, doc.dump(2) + "\n");
}

BenchReport load_bench(const fs::path& path) {
  const json doc = parse_document(path, "bench");
  return guarded(path, [&] {
    BenchReport r;
    const auto s = doc.at("shape").get<std::vector<std::size_t>>();
    if (s.size() != 4) raise(ErrorCode::validation_error, path.string() + ": shape must have 4 extents");
    r.shape = Shape{s[0], s[1], s[2], s[3]};
    r.n_inputs = doc.at("n_inputs").get<std::size_t>();
    r.warmup = doc.at("warmup").get<std::size_t>();
    r.baseline_ms = doc.at("baseline").at("samples_ms").get<std::vector<double>>();
    r.baseline = summary_from(doc.at("baseline").at("summary"));
    for (const json& f : doc.at("fids")) {
      r.fids.push_back(FidLatency{f.at("fid").get<int>(), f.at("samples_ms").get<std::vector<double>>(),
                                  summary_from(f.at("summary")), f.at("overhead_ratio").get<double>()});
    }
    if (r.baseline_ms.size() != r.n_inputs) {
      raise(ErrorCode::validation_error, path.string() + ": sample count differs from n_inputs");
    }
    return r;
  });
}

std::string bench_latency_csv(const BenchReport& r) {
  std::string csv = "index,series,ms\n";
  for (std::size_t i = 0; i < r.baseline_ms.size(); ++i) {
    csv += std::to_string(i) + ",baseline," + num(r.baseline_ms[i]) + "\n";
  }
  for (const FidLatency& f : r.fids) {
    for (std::size_t i = 0; i < f.samples_ms.size(); ++i) {
      csv += std::to_string(i) + ",fid" + std::to_string(f.fid) + "," + num(f.samples_ms[i]) + "\n";
    }
  }
  return csv;
}

}  // namespace pairfuse
