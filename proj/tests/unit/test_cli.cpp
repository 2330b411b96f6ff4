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

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "report.hpp"
#include "pairfuse/loss_metrics.hpp"
#include "pairfuse/persist.hpp"
#include "scratch.hpp"

namespace pairfuse {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::ScratchDir;

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun pf(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  CliRun r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> v;
  for (std::string l; std::getline(in, l);) {
    if (!l.empty()) v.push_back(l);
  }
  return v;
}

void write_lines(const fs::path& p, const std::vector<std::string>& v) {
  std::ofstream out(p);
  for (const auto& l : v) out << l << "\n";
}

// Synth + prepare at 16 px into dir/raw and dir/crops.
void make_crops(const ScratchDir& dir, std::size_t n, std::uint64_t seed = 3) {
  ASSERT_EQ(pf({"synth", "--n", std::to_string(n), "--size", "16", "--seed", std::to_string(seed), "--out",
                (dir / "raw").string()})
                .code,
            0);
  const CliRun r = pf({"prepare", "--manifest", (dir / "raw" / "manifest.jsonl").string(), "--size", "16", "--out",
                    (dir / "crops").string()});
  ASSERT_EQ(r.code, 0) << r.err;
}

std::vector<std::string> train_args(const ScratchDir& dir, const std::string& out) {
  return {"train", "--data", (dir / "crops").string(), "--size", "16", "--epochs", "2", "--seeds", "1",
          "--seed", "7", "--batch-size", "8", "--out", (dir / out).string()};
}

TEST(Cli, HelpOnEverySubcommand) {
  const std::vector<std::pair<std::string, std::vector<std::string>>> cases{
      {"synth", {"--n", "--test-fraction", "--seed", "--out"}},
      {"prepare", {"--manifest", "--margin", "--size"}},
      {"train", {"--data", "--epochs", "--seeds", "--lr", "--arch", "--h-fid", "--v-fid", "--no-augment"}},
      {"eval", {"--checkpoint", "--stats", "--split"}},
      {"grid", {"--h-fids", "--v-fids", "--max-new-cells", "--jobs"}},
      {"bench", {"--n", "--warmup", "--fids", "--shape"}},
      {"report", {"--results"}},
  };
  for (const auto& [cmd, flags] : cases) {
    const CliRun r = pf({cmd, "--help"});
    EXPECT_EQ(r.code, 0) << cmd;
    for (const auto& f : flags) EXPECT_NE(r.out.find(f), std::string::npos) << cmd << " " << f;
  }
  const CliRun top = pf({"--help"});
  EXPECT_EQ(top.code, 0);
  for (const char* cmd : {"synth", "prepare", "train", "eval", "grid", "bench", "report"}) {
    EXPECT_NE(top.out.find(cmd), std::string::npos);
  }
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(pf({"train", "--bogus"}).code, 2);
  EXPECT_EQ(pf({}).code, 2);
  EXPECT_EQ(pf({"frobnicate"}).code, 2);
  EXPECT_EQ(pf({"report"}).code, 2);  // --results is required
  ScratchDir dir("cli_usage");
  EXPECT_EQ(pf({"grid", "--h-fids", "", "--data", dir.path().string(), "--out", dir.path().string()}).code, 2);
  EXPECT_EQ(pf({"grid", "--h-fids", "1,x", "--out", dir.path().string()}).code, 2);
  EXPECT_EQ(pf({"bench", "--fids", "14", "--out", dir.path().string()}).code, 2);
  EXPECT_EQ(pf({"train", "--lr", "-1", "--out", dir.path().string(), "--data", dir.path().string()}).code, 2);
  EXPECT_EQ(pf({"train", "--h-fid", "0", "--out", dir.path().string(), "--data", dir.path().string()}).code, 2);
}

TEST(Cli, PrepareThreeRecords) {
  ScratchDir dir("cli_prepare");
  ASSERT_EQ(pf({"synth", "--n", "20", "--size", "16", "--out", (dir / "raw").string()}).code, 0);
  auto lines = lines_of(dir / "raw" / "manifest.jsonl");
  ASSERT_EQ(lines.size(), 20u);
  lines.resize(3);
  write_lines(dir / "raw" / "three.jsonl", lines);
  const CliRun r = pf({"prepare", "--manifest", (dir / "raw" / "three.jsonl").string(), "--size", "16", "--out",
                    (dir / "crops").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines_of(dir / "crops" / "crops.jsonl").size(), 3u);
  std::size_t pngs = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "crops")) pngs += e.path().extension() == ".png";
  EXPECT_EQ(pngs, 6u);
  EXPECT_TRUE(fs::exists(dir / "crops" / "stats.json"));
  EXPECT_TRUE(fs::exists(dir / "crops" / "class_summary.json"));
}

TEST(Cli, PrepareMissingImageNamesRecord) {
  ScratchDir dir("cli_missing");
  ASSERT_EQ(pf({"synth", "--n", "10", "--size", "16", "--out", (dir / "raw").string()}).code, 0);
  auto lines = lines_of(dir / "raw" / "manifest.jsonl");
  json rec = json::parse(lines[1]);
  rec["pre"] = "images/does_not_exist.png";
  lines[1] = rec.dump();
  write_lines(dir / "raw" / "manifest.jsonl", lines);
  const CliRun r = pf({"prepare", "--manifest", (dir / "raw" / "manifest.jsonl").string(), "--out",
                    (dir / "crops").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("record 2"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("does_not_exist.png"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "crops" / "crops.jsonl"));
}

TEST(Cli, ClassSummaryMatchesWeights) {
  ScratchDir dir("cli_summary");
  const fs::path cfg = dir / "cfg.json";
  write_text_file(cfg, json{{"synth", {{"proportions", {0.4, 0.3, 0.2, 0.1}}}}}.dump());
  ASSERT_EQ(pf({"synth", "--n", "60", "--size", "16", "--config", cfg.string(), "--out", (dir / "raw").string()}).code,
            0);
  ASSERT_EQ(pf({"prepare", "--manifest", (dir / "raw" / "manifest.jsonl").string(), "--size", "16", "--out",
                (dir / "crops").string()})
                .code,
            0);
  const json s = json::parse(read_text_file(dir / "crops" / "class_summary.json"));
  const auto counts = s.at("train").at("counts").get<std::vector<std::size_t>>();
  ASSERT_EQ(counts.size(), 4u);
  const auto w = class_weights(counts).w;
  const auto got = s.at("train").at("weights").get<std::vector<double>>();
  ASSERT_EQ(got.size(), 4u);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(got[k], w[k]);
  std::size_t total = 0;
  for (auto c : counts) total += c;
  EXPECT_EQ(s.at("train").at("total").get<std::size_t>(), total);
}

TEST(Cli, ClassSummaryNotesMissingClass) {
  ScratchDir dir("cli_summary_missing");
  make_crops(dir, 60);  // default proportions leave class 3 empty at this size
  const json s = json::parse(read_text_file(dir / "crops" / "class_summary.json"));
  ASSERT_EQ(s.at("all").at("counts").at(3).get<std::size_t>(), 0u);
  EXPECT_TRUE(s.at("all").at("weights").is_null());
  EXPECT_NE(s.at("all").at("note").get<std::string>().find("ZeroClassCount"), std::string::npos);
}

TEST(Cli, TrainIsReproducibleAndEvalReadsCheckpoint) {
  ScratchDir dir("cli_train");
  make_crops(dir, 40);
  const CliRun a = pf(train_args(dir, "a"));
  ASSERT_EQ(a.code, 0) << a.err;
  const CliRun b = pf(train_args(dir, "b"));
  ASSERT_EQ(b.code, 0) << b.err;
  for (const char* f : {"results.json", "stats.json", "checkpoints/seed_7.json"}) {
    ASSERT_TRUE(fs::exists(dir / "a" / f)) << f;
    EXPECT_TRUE(testing::same_bytes(dir / "a" / f, dir / "b" / f)) << f;
  }
  EXPECT_EQ(results_kind(dir / "a" / "results.json"), "runs");
  EXPECT_EQ(load_runs(dir / "a" / "results.json").runs.size(), 1u);

  // Rerunning into the same directory rewrites the same bytes.
  const std::string before = read_text_file(dir / "a" / "results.json");
  ASSERT_EQ(pf(train_args(dir, "a")).code, 0);
  EXPECT_EQ(read_text_file(dir / "a" / "results.json"), before);

  const CliRun e = pf({"eval", "--checkpoint", (dir / "a" / "checkpoints" / "seed_7.json").string(), "--data",
                    (dir / "crops").string(), "--out", (dir / "ev").string()});
  ASSERT_EQ(e.code, 0) << e.err;
  const json m = json::parse(read_text_file(dir / "ev" / "metrics.json"));
  EXPECT_NEAR(m.at("accuracy").get<double>(), load_runs(dir / "a" / "results.json").runs[0].test_accuracy, 1e-12);

  EXPECT_EQ(pf({"eval", "--checkpoint", (dir / "nope.json").string(), "--data", (dir / "crops").string(), "--out",
                (dir / "ev").string()})
                .code,
            1);
}

TEST(Cli, OutDirPrecedence) {
  ScratchDir dir("cli_out");
  const fs::path cfg = dir / "cfg.json";
  write_text_file(cfg, json{{"out", (dir / "from_config").string()}}.dump());
  ::setenv("PAIRFUSE_OUT", (dir / "from_env").string().c_str(), 1);
  ASSERT_EQ(pf({"synth", "--n", "8", "--size", "16", "--config", cfg.string(), "--out", (dir / "flag").string()}).code,
            0);
  EXPECT_TRUE(fs::exists(dir / "flag" / "manifest.jsonl"));
  ASSERT_EQ(pf({"synth", "--n", "8", "--size", "16", "--config", cfg.string()}).code, 0);
  EXPECT_TRUE(fs::exists(dir / "from_config" / "manifest.jsonl"));
  ASSERT_EQ(pf({"synth", "--n", "8", "--size", "16"}).code, 0);
  EXPECT_TRUE(fs::exists(dir / "from_env" / "manifest.jsonl"));
  ::unsetenv("PAIRFUSE_OUT");
}

TEST(Cli, SynthIsIdempotent) {
  ScratchDir dir("cli_synth");
  ASSERT_EQ(pf({"synth", "--n", "12", "--size", "16", "--out", (dir / "a").string()}).code, 0);
  ASSERT_EQ(pf({"synth", "--n", "12", "--size", "16", "--out", (dir / "b").string()}).code, 0);
  EXPECT_TRUE(testing::same_bytes(dir / "a" / "manifest.jsonl", dir / "b" / "manifest.jsonl"));
  for (const auto& e : fs::directory_iterator(dir / "a" / "images")) {
    EXPECT_TRUE(testing::same_bytes(e.path(), dir / "b" / "images" / e.path().filename())) << e.path();
  }
}

TEST(Cli, BenchSummarizesAfterWarmup) {
  ScratchDir dir("cli_bench");
  const CliRun r = pf({"bench", "--n", "100", "--warmup", "10", "--fids", "4,5", "--shape", "1,2,8,8", "--out",
                    dir.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const BenchReport rep = load_bench(dir / "bench.json");
  EXPECT_EQ(rep.n_inputs, 100u);
  EXPECT_EQ(rep.warmup, 10u);
  ASSERT_EQ(rep.fids.size(), 2u);
  EXPECT_EQ(rep.baseline_ms.size(), 100u);
  EXPECT_EQ(rep.fids[0].samples_ms.size(), 100u);
  const auto summarized = std::span<const double>(rep.fids[1].samples_ms).subspan(rep.warmup);
  EXPECT_EQ(summarized.size(), 90u);
  EXPECT_EQ(summarize_latency(summarized), rep.fids[1].summary);
  EXPECT_EQ(lines_of(dir / "latency.csv").size(), 1u + 3u * 100u);

  const CliRun rep_run = pf({"report", "--results", (dir / "bench.json").string(), "--out", (dir / "rep").string()});
  ASSERT_EQ(rep_run.code, 0) << rep_run.err;
  EXPECT_TRUE(fs::exists(dir / "rep" / "latency.png"));
  EXPECT_TRUE(fs::exists(dir / "rep" / "latency.csv"));
}

TEST(Cli, GridReportTopTable) {
  ScratchDir dir("cli_grid");
  make_crops(dir, 40);
  const std::vector<std::string> args{"grid", "--h-fids", "2,11", "--v-fids", "5,8", "--data",
                                      (dir / "crops").string(), "--size", "16", "--epochs", "1", "--seeds", "1",
                                      "--out", (dir / "g").string()};
  const CliRun r = pf(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines_of(dir / "g" / "results.csv").size(), 5u);
  const std::string before = read_text_file(dir / "g" / "summary.json");
  const CliRun again = pf(args);
  ASSERT_EQ(again.code, 0);
  EXPECT_NE(again.out.find("0 trained"), std::string::npos) << again.out;
  EXPECT_EQ(read_text_file(dir / "g" / "summary.json"), before);

  const CliRun rep = pf({"report", "--results", (dir / "g").string(), "--out", (dir / "rep").string()});
  ASSERT_EQ(rep.code, 0) << rep.err;
  for (const char* f : {"heatmap.png", "heatmap.csv", "top5.csv", "top5.md"}) {
    EXPECT_TRUE(fs::exists(dir / "rep" / f)) << f;
  }
  const auto top = lines_of(dir / "rep" / "top5.csv");
  ASSERT_EQ(top.size(), 5u);  // header + 4 cells
  const GridResult g = load_grid(dir / "g");
  const auto rows = cli::top_cells(g);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const bool ordered = rows[i - 1].test_accuracy > rows[i].test_accuracy ||
                         (rows[i - 1].test_accuracy == rows[i].test_accuracy &&
                          rows[i - 1].test_f1 >= rows[i].test_f1);
    EXPECT_TRUE(ordered) << i;
  }
  for (const auto& row : rows) {
    const GridCell* c = g.cell(row.h_fid, row.v_fid);
    ASSERT_NE(c, nullptr);
    EXPECT_DOUBLE_EQ(row.test_accuracy, c->mean_test_accuracy());
  }
}

}  // namespace
}  // namespace pairfuse
