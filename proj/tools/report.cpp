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

#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "pairfuse/error.hpp"
#include "pairfuse/persist.hpp"

namespace pairfuse::cli {

namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_png(const cv::Mat& img, const fs::path& path) {
  fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), img)) raise(ErrorCode::io_error, "cannot write " + path.string());
}

void centered_text(cv::Mat& img, const std::string& text, cv::Point centre, double scale, cv::Scalar colour) {
  int baseline = 0;
  const cv::Size size = cv::getTextSize(text, cv::FONT_HERSHEY_SIMPLEX, scale, 1, &baseline);
  cv::putText(img, text, {centre.x - size.width / 2, centre.y + size.height / 2}, cv::FONT_HERSHEY_SIMPLEX, scale,
              colour, 1, cv::LINE_AA);
}

}  // namespace

std::vector<CellRow> top_cells(const GridResult& grid, std::size_t limit) {
  std::vector<CellRow> rows;
  for (const GridCell& c : grid.cells) {
    if (c.failed || c.runs.empty()) continue;
    double train = 0.0;
    for (const RunResult& r : c.runs) train += r.final_train_accuracy;
    rows.push_back(CellRow{c.h_fid, c.v_fid, train / static_cast<double>(c.runs.size()), c.mean_test_accuracy(),
                           c.mean_test_f1(), c.runs.size()});
  }
  std::sort(rows.begin(), rows.end(), [](const CellRow& a, const CellRow& b) {
    if (a.test_accuracy != b.test_accuracy) return a.test_accuracy > b.test_accuracy;
    if (a.test_f1 != b.test_f1) return a.test_f1 > b.test_f1;
    return std::pair(a.h_fid, a.v_fid) < std::pair(b.h_fid, b.v_fid);
  });
  if (rows.size() > limit) rows.resize(limit);
  return rows;
}

std::string top_cells_csv(const std::vector<CellRow>& rows) {
  std::string csv = "rank,h_fid,v_fid,train_acc,test_acc,test_f1,seeds\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const CellRow& r = rows[i];
    csv += std::to_string(i + 1) + "," + std::to_string(r.h_fid) + "," + std::to_string(r.v_fid) + "," +
           fixed(r.train_accuracy, 6) + "," + fixed(r.test_accuracy, 6) + "," + fixed(r.test_f1, 6) + "," +
           std::to_string(r.seeds) + "\n";
  }
  return csv;
}

std::string top_cells_markdown(const std::vector<CellRow>& rows) {
  std::string md = "| Fuse_HV | Training Accuracy | Testing Accuracy | Testing F1 score |\n|---|---|---|---|\n";
  for (const CellRow& r : rows) {
    md += "| H: " + std::to_string(r.h_fid) + ", V: " + std::to_string(r.v_fid) + " | " +
          fixed(100.0 * r.train_accuracy, 2) + " | " + fixed(100.0 * r.test_accuracy, 2) + " | " +
          fixed(100.0 * r.test_f1, 2) + " |\n";
  }
  return md;
}

std::vector<fs::path> write_grid_report(const GridResult& grid, const fs::path& dir) {
  if (grid.h_fids.empty() || grid.v_fids.empty()) raise(ErrorCode::validation_error, "grid has no fids");
  const int cell = 64, margin_left = 70, margin_top = 60;
  const int rows = static_cast<int>(grid.h_fids.size()), cols = static_cast<int>(grid.v_fids.size());
  cv::Mat img(margin_top + rows * cell + 20, margin_left + cols * cell + 20, CV_8UC3, cv::Scalar(255, 255, 255));

  double lo = 1.0, hi = 0.0;
  for (const GridCell& c : grid.cells) {
    if (c.failed || c.runs.empty()) continue;
    lo = std::min(lo, c.mean_test_accuracy());
    hi = std::max(hi, c.mean_test_accuracy());
  }
  std::string csv = "h_fid\\v_fid";
  for (int v : grid.v_fids) csv += "," + std::to_string(v);
  csv += "\n";
  for (int i = 0; i < rows; ++i) {
    const int h = grid.h_fids[static_cast<std::size_t>(i)];
    csv += std::to_string(h);
    centered_text(img, std::to_string(h), {margin_left - 20, margin_top + i * cell + cell / 2}, 0.5, {0, 0, 0});
    for (int j = 0; j < cols; ++j) {
      const int v = grid.v_fids[static_cast<std::size_t>(j)];
      const cv::Rect r(margin_left + j * cell, margin_top + i * cell, cell, cell);
      const GridCell* c = grid.cell(h, v);
      if (c == nullptr || c->failed || c->runs.empty()) {
        cv::rectangle(img, r, cv::Scalar(200, 200, 200), cv::FILLED);
        centered_text(img, c == nullptr ? "-" : "x", {r.x + cell / 2, r.y + cell / 2}, 0.5, {60, 60, 60});
        csv += ",";
        continue;
      }
      const double acc = c->mean_test_accuracy();
      const double t = hi > lo ? (acc - lo) / (hi - lo) : 1.0;
      cv::Mat swatch(1, 1, CV_8UC1, cv::Scalar(static_cast<int>(std::lround(255.0 * t))));
      cv::Mat colour;
      cv::applyColorMap(swatch, colour, cv::COLORMAP_VIRIDIS);
      const cv::Vec3b bgr = colour.at<cv::Vec3b>(0, 0);
      cv::rectangle(img, r, cv::Scalar(bgr[0], bgr[1], bgr[2]), cv::FILLED);
      const cv::Scalar ink = t > 0.6 ? cv::Scalar(0, 0, 0) : cv::Scalar(255, 255, 255);
      centered_text(img, fixed(100.0 * acc, 1), {r.x + cell / 2, r.y + cell / 2}, 0.45, ink);
      csv += "," + fixed(acc, 6);
    }
    csv += "\n";
  }
  for (int j = 0; j < cols; ++j) {
    centered_text(img, std::to_string(grid.v_fids[static_cast<std::size_t>(j)]),
                  {margin_left + j * cell + cell / 2, margin_top - 15}, 0.5, {0, 0, 0});
  }
  cv::putText(img, "V fid", {margin_left, 20}, cv::FONT_HERSHEY_SIMPLEX, 0.5, {0, 0, 0}, 1, cv::LINE_AA);
  cv::putText(img, "H fid", {5, 20}, cv::FONT_HERSHEY_SIMPLEX, 0.5, {0, 0, 0}, 1, cv::LINE_AA);

  const auto top = top_cells(grid, 5);
  const std::vector<fs::path> files{dir / "heatmap.png", dir / "heatmap.csv", dir / "top5.csv", dir / "top5.md"};
  write_png(img, files[0]);
  write_text_file(files[1], csv);
  write_text_file(files[2], top_cells_csv(top));
  write_text_file(files[3], top_cells_markdown(top));
  return files;
}

std::vector<fs::path> write_bench_report(const BenchReport& report, const fs::path& dir) {
  const int width = 900, height = 480, left = 70, right = 150, top = 30, bottom = 50;
  cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));

  std::vector<const std::vector<double>*> series{&report.baseline_ms};
  std::vector<std::string> names{"no fuse"};
  for (const FidLatency& f : report.fids) {
    series.push_back(&f.samples_ms);
    names.push_back("fid " + std::to_string(f.fid));
  }
  // Clip the y range at the largest per-series p95 so warm-up spikes do not
  // flatten everything else.
  double y_max = report.baseline.p95_ms;
  for (const FidLatency& f : report.fids) y_max = std::max(y_max, f.summary.p95_ms);
  y_max = std::max(y_max * 1.5, 1e-6);
  const double n = static_cast<double>(std::max<std::size_t>(report.n_inputs, 2) - 1);
  const int plot_w = width - left - right, plot_h = height - top - bottom;
  cv::rectangle(img, {left, top, plot_w, plot_h}, {0, 0, 0});
  for (int k = 0; k <= 4; ++k) {
    const int y = top + plot_h - plot_h * k / 4;
    cv::putText(img, fixed(y_max * k / 4.0, 4), {5, y + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, {0, 0, 0}, 1, cv::LINE_AA);
  }
  cv::putText(img, "input index", {left + plot_w / 2 - 40, height - 15}, cv::FONT_HERSHEY_SIMPLEX, 0.5, {0, 0, 0}, 1,
              cv::LINE_AA);
  cv::putText(img, "ms", {5, top - 10}, cv::FONT_HERSHEY_SIMPLEX, 0.5, {0, 0, 0}, 1, cv::LINE_AA);
  const int warm_x = left + static_cast<int>(plot_w * static_cast<double>(report.warmup) / n);
  cv::line(img, {warm_x, top}, {warm_x, top + plot_h}, {180, 180, 180});

  for (std::size_t s = 0; s < series.size(); ++s) {
    cv::Mat swatch(1, 1, CV_8UC1, cv::Scalar(static_cast<int>(255 * s / std::max<std::size_t>(series.size() - 1, 1))));
    cv::Mat colour;
    cv::applyColorMap(swatch, colour, cv::COLORMAP_TURBO);
    const cv::Vec3b c = colour.at<cv::Vec3b>(0, 0);
    const cv::Scalar ink = s == 0 ? cv::Scalar(0, 0, 0) : cv::Scalar(c[0], c[1], c[2]);
    std::vector<cv::Point> pts;
    for (std::size_t i = 0; i < series[s]->size(); ++i) {
      const double y = std::min((*series[s])[i], y_max) / y_max;
      pts.emplace_back(left + static_cast<int>(plot_w * static_cast<double>(i) / n),
                       top + plot_h - static_cast<int>(plot_h * y));
    }
    cv::polylines(img, pts, false, ink, 1, cv::LINE_AA);
    const int ly = top + 12 + 16 * static_cast<int>(s);
    cv::line(img, {width - right + 10, ly}, {width - right + 30, ly}, ink, 2);
    cv::putText(img, names[s], {width - right + 35, ly + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, {0, 0, 0}, 1, cv::LINE_AA);
  }

  const std::vector<fs::path> files{dir / "latency.png", dir / "latency.csv"};
  write_png(img, files[0]);
  write_text_file(files[1], bench_latency_csv(report));
  return files;
}

std::vector<fs::path> write_runs_report(const std::vector<RunResult>& runs, const fs::path& dir) {
  std::string md = "| seed | train acc | test acc | test F1 | best epoch | params |\n|---|---|---|---|---|---|\n";
  for (const RunResult& r : runs) {
    md += "| " + std::to_string(r.seed) + " | " + fixed(r.final_train_accuracy) + " | " + fixed(r.test_accuracy) +
          " | " + fixed(r.test_macro_f1) + " | " + std::to_string(r.best_epoch) + " | " +
          std::to_string(r.parameters) + " |\n";
  }
  const std::vector<fs::path> files{dir / "runs.md"};
  write_text_file(files[0], md);
  return files;
}

}  // namespace pairfuse::cli
