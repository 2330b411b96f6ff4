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

#include "pairfuse/loss_metrics.hpp"

#include <numeric>

#include "pairfuse/error.hpp"

namespace pairfuse {

ClassWeights class_weights(std::span<const std::size_t> counts) {
  if (counts.empty()) raise(ErrorCode::empty_input, "class_weights needs at least one class");
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  const double classes = static_cast<double>(counts.size());
  ClassWeights out;
  out.w.reserve(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) {
      raise(ErrorCode::zero_class_count, "class " + std::to_string(i) + " has no samples");
    }
    out.w.push_back(total / (classes * static_cast<double>(counts[i])));
  }
  return out;
}

std::vector<std::size_t> class_counts(std::span<const int> labels, std::size_t classes) {
  std::vector<std::size_t> counts(classes, 0);
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      raise(ErrorCode::validation_error, "label " + std::to_string(label) + " out of range");
    }
    ++counts[static_cast<std::size_t>(label)];
  }
  return counts;
}

Tensor one_hot(std::span<const int> labels, std::size_t classes) {
  Tensor t(Shape{labels.size(), classes, 1, 1});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      raise(ErrorCode::validation_error, "label " + std::to_string(labels[i]) + " out of range");
    }
    t[i * classes + static_cast<std::size_t>(labels[i])] = 1.0;
  }
  return t;
}

namespace {

void check_batch(const LossBatch& batch, const ClassWeights& weights) {
  const Shape& ts = batch.targets.shape();
  const Shape& ps = batch.predictions.shape();
  if (!(ts == ps) || ts.n != batch.labels.size() || ts.sample() != weights.w.size() ||
      ts.n == 0) {
    raise(ErrorCode::shape_mismatch, "loss batch dimensions are inconsistent: targets " +
                                         to_string(ts) + ", predictions " + to_string(ps) +
                                         ", " + std::to_string(batch.labels.size()) +
                                         " labels, " + std::to_string(weights.w.size()) +
                                         " weights");
  }
  for (int label : batch.labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= weights.w.size()) {
      raise(ErrorCode::shape_mismatch, "label " + std::to_string(label) + " has no weight");
    }
  }
}

}  // namespace

double weighted_mse(const LossBatch& batch, const ClassWeights& weights) {
  check_batch(batch, weights);
  const std::size_t n = batch.labels.size();
  const std::size_t c = weights.w.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = batch.targets[i * c + j] - batch.predictions[i * c + j];
      sq += d * d;
    }
    total += sq * weights.w[static_cast<std::size_t>(batch.labels[i])];
  }
  return total / static_cast<double>(n);
}

Tensor weighted_mse_grad(const LossBatch& batch, const ClassWeights& weights) {
  check_batch(batch, weights);
  const std::size_t n = batch.labels.size();
  const std::size_t c = weights.w.size();
  Tensor grad(batch.predictions.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const double scale = 2.0 / static_cast<double>(n) * weights.w[static_cast<std::size_t>(batch.labels[i])];
    for (std::size_t j = 0; j < c; ++j) {
      grad[i * c + j] = scale * (batch.predictions[i * c + j] - batch.targets[i * c + j]);
    }
  }
  return grad;
}

int predict_label(std::span<const double> logits) {
  if (logits.empty()) raise(ErrorCode::empty_input, "predict_label on empty logits");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return static_cast<int>(best);
}

std::vector<int> predict_labels(const Tensor& logits) {
  const std::size_t n = logits.shape().n;
  const std::size_t c = logits.shape().sample();
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = predict_label(logits.values().subspan(i * c, c));
  return out;
}

namespace {
void check_pairs(std::span<const int> preds, std::span<const int> labels) {
  if (preds.empty() || labels.empty()) raise(ErrorCode::empty_input, "no predictions to score");
  if (preds.size() != labels.size()) {
    raise(ErrorCode::shape_mismatch, "predictions and labels differ in length");
  }
}
}  // namespace

double accuracy(std::span<const int> preds, std::span<const int> labels) {
  check_pairs(preds, labels);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const int> preds,
                                                       std::span<const int> labels,
                                                       std::size_t classes) {
  check_pairs(preds, labels);
  std::vector<std::vector<std::size_t>> m(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto t = static_cast<std::size_t>(labels[i]);
    const auto p = static_cast<std::size_t>(preds[i]);
    if (labels[i] < 0 || preds[i] < 0 || t >= classes || p >= classes) {
      raise(ErrorCode::validation_error, "class index outside [0, " + std::to_string(classes) + ")");
    }
    ++m[t][p];
  }
  return m;
}

std::vector<double> per_class_f1(std::span<const int> preds, std::span<const int> labels,
                                 std::size_t classes) {
  const auto m = confusion_matrix(preds, labels, classes);
  std::vector<double> f1(classes, 0.0);
  for (std::size_t k = 0; k < classes; ++k) {
    std::size_t predicted = 0;
    std::size_t actual = 0;
    for (std::size_t j = 0; j < classes; ++j) {
      predicted += m[j][k];
      actual += m[k][j];
    }
    const std::size_t tp = m[k][k];
    const std::size_t denom = predicted + actual;
    f1[k] = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  return f1;
}

double macro_f1(std::span<const int> preds, std::span<const int> labels, std::size_t classes) {
  const auto f1 = per_class_f1(preds, labels, classes);
  return std::accumulate(f1.begin(), f1.end(), 0.0) / static_cast<double>(classes);
}

}  // namespace pairfuse
