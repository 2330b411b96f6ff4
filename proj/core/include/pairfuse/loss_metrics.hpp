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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pairfuse/tensor.hpp"

namespace pairfuse {

/// Per-class loss weights w_i = N_tot / (C * N_i).
struct ClassWeights {
  std::vector<double> w;
};

/// Throws zero_class_count when any count is 0, empty_input when counts is empty.
ClassWeights class_weights(std::span<const std::size_t> counts);

/// Counts labels in [0, classes).
std::vector<std::size_t> class_counts(std::span<const int> labels, std::size_t classes);

/// targets and predictions are (N, C, 1, 1); labels index the weight of each
/// sample's ground-truth class.
struct LossBatch {
  Tensor targets;
  Tensor predictions;
  std::vector<int> labels;
};

Tensor one_hot(std::span<const int> labels, std::size_t classes);

/// (1/N) * sum_i ||Y_i - Yhat_i||^2 * W[label_i].
double weighted_mse(const LossBatch& batch, const ClassWeights& weights);

/// d(weighted_mse)/d(predictions) = (2/N) * W[label_i] * (Yhat_i - Y_i).
Tensor weighted_mse_grad(const LossBatch& batch, const ClassWeights& weights);

/// argmax with ties broken toward the lowest index.
int predict_label(std::span<const double> logits);

/// Row-wise predict_label over (N, C, 1, 1) logits.
std::vector<int> predict_labels(const Tensor& logits);

double accuracy(std::span<const int> preds, std::span<const int> labels);

/// Row = true class, column = predicted class.
std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const int> preds,
                                                       std::span<const int> labels,
                                                       std::size_t classes);

/// Per-class F1; a class with no support and no predictions scores 0.
std::vector<double> per_class_f1(std::span<const int> preds, std::span<const int> labels,
                                 std::size_t classes);

/// Unweighted mean of per_class_f1.
double macro_f1(std::span<const int> preds, std::span<const int> labels, std::size_t classes);

}  // namespace pairfuse
