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

#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pairfuse/error.hpp"
#include "pairfuse/loss_metrics.hpp"

namespace pairfuse {
namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::io_error;
}

TEST(ClassWeights, ReferenceCountTables) {
  const std::vector<std::size_t> ida{9749, 3291, 1148, 42};
  const std::vector<double> ida_w{0.365, 1.081, 3.099, 84.702};
  const std::vector<std::size_t> xview{97389, 11754, 12897, 7940};
  const std::vector<double> xview_w{0.334, 2.765, 2.520, 4.093};
  const ClassWeights a = class_weights(ida), b = class_weights(xview);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(a.w[i], ida_w[i], 1e-3) << i;
    EXPECT_NEAR(b.w[i], xview_w[i], 1e-3) << i;
  }
}

TEST(ClassWeights, BalancedGivesUnitWeights) {
  const std::vector<std::size_t> counts{10, 10, 10, 10};
  for (double w : class_weights(counts).w) EXPECT_DOUBLE_EQ(w, 1.0);
}

TEST(ClassWeights, WeightedCountsSumToTotalAndScaleInvariant) {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<std::size_t> dist(1, 5000);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> counts(2 + trial % 5);
    for (auto& c : counts) c = dist(rng);
    const ClassWeights w = class_weights(counts);
    double sum = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      EXPECT_GT(w.w[i], 0.0);
      sum += static_cast<double>(counts[i]) * w.w[i];
    }
    const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
    EXPECT_NEAR(sum, total, total * 1e-12);
    std::vector<std::size_t> scaled = counts;
    for (auto& c : scaled) c *= 7;
    const ClassWeights ws = class_weights(scaled);
    for (std::size_t i = 0; i < counts.size(); ++i) EXPECT_NEAR(ws.w[i], w.w[i], 1e-12 * w.w[i]);
  }
}

TEST(ClassWeights, ZeroCountRejected) {
  const std::vector<std::size_t> counts{3, 0, 2};
  EXPECT_EQ(code_of([&] { class_weights(counts); }), ErrorCode::zero_class_count);
}

TEST(ClassCounts, CountsLabels) {
  const std::vector<int> labels{0, 3, 3, 1, 0, 0};
  EXPECT_EQ(class_counts(labels, 4), (std::vector<std::size_t>{3, 1, 0, 2}));
}

TEST(OneHot, RowsHaveSingleOne) {
  const std::vector<int> labels{2, 0, 3};
  const Tensor t = one_hot(labels, 4);
  ASSERT_EQ(t.shape(), (Shape{3, 4, 1, 1}));
  for (std::size_t n = 0; n < 3; ++n) {
    double row = 0.0;
    for (std::size_t c = 0; c < 4; ++c) row += t.at(n, c, 0, 0);
    EXPECT_EQ(row, 1.0);
    EXPECT_EQ(t.at(n, static_cast<std::size_t>(labels[n]), 0, 0), 1.0);
  }
}

TEST(WeightedMse, Examples) {
  const std::vector<int> labels{0};
  const Tensor y = one_hot(labels, 2);
  EXPECT_EQ(weighted_mse({y, y, labels}, ClassWeights{{1.0, 1.0}}), 0.0);
  const Tensor half(Shape{1, 2, 1, 1}, {0.5, 0.5});
  EXPECT_DOUBLE_EQ(weighted_mse({y, half, labels}, ClassWeights{{1.0, 1.0}}), 0.5);
  EXPECT_DOUBLE_EQ(weighted_mse({y, half, labels}, ClassWeights{{2.0, 1.0}}), 1.0);
  const Tensor wrong(Shape{1, 3, 1, 1});
  EXPECT_EQ(code_of([&] { weighted_mse({y, wrong, labels}, ClassWeights{{1.0, 1.0}}); }), ErrorCode::shape_mismatch);
}

TEST(WeightedMse, NonNegativeAndZeroOnlyAtTarget) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> label(0, 3);
  const ClassWeights w{{0.3, 1.1, 3.1, 84.7}};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> labels(1 + trial % 7);
    for (int& l : labels) l = label(rng);
    const Tensor y = one_hot(labels, 4);
    Tensor p = y;
    EXPECT_EQ(weighted_mse({y, p, labels}, w), 0.0);
    p[static_cast<std::size_t>(trial) % p.size()] += 1e-3;
    EXPECT_GT(weighted_mse({y, p, labels}, w), 0.0);
    const Tensor r = testing::random_tensor(y.shape(), rng);
    EXPECT_GE(weighted_mse({y, r, labels}, w), 0.0);
  }
}

TEST(WeightedMse, GradientMatchesClosedFormAndDifferences) {
  std::mt19937_64 rng(43);
  const std::vector<int> labels{1, 3, 0, 2, 1};
  const ClassWeights w{{0.5, 1.5, 2.5, 3.5}};
  const Tensor y = one_hot(labels, 4);
  Tensor p = testing::random_tensor(y.shape(), rng);
  const Tensor g = weighted_mse_grad({y, p, labels}, w);
  const auto numeric = testing::central_differences([&] { return weighted_mse({y, p, labels}, w); }, p.values());
  for (std::size_t n = 0; n < labels.size(); ++n) {
    for (std::size_t c = 0; c < 4; ++c) {
      const std::size_t i = n * 4 + c;
      const double closed = 2.0 / 5.0 * w.w[static_cast<std::size_t>(labels[n])] * (p[i] - y[i]);
      EXPECT_NEAR(g[i], closed, 1e-15);
      EXPECT_LT(testing::gradient_error(g[i], numeric[i]), 1e-6);
    }
  }
}

TEST(PredictLabel, ArgmaxWithLowestIndexTies) {
  EXPECT_EQ(predict_label(std::vector<double>{0.1, 0.9, 0.2, 0.3}), 1);
  EXPECT_EQ(predict_label(std::vector<double>{0.5, 0.5, 0, 0}), 0);
  EXPECT_EQ(predict_label(std::vector<double>{0, 0, 0, 1}), 3);
  const Tensor logits(Shape{2, 3, 1, 1}, {0, 2, 1, 7, 7, 7});
  EXPECT_EQ(predict_labels(logits), (std::vector<int>{1, 0}));
}

TEST(Accuracy, Examples) {
  const std::vector<int> l{0, 1, 2, 3};
  EXPECT_EQ(accuracy(l, l), 1.0);
  EXPECT_EQ(accuracy(std::vector<int>{1, 2, 3, 0}, l), 0.0);
  EXPECT_EQ(accuracy(l, std::vector<int>{0, 1, 0, 0}), 0.5);
  EXPECT_EQ(code_of([] { accuracy(std::vector<int>{}, std::vector<int>{}); }), ErrorCode::empty_input);
}

TEST(MacroF1, Examples) {
  const std::vector<int> l{0, 1, 2, 3, 3, 1};
  EXPECT_EQ(macro_f1(l, l, 4), 1.0);
  EXPECT_NEAR(macro_f1(std::vector<int>{0, 0}, std::vector<int>{0, 1}, 2), 1.0 / 3.0, 1e-15);
  const auto f = per_class_f1(std::vector<int>{0, 0}, std::vector<int>{0, 1}, 2);
  EXPECT_NEAR(f[0], 2.0 / 3.0, 1e-15);
  EXPECT_EQ(f[1], 0.0);
  // Class 2 has neither support nor predictions.
  EXPECT_EQ(per_class_f1(std::vector<int>{0, 1}, std::vector<int>{0, 1}, 3)[2], 0.0);
  EXPECT_EQ(code_of([] { macro_f1(std::vector<int>{}, std::vector<int>{}, 4); }), ErrorCode::empty_input);
}

TEST(Metrics, InvariantUnderJointPermutation) {
  std::mt19937_64 rng(44);
  std::uniform_int_distribution<int> label(0, 3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> p(20), l(20);
    for (auto& v : p) v = label(rng);
    for (auto& v : l) v = label(rng);
    std::vector<std::size_t> order(20);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> pp, ll;
    for (std::size_t i : order) {
      pp.push_back(p[i]);
      ll.push_back(l[i]);
    }
    EXPECT_EQ(accuracy(p, l), accuracy(pp, ll));
    EXPECT_EQ(macro_f1(p, l, 4), macro_f1(pp, ll, 4));
    EXPECT_EQ(confusion_matrix(p, l, 4), confusion_matrix(pp, ll, 4));
  }
}

TEST(ConfusionMatrix, Examples) {
  const std::vector<int> l{0, 1, 2, 3, 3};
  const auto diag = confusion_matrix(l, l, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(diag[i][j] > 0, i == j);
  }
  const auto one = confusion_matrix(std::vector<int>{0}, std::vector<int>{3}, 4);
  EXPECT_EQ(one[3][0], 1u);
  std::size_t total = 0;
  for (const auto& row : one) total += std::accumulate(row.begin(), row.end(), std::size_t{0});
  EXPECT_EQ(total, 1u);

  std::mt19937_64 rng(45);
  std::uniform_int_distribution<int> label(0, 3);
  std::vector<int> p(50), t(50);
  for (auto& v : p) v = label(rng);
  for (auto& v : t) v = label(rng);
  const auto m = confusion_matrix(p, t, 4);
  const auto counts = class_counts(t, 4);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(std::accumulate(m[i].begin(), m[i].end(), std::size_t{0}), counts[i]);
  EXPECT_EQ(code_of([] { confusion_matrix(std::vector<int>{}, std::vector<int>{}, 4); }), ErrorCode::empty_input);
}

}  // namespace
}  // namespace pairfuse
