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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pairfuse/error.hpp"
#include "pairfuse/fuse_graph.hpp"
#include "pairfuse/nn_core.hpp"
#include "pairfuse/ops.hpp"

namespace pairfuse {
namespace {

using testing::central_differences;
using testing::gradient_error;
using testing::max_relative_error;
using testing::random_tensor;

TEST(Conv2d, MatchesLoopOracle) {
  std::mt19937_64 rng(11);
  for (std::size_t k : {1u, 3u, 5u}) {
    for (std::size_t stride : {1u, 2u}) {
      const Tensor x = random_tensor({3, 2, 7, 6}, rng);
      const Tensor w = random_tensor({4, 2, k, k}, rng);
      const Tensor b = random_tensor({1, 4, 1, 1}, rng);
      const Tensor got = ops::conv2d(x, w, b, stride, k / 2);
      const Tensor want = testing::conv2d_oracle(x, w, b, stride, k / 2);
      ASSERT_EQ(got.shape(), want.shape());
      EXPECT_LT(max_relative_error(got, want), 1e-12) << "k=" << k << " stride=" << stride;
    }
  }
}

TEST(Conv2d, LargeBatchMatchesOracle) {
  // Enough samples to cross the internal chunk boundary.
  std::mt19937_64 rng(12);
  const Tensor x = random_tensor({40, 3, 16, 16}, rng);
  const Tensor w = random_tensor({8, 3, 3, 3}, rng);
  const Tensor b = random_tensor({1, 8, 1, 1}, rng);
  EXPECT_LT(max_relative_error(ops::conv2d(x, w, b, 1, 1), testing::conv2d_oracle(x, w, b, 1, 1)), 1e-12);
}

TEST(Conv2d, BackwardMatchesCentralDifferences) {
  std::mt19937_64 rng(13);
  Tensor x = random_tensor({2, 2, 5, 5}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  Tensor b = random_tensor({1, 3, 1, 1}, rng);
  const Tensor g = random_tensor({2, 3, 3, 3}, rng);
  auto loss = [&] {
    const Tensor y = ops::conv2d(x, w, b, 2, 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * g[i];
    return acc;
  };
  Tensor gx, gw(w.shape()), gb(b.shape());
  ops::conv2d_backward(x, w, 2, 1, g, &gx, gw, gb);
  const auto nx = central_differences(loss, x.values());
  const auto nw = central_differences(loss, w.values());
  const auto nb = central_differences(loss, b.values());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LT(gradient_error(gx[i], nx[i]), 1e-6);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_LT(gradient_error(gw[i], nw[i]), 1e-6);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_LT(gradient_error(gb[i], nb[i]), 1e-6);
}

TEST(Pool2, MaxAndAverage) {
  const Tensor x(Shape{1, 1, 2, 4}, {1, 5, 2, 2, 3, 4, 8, 0});
  const Tensor mx = ops::pool2(x, PoolKind::max2, nullptr);
  const Tensor av = ops::pool2(x, PoolKind::avg2, nullptr);
  EXPECT_EQ(mx, Tensor(Shape{1, 1, 1, 2}, {5, 8}));
  EXPECT_EQ(av, Tensor(Shape{1, 1, 1, 2}, {13.0 / 4, 3.0}));
}

TEST(AdaptiveAvgPool, MeansOverRegions) {
  const Tensor x(Shape{1, 1, 4, 4}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16});
  const Tensor y = ops::adaptive_avg_pool(x, 2, 2);
  EXPECT_EQ(y, Tensor(Shape{1, 1, 2, 2}, {3.5, 5.5, 11.5, 13.5}));
  EXPECT_EQ(ops::adaptive_avg_pool(x, 1, 1)[0], 8.5);
}

TEST(StageForward, Examples) {
  std::mt19937_64 rng(14);
  const Tensor x = random_tensor({2, 3, 5, 5}, rng);

  const StageSpec one{3, 3, 1, 1, PoolKind::none};
  StageWeights eye{Tensor({3, 3, 1, 1}), Tensor({1, 3, 1, 1})};
  for (std::size_t c = 0; c < 3; ++c) eye.weight.at(c, c, 0, 0) = 1.0;
  EXPECT_EQ(stage_forward(one, eye, x), ops::relu(x));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(ops::relu(x)[i], std::max(0.0, x[i]));

  const StageSpec spec{3, 4, 3, 1, PoolKind::max2};
  const StageWeights zero{Tensor({4, 3, 3, 3}), Tensor({1, 4, 1, 1})};
  const Tensor z = stage_forward(spec, zero, x);
  EXPECT_EQ(z.shape(), (Shape{2, 4, 2, 2}));
  EXPECT_EQ(z, Tensor(z.shape()));

  StageSpec plain = spec;
  plain.pool = PoolKind::none;
  const StageWeights w{random_tensor({4, 3, 3, 3}, rng), random_tensor({1, 4, 1, 1}, rng)};
  const Tensor got = stage_forward(plain, w, x);
  Tensor want = testing::conv2d_oracle(x, w.weight, w.bias, 1, 1);
  for (double& v : want.values()) v = std::max(0.0, v);
  EXPECT_LT(max_relative_error(got, want), 1e-6);
  EXPECT_EQ(got.shape().c, plain.out_channels);
  EXPECT_EQ(got.shape().h, stage_output_extent(plain, 5));

  EXPECT_THROW(stage_forward(spec, zero, random_tensor({1, 2, 5, 5}, rng)), Error);
}

TEST(MlpForward, ZeroWeightsGiveFinalBias) {
  std::mt19937_64 rng(15);
  std::vector<DenseLayer> layers{{Tensor({4, 8, 1, 1}), random_tensor({1, 4, 1, 1}, rng)},
                                 {Tensor({2, 4, 1, 1}), Tensor(Shape{1, 2, 1, 1}, {0.25, -1.5})}};
  const Tensor y = mlp_forward(layers, random_tensor({3, 8, 1, 1}, rng));
  ASSERT_EQ(y.shape(), (Shape{3, 2, 1, 1}));
  for (std::size_t n = 0; n < 3; ++n) {
    EXPECT_EQ(y.at(n, 0, 0, 0), 0.25);
    EXPECT_EQ(y.at(n, 1, 0, 0), -1.5);
  }
}

TEST(MlpForward, HandBuiltTwoLayerHead) {
  // h = relu(W1 x + b1) = relu([1, -1] + [0.5, 0.5]) = [1.5, 0]; y = W2 h + b2.
  std::vector<DenseLayer> layers{{Tensor(Shape{2, 2, 1, 1}, {1, 2, -1, 3}), Tensor(Shape{1, 2, 1, 1}, {0.5, 0.5})},
                                 {Tensor(Shape{2, 2, 1, 1}, {2, 1, -1, 4}), Tensor(Shape{1, 2, 1, 1}, {0.1, 0.2})}};
  const Tensor y = mlp_forward(layers, Tensor(Shape{1, 2, 1, 1}, {1, 0}));
  EXPECT_DOUBLE_EQ(y[0], 3.1);
  EXPECT_DOUBLE_EQ(y[1], -1.3);
}

TEST(MlpForward, WeightGradientMatchesCentralDifferences) {
  std::mt19937_64 rng(16);
  Tensor w1 = random_tensor({5, 6, 1, 1}, rng), b1 = random_tensor({1, 5, 1, 1}, rng);
  Tensor w2 = random_tensor({3, 5, 1, 1}, rng), b2 = random_tensor({1, 3, 1, 1}, rng);
  const Tensor x = random_tensor({4, 6, 1, 1}, rng);
  const Tensor g = random_tensor({4, 3, 1, 1}, rng);
  auto loss = [&] {
    const std::vector<DenseLayer> layers{{w1, b1}, {w2, b2}};
    const Tensor y = mlp_forward(layers, x);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * g[i];
    return acc;
  };
  // Analytic gradient through the ops-level backward passes.
  const Tensor h_pre = ops::linear(x, w1, b1);
  const Tensor h = ops::relu(h_pre);
  Tensor gh, gw2(w2.shape()), gb2(b2.shape()), gw1(w1.shape()), gb1(b1.shape());
  ops::linear_backward(h, w2, g, &gh, gw2, gb2);
  const Tensor gpre = ops::relu_backward(h, gh);
  ops::linear_backward(x, w1, gpre, nullptr, gw1, gb1);
  const auto n1 = central_differences(loss, w1.values());
  const auto n2 = central_differences(loss, w2.values());
  for (std::size_t i = 0; i < w1.size(); ++i) EXPECT_LT(gradient_error(gw1[i], n1[i]), 1e-4);
  for (std::size_t i = 0; i < w2.size(); ++i) EXPECT_LT(gradient_error(gw2[i], n2[i]), 1e-4);
}

ModelConfig counting_config() {
  ModelConfig cfg;
  cfg.input_channels = 3;
  cfg.input_height = 2;
  cfg.input_width = 2;
  cfg.stages = {StageSpec{3, 8, 3, 1, PoolKind::none}, StageSpec{8, 2, 1, 1, PoolKind::none}};
  cfg.head.layer_widths = {4, 2};
  cfg.head.out_classes = 2;
  cfg.plan = FusePlan{Architecture::retrofit_single, FuseFunctionId(5), std::nullopt};
  return cfg;
}

TEST(ParameterCount, HandCounts) {
  const Model m = init_parameters(counting_config(), 0);
  EXPECT_EQ(parameter_count(m, "extractor.stage1"), 3u * 3 * 3 * 8 + 8);  // 224
  EXPECT_EQ(parameter_count(m, "head"), 8u * 4 + 4 + 4 * 2 + 2);           // 46
  EXPECT_EQ(parameter_count(m), parameter_count(m, "extractor") + parameter_count(m, "head"));
}

TEST(ParameterCount, AdditiveAndStableUnderForward) {
  const ModelConfig cfg = tiny_config(FusePlan{Architecture::fuse_hv, FuseFunctionId(11), FuseFunctionId(8)});
  const Model m = init_parameters(cfg, 3);
  std::size_t total = 0;
  for (const Parameter& p : m.parameters()) total += p.value.size();
  EXPECT_EQ(parameter_count(m), total);
  EXPECT_EQ(parameter_count(m), parameter_count(m, "branch_a") + parameter_count(m, "branch_b") +
                                    parameter_count(m, "fuse_v") + parameter_count(m, "post") +
                                    parameter_count(m, "head"));
  std::mt19937_64 rng(17);
  forward(m, random_tensor({2, 2, 8, 8}, rng), random_tensor({2, 2, 8, 8}, rng));
  EXPECT_EQ(parameter_count(m), total);
}

TEST(InitParameters, Deterministic) {
  const ModelConfig cfg = tiny_config(FusePlan{Architecture::fuse_h, FuseFunctionId(2), std::nullopt});
  const Model a = init_parameters(cfg, 42), b = init_parameters(cfg, 42), c = init_parameters(cfg, 43);
  ASSERT_EQ(a.parameters().size(), b.parameters().size());
  bool any_diff = false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    EXPECT_EQ(a.parameters()[i].value, b.parameters()[i].value);
    any_diff |= !(a.parameters()[i].value == c.parameters()[i].value);
  }
  EXPECT_TRUE(any_diff);
}

TEST(InitParameters, HeUniformBoundsAndZeroBias) {
  const ModelConfig cfg = desk_scale_config(FusePlan{Architecture::fuse_hv, FuseFunctionId(11), FuseFunctionId(8)});
  const Model m = init_parameters(cfg, 5);
  for (const Parameter& p : m.parameters()) {
    if (p.is_bias) {
      EXPECT_EQ(p.value, Tensor(p.value.shape())) << p.name;
      continue;
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(p.fan_in));
    for (double v : p.value.values()) ASSERT_LE(std::fabs(v), bound) << p.name;
  }
}

TEST(InitParameters, CollapsingStageIsInvalidConfig) {
  ModelConfig cfg = tiny_config(FusePlan{Architecture::fuse_h, FuseFunctionId(2), std::nullopt});
  cfg.input_height = cfg.input_width = 2;  // two max2 pools take 2x2 to 0x0
  try {
    init_parameters(cfg, 0);
    FAIL() << "expected InvalidConfig";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_config);
  }
}

TEST(Forward, Deterministic) {
  const ModelConfig cfg = tiny_config(FusePlan{Architecture::fuse_v, std::nullopt, FuseFunctionId(5)});
  const Model m = init_parameters(cfg, 9);
  std::mt19937_64 rng(18);
  const Tensor a = random_tensor({3, 2, 8, 8}, rng), b = random_tensor({3, 2, 8, 8}, rng);
  EXPECT_EQ(predict_logits(m, a, b), predict_logits(m, a, b));
  EXPECT_THROW(predict_logits(m, random_tensor({3, 3, 8, 8}, rng), b), Error);
}

}  // namespace
}  // namespace pairfuse
