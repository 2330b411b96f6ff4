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
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pairfuse/model_config.hpp"
#include "pairfuse/tensor.hpp"

namespace pairfuse {

enum class OpKind {
  input_a,
  input_b,
  conv,
  relu,
  pool,
  adaptive_avg_pool,
  fuse,
  concat,
  flatten,
  linear,
};

std::string_view to_string(OpKind kind);

inline constexpr std::size_t kNoParameter = std::numeric_limits<std::size_t>::max();

/// A node of the static computation graph. `out` is the per-sample output
/// shape (n == 1).
struct Node {
  OpKind kind = OpKind::input_a;
  std::vector<std::size_t> inputs;
  std::size_t weight = kNoParameter;
  std::size_t bias = kNoParameter;
  std::size_t stride = 1;
  std::size_t pad = 0;
  PoolKind pool = PoolKind::none;
  std::optional<FuseFunctionId> fid;
  Shape out;
  std::string label;
};

struct Parameter {
  std::string name;
  Tensor value;
  std::size_t fan_in = 1;
  bool is_bias = false;
};

/// A two-input network: parameters plus a topologically ordered graph. Copies
/// are deep, which is how checkpoints of the best epoch are kept.
class Model {
 public:
  Model() = default;
  explicit Model(ModelConfig config) : config_(std::move(config)) {}

  const ModelConfig& config() const noexcept { return config_; }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<Parameter>& parameters() const noexcept { return parameters_; }
  std::vector<Parameter>& parameters() noexcept { return parameters_; }
  std::size_t output() const noexcept { return output_; }

  std::size_t add_parameter(std::string name, Shape shape, std::size_t fan_in, bool is_bias);
  std::size_t add_node(Node node);
  void set_output(std::size_t node) { output_ = node; }

  std::size_t count_nodes(OpKind kind) const;
  const Parameter& parameter(std::string_view name) const;
  Parameter& parameter(std::string_view name);

 private:
  ModelConfig config_;
  std::vector<Parameter> parameters_;
  std::vector<Node> nodes_;
  std::size_t output_ = 0;
};

/// Exact number of learnable scalars.
std::size_t parameter_count(const Model& model);

/// Parameters whose name starts with `prefix`.
std::size_t parameter_count(const Model& model, std::string_view prefix);

/// Uniform He initialisation (bound sqrt(6 / fan_in)) for weights, zero biases.
/// Same seed gives bit-identical parameters.
void initialize_parameters(Model& model, std::uint64_t seed);

/// Values produced by a forward pass, kept for the backward pass.
struct Activations {
  std::vector<Tensor> values;
  std::vector<std::vector<std::uint32_t>> argmax;
  std::size_t output = 0;

  const Tensor& result() const { return values[output]; }
};

/// Runs the graph on a batch of pairs; both inputs are (N, C, H, W).
Activations forward(const Model& model, const Tensor& input_a, const Tensor& input_b);

/// Convenience wrapper returning logits of shape (N, classes, 1, 1).
Tensor predict_logits(const Model& model, const Tensor& input_a, const Tensor& input_b);

/// Gradients of every parameter given dL/d(output); index-aligned with
/// model.parameters().
std::vector<Tensor> backward(const Model& model, const Activations& acts,
                             const Tensor& grad_output);

// Stand-alone layer forms. The graph uses the same primitives.

struct StageWeights {
  Tensor weight;  // (out, in, k, k)
  Tensor bias;    // (1, out, 1, 1)
};

/// conv (same padding) + ReLU + optional pool.
Tensor stage_forward(const StageSpec& stage, const StageWeights& weights, const Tensor& x);

/// Output spatial size of a stage, or 0 when it collapses.
std::size_t stage_output_extent(const StageSpec& stage, std::size_t extent);

struct DenseLayer {
  Tensor weight;  // (out, in, 1, 1)
  Tensor bias;    // (1, out, 1, 1)
};

/// Affine + ReLU chain with a plain affine last layer. `x` is (N, in, 1, 1).
Tensor mlp_forward(std::span<const DenseLayer> layers, const Tensor& x);

}  // namespace pairfuse
