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

#include "pairfuse/nn_core.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pairfuse/error.hpp"
#include "pairfuse/fusion_kernels.hpp"
#include "pairfuse/ops.hpp"

namespace pairfuse {

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::input_a: return "input_a";
    case OpKind::input_b: return "input_b";
    case OpKind::conv: return "conv";
    case OpKind::relu: return "relu";
    case OpKind::pool: return "pool";
    case OpKind::adaptive_avg_pool: return "adaptive_avg_pool";
    case OpKind::fuse: return "fuse";
    case OpKind::concat: return "concat";
    case OpKind::flatten: return "flatten";
    case OpKind::linear: return "linear";
  }
  return "unknown";
}

std::size_t Model::add_parameter(std::string name, Shape shape, std::size_t fan_in, bool is_bias) {
  parameters_.push_back(Parameter{std::move(name), Tensor(shape), fan_in, is_bias});
  return parameters_.size() - 1;
}

std::size_t Model::add_node(Node node) {
  for (std::size_t in : node.inputs) {
    if (in >= nodes_.size()) raise(ErrorCode::invalid_config, "node input out of order");
  }
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

std::size_t Model::count_nodes(OpKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [kind](const Node& n) { return n.kind == kind; }));
}

const Parameter& Model::parameter(std::string_view name) const {
  for (const Parameter& p : parameters_) {
    if (p.name == name) return p;
  }
  raise(ErrorCode::invalid_config, "no parameter named '" + std::string(name) + "'");
}

Parameter& Model::parameter(std::string_view name) {
  return const_cast<Parameter&>(std::as_const(*this).parameter(name));
}

std::size_t parameter_count(const Model& model) {
  std::size_t total = 0;
  for (const Parameter& p : model.parameters()) total += p.value.size();
  return total;
}

std::size_t parameter_count(const Model& model, std::string_view prefix) {
  std::size_t total = 0;
  for (const Parameter& p : model.parameters()) {
    if (p.name.starts_with(prefix)) total += p.value.size();
  }
  return total;
}

void initialize_parameters(Model& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (Parameter& p : model.parameters()) {
    if (p.is_bias) {
      p.value.fill(0.0);
      continue;
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(p.fan_in, 1)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : p.value.values()) v = dist(rng);
  }
}

namespace {

void check_input(const Node& node, const Tensor& x) {
  const Shape& s = x.shape();
  if (s.c != node.out.c || s.h != node.out.h || s.w != node.out.w || s.n == 0) {
    raise(ErrorCode::shape_mismatch, "model input " + to_string(s) + " does not match (N," +
                                         std::to_string(node.out.c) + "," +
                                         std::to_string(node.out.h) + "," +
                                         std::to_string(node.out.w) + ")");
  }
}

const Tensor& param(const Model& m, std::size_t index) { return m.parameters()[index].value; }

}  // namespace

Activations forward(const Model& model, const Tensor& input_a, const Tensor& input_b) {
  if (input_a.shape().n != input_b.shape().n) {
    raise(ErrorCode::shape_mismatch, "pair batches differ in size");
  }
  const auto& nodes = model.nodes();
  Activations acts;
  acts.values.resize(nodes.size());
  acts.argmax.resize(nodes.size());
  acts.output = model.output();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& node = nodes[i];
    auto in = [&](std::size_t k) -> const Tensor& { return acts.values[node.inputs[k]]; };
    switch (node.kind) {
      case OpKind::input_a:
        check_input(node, input_a);
        acts.values[i] = input_a;
        break;
      case OpKind::input_b:
        check_input(node, input_b);
        acts.values[i] = input_b;
        break;
      case OpKind::conv:
        acts.values[i] = ops::conv2d(in(0), param(model, node.weight), param(model, node.bias),
                                     node.stride, node.pad);
        break;
      case OpKind::relu: acts.values[i] = ops::relu(in(0)); break;
      case OpKind::pool: acts.values[i] = ops::pool2(in(0), node.pool, &acts.argmax[i]); break;
      case OpKind::adaptive_avg_pool:
        acts.values[i] = ops::adaptive_avg_pool(in(0), node.out.h, node.out.w);
        break;
      case OpKind::fuse: acts.values[i] = fuse_forward(*node.fid, in(0), in(1)); break;
      case OpKind::concat: {
        std::vector<const Tensor*> parts;
        for (std::size_t k = 0; k < node.inputs.size(); ++k) parts.push_back(&in(k));
        acts.values[i] = ops::concat_channels(parts);
        break;
      }
      case OpKind::flatten: {
        const Shape& s = in(0).shape();
        acts.values[i] = in(0).reshaped(Shape{s.n, s.sample(), 1, 1});
        break;
      }
      case OpKind::linear:
        acts.values[i] = ops::linear(in(0), param(model, node.weight), param(model, node.bias));
        break;
    }
  }
  return acts;
}

Tensor predict_logits(const Model& model, const Tensor& input_a, const Tensor& input_b) {
  Activations acts = forward(model, input_a, input_b);
  return std::move(acts.values[acts.output]);
}

std::vector<Tensor> backward(const Model& model, const Activations& acts,
                             const Tensor& grad_output) {
  const auto& nodes = model.nodes();
  const auto& params = model.parameters();
  std::vector<Tensor> param_grads;
  param_grads.reserve(params.size());
  for (const Parameter& p : params) param_grads.emplace_back(p.value.shape());

  if (!(grad_output.shape() == acts.result().shape())) {
    raise(ErrorCode::shape_mismatch, "output gradient " + to_string(grad_output.shape()) +
                                         " does not match output " +
                                         to_string(acts.result().shape()));
  }

  std::vector<Tensor> grads(nodes.size());
  grads[model.output()] = grad_output;

  auto needs_grad = [&](std::size_t node) {
    const OpKind k = nodes[node].kind;
    return k != OpKind::input_a && k != OpKind::input_b;
  };
  auto push = [&](std::size_t node, Tensor g) {
    if (grads[node].empty()) {
      grads[node] = std::move(g);
    } else {
      ops::accumulate(grads[node], g);
    }
  };

  for (std::size_t idx = nodes.size(); idx-- > 0;) {
    if (grads[idx].empty()) continue;
    const Node& node = nodes[idx];
    const Tensor& g = grads[idx];
    auto in = [&](std::size_t k) -> const Tensor& { return acts.values[node.inputs[k]]; };
    switch (node.kind) {
      case OpKind::input_a:
      case OpKind::input_b: break;
      case OpKind::conv: {
        const std::size_t src = node.inputs[0];
        Tensor dx;
        ops::conv2d_backward(in(0), param(model, node.weight), node.stride, node.pad, g,
                             needs_grad(src) ? &dx : nullptr, param_grads[node.weight],
                             param_grads[node.bias]);
        if (needs_grad(src)) push(src, std::move(dx));
        break;
      }
      case OpKind::relu: push(node.inputs[0], ops::relu_backward(acts.values[idx], g)); break;
      case OpKind::pool:
        push(node.inputs[0], ops::pool2_backward(in(0).shape(), node.pool, acts.argmax[idx], g));
        break;
      case OpKind::adaptive_avg_pool:
        push(node.inputs[0], ops::adaptive_avg_pool_backward(in(0).shape(), g));
        break;
      case OpKind::fuse: {
        FuseGradPair pair = fuse_backward(*node.fid, in(0), in(1), g);
        if (needs_grad(node.inputs[0])) push(node.inputs[0], std::move(pair.grad_a));
        if (needs_grad(node.inputs[1])) push(node.inputs[1], std::move(pair.grad_b));
        break;
      }
      case OpKind::concat: {
        std::vector<Tensor> parts;
        parts.reserve(node.inputs.size());
        for (std::size_t k = 0; k < node.inputs.size(); ++k) parts.emplace_back(in(k).shape());
        std::vector<Tensor*> ptrs;
        for (Tensor& t : parts) ptrs.push_back(&t);
        ops::concat_channels_backward(g, ptrs);
        for (std::size_t k = 0; k < node.inputs.size(); ++k) {
          if (needs_grad(node.inputs[k])) push(node.inputs[k], std::move(parts[k]));
        }
        break;
      }
      case OpKind::flatten: push(node.inputs[0], g.reshaped(in(0).shape())); break;
      case OpKind::linear: {
        const std::size_t src = node.inputs[0];
        Tensor dx;
        ops::linear_backward(in(0), param(model, node.weight), g, needs_grad(src) ? &dx : nullptr,
                             param_grads[node.weight], param_grads[node.bias]);
        if (needs_grad(src)) push(src, std::move(dx));
        break;
      }
    }
  }
  return param_grads;
}

std::size_t stage_output_extent(const StageSpec& stage, std::size_t extent) {
  std::size_t out = ops::conv_output_extent(extent, stage.kernel, stage.stride, stage.kernel / 2);
  if (stage.pool != PoolKind::none) out /= 2;
  return out;
}

Tensor stage_forward(const StageSpec& stage, const StageWeights& weights, const Tensor& x) {
  if (x.shape().c != stage.in_channels) {
    raise(ErrorCode::shape_mismatch, "stage expects " + std::to_string(stage.in_channels) +
                                         " channels, got " + std::to_string(x.shape().c));
  }
  const Shape expected{stage.out_channels, stage.in_channels, stage.kernel, stage.kernel};
  if (!(weights.weight.shape() == expected) || weights.bias.size() != stage.out_channels) {
    raise(ErrorCode::shape_mismatch, "stage weights do not match spec");
  }
  Tensor y = ops::relu(ops::conv2d(x, weights.weight, weights.bias, stage.stride, stage.kernel / 2));
  return ops::pool2(y, stage.pool, nullptr);
}

Tensor mlp_forward(std::span<const DenseLayer> layers, const Tensor& x) {
  if (layers.empty()) raise(ErrorCode::shape_mismatch, "empty MLP");
  Tensor h = x.reshaped(Shape{x.shape().n, x.shape().sample(), 1, 1});
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = ops::linear(h, layers[i].weight, layers[i].bias);
    if (i + 1 < layers.size()) h = ops::relu(h);
  }
  return h;
}

}  // namespace pairfuse
