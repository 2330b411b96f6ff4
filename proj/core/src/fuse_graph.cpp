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

#include "pairfuse/fuse_graph.hpp"

#include "pairfuse/error.hpp"
#include "pairfuse/ops.hpp"

namespace pairfuse {

Tensor fuse_h_apply(FuseFunctionId h_fid, const Tensor& ft_a, const Tensor& ft_b) {
  return fuse_forward(h_fid, ft_a, ft_b);
}

Tensor apply_adapter(const ShapeAdapter& adapter, const Tensor& x) {
  Tensor pooled = ops::adaptive_avg_pool(x, adapter.target.h, adapter.target.w);
  if (adapter.projection_weight) {
    if (!adapter.projection_bias) {
      raise(ErrorCode::shape_mismatch, "adapter projection is missing its bias");
    }
    return ops::conv2d(pooled, *adapter.projection_weight, *adapter.projection_bias, 1, 0);
  }
  if (pooled.shape().c != adapter.target.c) {
    raise(ErrorCode::shape_mismatch, "adapter without projection cannot map " +
                                         std::to_string(pooled.shape().c) + " channels to " +
                                         std::to_string(adapter.target.c));
  }
  return pooled;
}

Tensor fuse_v_apply(FuseFunctionId v_fid, const Tensor& earlier, const Tensor& later,
                    const ShapeAdapter& adapter) {
  const Shape& s = later.shape();
  if (adapter.target.c != s.c || adapter.target.h != s.h || adapter.target.w != s.w) {
    raise(ErrorCode::shape_mismatch, "adapter target " + to_string(adapter.target) +
                                         " disagrees with later tensor " + to_string(s));
  }
  return fuse_forward(v_fid, apply_adapter(adapter, earlier), later);
}

namespace {

struct StageParams {
  std::size_t weight;
  std::size_t bias;
};

/// Appends nodes to a Model while tracking per-sample shapes;
/// inconsistencies surface as invalid_config.
class GraphBuilder {
 public:
  explicit GraphBuilder(const ModelConfig& cfg) : model_(cfg) {
    if (cfg.input_channels == 0 || cfg.input_height == 0 || cfg.input_width == 0) {
      raise(ErrorCode::invalid_config, "input dimensions must be positive");
    }
  }

  std::size_t input(OpKind kind) {
    const ModelConfig& c = model_.config();
    Node node;
    node.kind = kind;
    node.out = Shape{1, c.input_channels, c.input_height, c.input_width};
    node.label = kind == OpKind::input_a ? "tensor_a" : "tensor_b";
    return model_.add_node(std::move(node));
  }

  const Shape& shape(std::size_t node) const { return model_.nodes()[node].out; }

  StageParams stage_params(const std::string& prefix, const StageSpec& spec,
                           std::size_t in_channels) {
    if (spec.in_channels != 0 && spec.in_channels != in_channels) {
      raise(ErrorCode::invalid_config, prefix + " expects " + std::to_string(spec.in_channels) +
                                           " input channels but receives " +
                                           std::to_string(in_channels));
    }
    if (spec.out_channels == 0 || spec.kernel == 0 || spec.kernel % 2 == 0 || spec.stride == 0) {
      raise(ErrorCode::invalid_config,
            prefix + " needs positive width, an odd kernel and stride >= 1");
    }
    const std::size_t fan_in = in_channels * spec.kernel * spec.kernel;
    StageParams p;
    p.weight = model_.add_parameter(prefix + ".weight",
                                    Shape{spec.out_channels, in_channels, spec.kernel, spec.kernel},
                                    fan_in, false);
    p.bias = model_.add_parameter(prefix + ".bias", Shape{1, spec.out_channels, 1, 1}, fan_in, true);
    return p;
  }

  std::size_t stage(std::size_t x, const StageSpec& spec, const StageParams& params,
                    const std::string& label) {
    const Shape in = shape(x);
    const std::size_t pad = spec.kernel / 2;
    const std::size_t oh = ops::conv_output_extent(in.h, spec.kernel, spec.stride, pad);
    const std::size_t ow = ops::conv_output_extent(in.w, spec.kernel, spec.stride, pad);
    if (oh == 0 || ow == 0) raise(ErrorCode::invalid_config, label + " output collapses to zero");

    Node conv;
    conv.kind = OpKind::conv;
    conv.inputs = {x};
    conv.weight = params.weight;
    conv.bias = params.bias;
    conv.stride = spec.stride;
    conv.pad = pad;
    conv.out = Shape{1, spec.out_channels, oh, ow};
    conv.label = label + ".conv";
    std::size_t y = model_.add_node(std::move(conv));

    Node relu;
    relu.kind = OpKind::relu;
    relu.inputs = {y};
    relu.out = shape(y);
    relu.label = label + ".relu";
    y = model_.add_node(std::move(relu));

    if (spec.pool != PoolKind::none) {
      if (oh / 2 == 0 || ow / 2 == 0) {
        raise(ErrorCode::invalid_config,
              label + " pooling collapses a " + std::to_string(oh) + "x" + std::to_string(ow) +
                  " map to zero");
      }
      Node pool;
      pool.kind = OpKind::pool;
      pool.pool = spec.pool;
      pool.inputs = {y};
      pool.out = Shape{1, spec.out_channels, oh / 2, ow / 2};
      pool.label = label + ".pool";
      y = model_.add_node(std::move(pool));
    }
    return y;
  }

  std::size_t new_stage(std::size_t x, const StageSpec& spec, const std::string& prefix) {
    return stage(x, spec, stage_params(prefix, spec, shape(x).c), prefix);
  }

  std::size_t adaptive_pool(std::size_t x, std::size_t h, std::size_t w, const std::string& label) {
    const Shape in = shape(x);
    if (in.h == h && in.w == w) return x;
    if (h > in.h || w > in.w) {
      raise(ErrorCode::invalid_config, label + " cannot upsample " + to_string(in));
    }
    Node node;
    node.kind = OpKind::adaptive_avg_pool;
    node.inputs = {x};
    node.out = Shape{1, in.c, h, w};
    node.label = label;
    return model_.add_node(std::move(node));
  }

  std::size_t adapter(std::size_t x, const Shape& target, const std::string& prefix) {
    std::size_t y = adaptive_pool(x, target.h, target.w, prefix + ".pool");
    const std::size_t cin = shape(y).c;
    if (cin == target.c) return y;
    Node proj;
    proj.kind = OpKind::conv;
    proj.inputs = {y};
    proj.weight = model_.add_parameter(prefix + ".weight", Shape{target.c, cin, 1, 1}, cin, false);
    proj.bias = model_.add_parameter(prefix + ".bias", Shape{1, target.c, 1, 1}, cin, true);
    proj.out = Shape{1, target.c, target.h, target.w};
    proj.label = prefix + ".projection";
    return model_.add_node(std::move(proj));
  }

  std::size_t fuse(FuseFunctionId fid, std::size_t a, std::size_t b, const std::string& label) {
    if (auto problem = validate_shapes(fid, shape(a), shape(b))) {
      raise(ErrorCode::invalid_config, label + ": " + std::string(to_string(problem->code)) +
                                           ": " + problem->message);
    }
    Node node;
    node.kind = OpKind::fuse;
    node.fid = fid;
    node.inputs = {a, b};
    node.out = shape(a);
    node.label = label;
    return model_.add_node(std::move(node));
  }

  std::size_t vertical(FuseFunctionId fid, std::size_t earlier, std::size_t later,
                       const std::string& label) {
    const std::size_t adapted = adapter(earlier, shape(later), label + ".adapter");
    return fuse(fid, adapted, later, label);
  }

  std::size_t concat(const std::vector<std::size_t>& parts, const std::string& label) {
    Shape out = shape(parts.front());
    out.c = 0;
    for (std::size_t p : parts) {
      const Shape& s = shape(p);
      if (s.h != out.h || s.w != out.w) {
        raise(ErrorCode::invalid_config, label + " inputs differ spatially");
      }
      out.c += s.c;
    }
    Node node;
    node.kind = OpKind::concat;
    node.inputs = parts;
    node.out = out;
    node.label = label;
    return model_.add_node(std::move(node));
  }

  std::size_t post_stages_and_head(std::size_t x) {
    const ModelConfig& c = model_.config();
    for (std::size_t i = 0; i < c.post_stages.size(); ++i) {
      x = new_stage(x, c.post_stages[i], "post.stage" + std::to_string(i + 1));
    }
    return head(x);
  }

  std::size_t head(std::size_t x) {
    const MLPSpec& spec = model_.config().head;
    if (spec.layer_widths.empty() || spec.layer_widths.back() != spec.out_classes) {
      raise(ErrorCode::invalid_config, "MLP head must end with out_classes units");
    }
    Node flat;
    flat.kind = OpKind::flatten;
    flat.inputs = {x};
    flat.out = Shape{1, shape(x).sample(), 1, 1};
    flat.label = "head.flatten";
    std::size_t h = model_.add_node(std::move(flat));
    for (std::size_t i = 0; i < spec.layer_widths.size(); ++i) {
      const std::size_t in = shape(h).c;
      const std::size_t out = spec.layer_widths[i];
      if (out == 0) raise(ErrorCode::invalid_config, "MLP widths must be positive");
      const std::string prefix = "head.fc" + std::to_string(i + 1);
      Node lin;
      lin.kind = OpKind::linear;
      lin.inputs = {h};
      lin.weight = model_.add_parameter(prefix + ".weight", Shape{out, in, 1, 1}, in, false);
      lin.bias = model_.add_parameter(prefix + ".bias", Shape{1, out, 1, 1}, in, true);
      lin.out = Shape{1, out, 1, 1};
      lin.label = prefix;
      h = model_.add_node(std::move(lin));
      if (i + 1 < spec.layer_widths.size()) {
        Node relu;
        relu.kind = OpKind::relu;
        relu.inputs = {h};
        relu.out = shape(h);
        relu.label = prefix + ".relu";
        h = model_.add_node(std::move(relu));
      }
    }
    return h;
  }

  Model finish(std::size_t output) {
    model_.set_output(output);
    return std::move(model_);
  }

 private:
  Model model_;
};

void require_stages(const ModelConfig& cfg) {
  if (cfg.stages.empty()) raise(ErrorCode::invalid_config, "at least one branch stage is required");
}

std::string stage_name(char branch, std::size_t i) {
  return std::string("branch_") + branch + ".stage" + std::to_string(i + 1);
}

}  // namespace

Model build_fuse_h_model(const ModelConfig& cfg, FuseFunctionId h_fid) {
  require_stages(cfg);
  GraphBuilder g(cfg);
  std::size_t a = g.input(OpKind::input_a);
  std::size_t b = g.input(OpKind::input_b);
  std::vector<std::size_t> fused;
  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    a = g.new_stage(a, cfg.stages[i], stage_name('a', i));
    b = g.new_stage(b, cfg.stages[i], stage_name('b', i));
    fused.push_back(g.fuse(h_fid, a, b, "fuse_h" + std::to_string(i + 1)));
  }
  const Shape last = g.shape(fused.back());
  std::vector<std::size_t> pooled;
  for (std::size_t i = 0; i < fused.size(); ++i) {
    pooled.push_back(g.adaptive_pool(fused[i], last.h, last.w, "fuse_h" + std::to_string(i + 1) + ".pool"));
  }
  std::size_t x = pooled.size() == 1 ? pooled.front() : g.concat(pooled, "concat_h");
  return g.finish(g.post_stages_and_head(x));
}

Model build_fuse_v_model(const ModelConfig& cfg, FuseFunctionId v_fid) {
  require_stages(cfg);
  GraphBuilder g(cfg);
  std::vector<std::size_t> outputs;
  for (char branch : {'a', 'b'}) {
    std::size_t y = g.input(branch == 'a' ? OpKind::input_a : OpKind::input_b);
    for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
      const std::size_t z = g.new_stage(y, cfg.stages[i], stage_name(branch, i));
      y = i == 0 ? z
                 : g.vertical(v_fid, y, z,
                              std::string("branch_") + branch + ".fuse_v" + std::to_string(i) +
                                  std::to_string(i + 1));
    }
    outputs.push_back(y);
  }
  return g.finish(g.post_stages_and_head(g.concat(outputs, "concat_branches")));
}

Model build_fuse_hv_model(const ModelConfig& cfg, FuseFunctionId h_fid, FuseFunctionId v_fid) {
  require_stages(cfg);
  GraphBuilder g(cfg);
  std::size_t a = g.input(OpKind::input_a);
  std::size_t b = g.input(OpKind::input_b);
  std::vector<std::size_t> level;
  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    a = g.new_stage(a, cfg.stages[i], stage_name('a', i));
    b = g.new_stage(b, cfg.stages[i], stage_name('b', i));
    level.push_back(g.fuse(h_fid, a, b, "fuse_h" + std::to_string(i + 1)));
  }
  for (std::size_t depth = 1; level.size() > 1; ++depth) {
    std::vector<std::size_t> next;
    for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
      next.push_back(g.vertical(v_fid, level[i], level[i + 1],
                                "fuse_v" + std::to_string(depth) + "." + std::to_string(i / 2 + 1)));
    }
    if (level.size() % 2 == 1) next.push_back(level.back());
    level = std::move(next);
  }
  return g.finish(g.post_stages_and_head(level.front()));
}

Model retrofit_backbone(const ModelConfig& backbone, RetrofitMode mode,
                        std::optional<FuseFunctionId> h_fid) {
  require_stages(backbone);
  if (mode != RetrofitMode::concat_baseline && !h_fid) {
    raise(ErrorCode::invalid_config, "retrofit with a Fuse Module needs a fuse function");
  }
  GraphBuilder g(backbone);
  std::size_t a = g.input(OpKind::input_a);
  std::size_t b = g.input(OpKind::input_b);
  if (mode == RetrofitMode::single) {
    for (std::size_t i = 0; i < backbone.stages.size(); ++i) {
      const std::string prefix = "extractor.stage" + std::to_string(i + 1);
      const StageParams params = g.stage_params(prefix, backbone.stages[i], g.shape(a).c);
      a = g.stage(a, backbone.stages[i], params, prefix + ".a");
      b = g.stage(b, backbone.stages[i], params, prefix + ".b");
    }
  } else {
    for (std::size_t i = 0; i < backbone.stages.size(); ++i) {
      a = g.new_stage(a, backbone.stages[i], stage_name('a', i));
      b = g.new_stage(b, backbone.stages[i], stage_name('b', i));
    }
  }
  const std::size_t joined = mode == RetrofitMode::concat_baseline
                                 ? g.concat({a, b}, "concat_features")
                                 : g.fuse(*h_fid, a, b, "fuse_h");
  return g.finish(g.post_stages_and_head(joined));
}

Model build_model(const ModelConfig& cfg) {
  const FusePlan& plan = cfg.plan;
  auto need = [](const std::optional<FuseFunctionId>& fid, const char* what) {
    if (!fid) raise(ErrorCode::invalid_config, std::string(what) + " is required by this plan");
    return *fid;
  };
  switch (plan.mode) {
    case Architecture::fuse_h: return build_fuse_h_model(cfg, need(plan.h_fid, "h_fid"));
    case Architecture::fuse_v: return build_fuse_v_model(cfg, need(plan.v_fid, "v_fid"));
    case Architecture::fuse_hv:
      return build_fuse_hv_model(cfg, need(plan.h_fid, "h_fid"), need(plan.v_fid, "v_fid"));
    case Architecture::retrofit_single:
      return retrofit_backbone(cfg, RetrofitMode::single, need(plan.h_fid, "h_fid"));
    case Architecture::retrofit_double:
      return retrofit_backbone(cfg, RetrofitMode::double_path, need(plan.h_fid, "h_fid"));
    case Architecture::concat_baseline:
      return retrofit_backbone(cfg, RetrofitMode::concat_baseline, std::nullopt);
  }
  raise(ErrorCode::invalid_config, "unknown architecture");
}

Model init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  Model model = build_model(cfg);
  initialize_parameters(model, seed);
  return model;
}

}  // namespace pairfuse
