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

#include "pairfuse/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "pairfuse/error.hpp"
#include "pairfuse/fuse_graph.hpp"

namespace pairfuse {

using nlohmann::json;

namespace {

json stage_to_json(const StageSpec& s) {
  return json{{"in", s.in_channels},
              {"out", s.out_channels},
              {"kernel", s.kernel},
              {"stride", s.stride},
              {"pool", std::string(to_string(s.pool))}};
}

StageSpec stage_from_json(const json& j) {
  StageSpec s;
  s.in_channels = j.value("in", std::size_t{0});
  s.out_channels = j.at("out").get<std::size_t>();
  s.kernel = j.value("kernel", std::size_t{3});
  s.stride = j.value("stride", std::size_t{1});
  s.pool = pool_kind_from_string(j.value("pool", std::string("none")));
  return s;
}

json config_json(const ModelConfig& cfg) {
  json stages = json::array(), post = json::array();
  for (const StageSpec& s : cfg.stages) stages.push_back(stage_to_json(s));
  for (const StageSpec& s : cfg.post_stages) post.push_back(stage_to_json(s));
  json plan{{"mode", std::string(to_string(cfg.plan.mode))}};
  plan["h_fid"] = cfg.plan.h_fid ? json(cfg.plan.h_fid->value()) : json(nullptr);
  plan["v_fid"] = cfg.plan.v_fid ? json(cfg.plan.v_fid->value()) : json(nullptr);
  return json{{"input", {cfg.input_channels, cfg.input_height, cfg.input_width}},
              {"stages", stages},
              {"post_stages", post},
              {"head", {{"layers", cfg.head.layer_widths}, {"classes", cfg.head.out_classes}}},
              {"plan", plan}};
}

ModelConfig config_from(const json& j) {
  ModelConfig cfg;
  const auto input = j.at("input").get<std::vector<std::size_t>>();
  if (input.size() != 3) raise(ErrorCode::validation_error, "\"input\" must be [channels, height, width]");
  cfg.input_channels = input[0];
  cfg.input_height = input[1];
  cfg.input_width = input[2];
  for (const json& s : j.at("stages")) cfg.stages.push_back(stage_from_json(s));
  for (const json& s : j.value("post_stages", json::array())) cfg.post_stages.push_back(stage_from_json(s));
  const json& head = j.at("head");
  cfg.head.layer_widths = head.at("layers").get<std::vector<std::size_t>>();
  cfg.head.out_classes = head.value("classes", std::size_t{4});
  const json& plan = j.at("plan");
  cfg.plan.mode = architecture_from_string(plan.at("mode").get<std::string>());
  auto fid = [&](const char* key) -> std::optional<FuseFunctionId> {
    if (!plan.contains(key) || plan[key].is_null()) return std::nullopt;
    return FuseFunctionId(plan[key].get<int>());
  };
  cfg.plan.h_fid = fid("h_fid");
  cfg.plan.v_fid = fid("v_fid");
  return cfg;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

ModelConfig model_config_from_json(std::string_view text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    raise(ErrorCode::parse_error, std::string("model config: ") + e.what());
  }
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::string config_hash(const ModelConfig& cfg) { return hash_hex(fnv1a64(config_json(cfg).dump())); }

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  json params = json::array();
  for (const Parameter& p : model.parameters()) {
    const Shape& s = p.value.shape();
    params.push_back({{"name", p.name},
                      {"shape", {s.n, s.c, s.h, s.w}},
                      {"values", std::vector<double>(p.value.values().begin(), p.value.values().end())}});
  }
  const json doc{{"format", "pairfuse-checkpoint"},
                 {"version", kCheckpointVersion},
                 {"config", config_json(model.config())},
                 {"config_hash", config_hash(model.config())},
                 {"parameters", params}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::io_error, "cannot write checkpoint " + path.string());
  out << doc.dump() << '\n';
  if (!out) raise(ErrorCode::io_error, "short write on checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::io_error, "cannot open checkpoint " + path.string());
  json doc;
  ModelConfig cfg;
  try {
    doc = json::parse(in);
    if (doc.value("format", std::string()) != "pairfuse-checkpoint") {
      raise(ErrorCode::validation_error, path.string() + " is not a checkpoint");
    }
    const int version = doc.at("version").get<int>();
    if (version != kCheckpointVersion) {
      raise(ErrorCode::schema_version_mismatch,
            "checkpoint version " + std::to_string(version) + ", expected " +
                std::to_string(kCheckpointVersion));
    }
    cfg = config_from(doc.at("config"));
  } catch (const json::exception& e) {
    raise(ErrorCode::parse_error, path.string() + ": " + e.what());
  }
  if (doc.at("config_hash").get<std::string>() != config_hash(cfg)) {
    raise(ErrorCode::validation_error, path.string() + ": config hash does not match stored config");
  }
  Model model = build_model(cfg);
  const json& params = doc.at("parameters");
  if (params.size() != model.parameters().size()) {
    raise(ErrorCode::validation_error, path.string() + ": parameter count differs from the graph");
  }
  for (const json& p : params) {
    Parameter& dst = model.parameter(p.at("name").get<std::string>());
    const auto shape = p.at("shape").get<std::vector<std::size_t>>();
    const Shape s{shape.at(0), shape.at(1), shape.at(2), shape.at(3)};
    if (!(s == dst.value.shape())) {
      raise(ErrorCode::validation_error, "checkpoint parameter " + dst.name + " has shape " +
                                             to_string(s) + ", graph wants " +
                                             to_string(dst.value.shape()));
    }
    dst.value = Tensor(s, p.at("values").get<std::vector<double>>());
  }
  return model;
}

}  // namespace pairfuse
