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

#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pairfuse/error.hpp"
#include "pairfuse/fuse_graph.hpp"
#include "pairfuse/persist.hpp"
#include "pairfuse/serialize.hpp"
#include "scratch.hpp"

namespace pairfuse {
namespace {

using testing::ScratchDir;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::io_error;
}

std::vector<ModelConfig> sample_configs() {
  return {
      desk_scale_config({Architecture::fuse_hv, FuseFunctionId(11), FuseFunctionId(8)}),
      desk_scale_config({Architecture::fuse_h, FuseFunctionId(2), std::nullopt}, 48),
      tiny_config({Architecture::fuse_v, std::nullopt, FuseFunctionId(13)}),
      tiny_config({Architecture::retrofit_single, FuseFunctionId(1), std::nullopt}),
      tiny_config({Architecture::retrofit_double, FuseFunctionId(12), std::nullopt}),
      tiny_config({Architecture::concat_baseline, std::nullopt, std::nullopt}),
  };
}

TEST(ModelConfigJson, RoundTrip) {
  for (const ModelConfig& cfg : sample_configs()) {
    const std::string text = model_config_to_json(cfg);
    EXPECT_EQ(model_config_from_json(text), cfg) << text;
    EXPECT_EQ(model_config_to_json(model_config_from_json(text)), text);
  }
}

TEST(ModelConfigJson, RejectsMalformed) {
  EXPECT_EQ(code_of([] { model_config_from_json("{"); }), ErrorCode::parse_error);
  std::string text = model_config_to_json(sample_configs()[0]);
  text.replace(text.find("\"fuse_hv\""), 9, "\"spiral\"");
  EXPECT_NE(code_of([&] { model_config_from_json(text); }), ErrorCode::io_error);
}

TEST(ConfigHash, StableAndSensitive) {
  const auto cfgs = sample_configs();
  EXPECT_EQ(config_hash(cfgs[0]), config_hash(cfgs[0]));
  EXPECT_EQ(config_hash(cfgs[0]).size(), 16u);
  for (std::size_t i = 1; i < cfgs.size(); ++i) EXPECT_NE(config_hash(cfgs[0]), config_hash(cfgs[i]));
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(hash_hex(0xabcull), "0000000000000abc");
}

TEST(Checkpoint, RoundTripIsBitExact) {
  ScratchDir dir("ckpt");
  for (const ModelConfig& cfg : sample_configs()) {
    const Model m = init_parameters(cfg, 77);
    save_checkpoint(m, dir / "m.json");
    const Model back = load_checkpoint(dir / "m.json");
    EXPECT_EQ(back.config(), cfg);
    ASSERT_EQ(back.parameters().size(), m.parameters().size());
    for (std::size_t i = 0; i < m.parameters().size(); ++i) {
      EXPECT_EQ(back.parameters()[i].name, m.parameters()[i].name);
      EXPECT_EQ(back.parameters()[i].value, m.parameters()[i].value);
    }
    save_checkpoint(back, dir / "again.json");
    EXPECT_TRUE(testing::same_bytes(dir / "m.json", dir / "again.json"));
  }
}

TEST(Checkpoint, VersionAndIntegrityChecks) {
  ScratchDir dir("ckpt_bad");
  save_checkpoint(init_parameters(sample_configs()[2], 1), dir / "m.json");
  const std::string text = read_text_file(dir / "m.json");

  std::string future = text;
  const auto at = future.find("\"version\":1");
  ASSERT_NE(at, std::string::npos);
  future.replace(at, 11, "\"version\":2");
  write_text_file(dir / "future.json", future);
  EXPECT_EQ(code_of([&] { load_checkpoint(dir / "future.json"); }), ErrorCode::schema_version_mismatch);

  std::string tampered = text;
  const auto hash = tampered.find("\"config_hash\":\"");
  tampered[hash + 15] = tampered[hash + 15] == '0' ? '1' : '0';
  write_text_file(dir / "tampered.json", tampered);
  EXPECT_EQ(code_of([&] { load_checkpoint(dir / "tampered.json"); }), ErrorCode::validation_error);

  EXPECT_EQ(code_of([&] { load_checkpoint(dir / "missing.json"); }), ErrorCode::io_error);
  write_text_file(dir / "junk.json", "not json");
  EXPECT_EQ(code_of([&] { load_checkpoint(dir / "junk.json"); }), ErrorCode::parse_error);
}

}  // namespace
}  // namespace pairfuse
