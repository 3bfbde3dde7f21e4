// Copyright 2026 The corrstruct Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <fstream>
#include <string>

#include "corrstruct/config.hpp"
#include "corrstruct/error.hpp"
#include "corrstruct/image.hpp"
#include "corrstruct/manifest.hpp"
#include "support.hpp"

using namespace corrstruct;
using corrstruct::testing::thrown_code;

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

}  // namespace

TEST_CASE("an empty config keeps every default") {
  CHECK(parse_config("") == PipelineConfig{});
  CHECK(parse_config("# only a comment\n\n") == PipelineConfig{});
  CHECK_NOTHROW(PipelineConfig{}.validate());
}

TEST_CASE("config values override defaults per section") {
  const PipelineConfig cfg = parse_config(
      "[learn]\n"
      "epsilon = 0.35  # faster updates\n"
      "max_iters = 12\n"
      "use_eval_module = true\n"
      "[metric]\n"
      "mode = \"per_location\"\n"
      "ridge = 0.5\n"
      "[multi]\n"
      "mode = \"auto\"\n"
      "[gallery_grid]\n"
      "stride_y = 8\n");
  CHECK(cfg.learn.epsilon == 0.35);
  CHECK(cfg.learn.max_iters == 12);
  CHECK(cfg.learn.use_eval_module);
  CHECK(cfg.learn.t_d == 32);
  CHECK(cfg.metric.mode == MetricMode::kPerLocation);
  CHECK(cfg.metric.ridge == 0.5);
  CHECK(cfg.multi.mode == MultiMode::kAuto);
  CHECK(cfg.gallery_grid.stride_y == 8);
  CHECK(cfg.gallery_grid.stride_x == default_gallery_spec().stride_x);
}

TEST_CASE("dumped configs parse back to equal configs") {
  PipelineConfig cfg;
  CHECK(parse_config(dump_config(cfg)) == cfg);
  cfg.learn.epsilon = 0.1 + 0.2;  // not exactly representable in short decimal
  cfg.learn.joint_normalization = true;
  cfg.metric.ridge = 1e-7;
  cfg.features.pca_dim = 40;
  cfg.multi.mode = MultiMode::kManual;
  cfg.multi.confidence_percentile = 12.5;
  cfg.protocol.fraction = 0.6;
  cfg.features.color_space = ColorSpace::kHsv;
  CHECK(parse_config(dump_config(cfg)) == cfg);
  cfg.features.pca_dim.reset();
  cfg.metric.ridge.reset();
  CHECK(parse_config(dump_config(cfg)) == cfg);
}

TEST_CASE("config errors name the offending line") {
  const auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kParseError);
      return std::string(e.what());
    }
    FAIL("config parsed");
    return std::string();
  };
  CHECK(message("[learn]\nmax_iters = ten\n").find("line 2") != std::string::npos);
  CHECK(message("\n\n[learn\n").find("line 3") != std::string::npos);
  CHECK(message("[learn]\nbogus = 1\n").find("learn.bogus") != std::string::npos);
  CHECK(message("[learn]\nuse_eval_module = yes\n").find("line 2") != std::string::npos);
  CHECK(message("[learn]\nmax_iters = \"3\"\n").find("line 2") != std::string::npos);
  CHECK(message("just words\n").find("line 1") != std::string::npos);
  CHECK(thrown_code([] { load_config("/nonexistent/corrstruct.toml"); }) == ErrorCode::kMissingFile);
}

TEST_CASE("config validation catches inconsistent settings") {
  const auto invalid = [](auto edit) {
    PipelineConfig cfg;
    edit(cfg);
    return thrown_code([&] { cfg.validate(); }) == ErrorCode::kInvalidSpec;
  };
  CHECK(invalid([](PipelineConfig& c) { c.gallery_grid.image_h = 120; }));
  CHECK(invalid([](PipelineConfig& c) { c.protocol.fraction = 1.0; }));
  CHECK(invalid([](PipelineConfig& c) { c.protocol.splits = 0; }));
  CHECK(invalid([](PipelineConfig& c) { c.multi.confidence_percentile = 101.0; }));
  CHECK(invalid([](PipelineConfig& c) { c.metric.dissimilar_factor = 0; }));
  CHECK(invalid([](PipelineConfig& c) { c.learn.epsilon = 2.0; }));
}

TEST_CASE("manifests round trip and validate") {
  const auto dir = testing::scratch_dir("manifest");
  std::filesystem::create_directories(dir / "A");
  std::filesystem::create_directories(dir / "B");
  save_image(dir / "A/x.png", RgbImage(4, 4, 10));
  save_image(dir / "B/x.png", RgbImage(4, 4, 20));
  const std::vector<ManifestRow> rows{{"a1", "A", "p1", "front", "A/x.png"},
                                      {"b1", "B", "p1", "", "B/x.png"}};
  write_manifest(dir / "m.csv", rows);
  const Manifest m = parse_manifest(dir / "m.csv");
  CHECK(m.rows == rows);
  CHECK(m.resolve(m.rows[1]) == dir / "B/x.png");

  const auto code = [&](const std::string& text) {
    write_file(dir / "bad.csv", text);
    return thrown_code([&] { parse_manifest(dir / "bad.csv"); });
  };
  const std::string head = std::string(kManifestHeader) + "\n";
  CHECK(code("image_id,camera\n") == ErrorCode::kParseError);
  CHECK(code(head + "a1,A,p1,front\n") == ErrorCode::kParseError);
  CHECK(code(head + "a1,C,p1,,A/x.png\nb1,B,p1,,B/x.png\n") == ErrorCode::kParseError);
  CHECK(code(head + "a1,A,p1,,A/x.png\nb1,B,p1,,B/missing.png\n") == ErrorCode::kMissingFile);
  CHECK(code(head + "a1,A,p1,,A/x.png\na1,B,p1,,B/x.png\n") == ErrorCode::kDuplicateId);
  CHECK(code(head + "a1,A,p1,,A/x.png\nb1,B,p2,,B/x.png\n") == ErrorCode::kInvalidSpec);
  CHECK(code("") == ErrorCode::kParseError);
  CHECK(thrown_code([&] { parse_manifest(dir / "absent.csv"); }) == ErrorCode::kMissingFile);

  write_file(dir / "bom.csv", "\xEF\xBB\xBF" + head + "a1,A,p1,,A/x.png\r\nb1,B,p1,,B/x.png\r\n");
  CHECK(parse_manifest(dir / "bom.csv").rows.size() == 2);
  std::filesystem::remove_all(dir);
}
