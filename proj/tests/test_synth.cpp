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

#include <map>
#include <string>

#include "corrstruct/error.hpp"
#include "corrstruct/synth.hpp"
#include "support.hpp"

using namespace corrstruct;
using corrstruct::testing::thrown_code;

namespace {

// Default geometry: probe patch (r, c) sits on gallery patch (2r, 2c).
PatchIndex probe_at(int r, int c) { return static_cast<PatchIndex>(r * 6 + c); }
std::ptrdiff_t gallery_at(int r, int c) { return r * 11 + c; }

LayoutPtr default_layout() {
  return make_layout(default_probe_spec(), default_gallery_spec(), 32);
}

}  // namespace

TEST_CASE("camera B shows the texture translated by whole strides") {
  TransformSpec spec;
  spec.dy = 2;
  spec.dx = -1;
  const GridSpec g = default_gallery_spec();
  const SynthDataset data = generate_dataset(5, 4, spec, g);
  REQUIRE(data.images.size() == 8);
  const int oy = 2 * g.stride_y;
  const int ox = -1 * g.stride_x;
  for (std::size_t id = 0; id < 4; ++id) {
    const RgbImage& a = data.images[2 * id];
    const RgbImage& b = data.images[2 * id + 1];
    CHECK(a.width == g.image_w);
    CHECK(a.height == g.image_h);
    int mismatches = 0;
    for (int y = 0; y + oy < g.image_h; ++y) {
      for (int x = -ox; x < g.image_w; ++x) {
        const auto* pa = a.pixel(x, y);
        const auto* pb = b.pixel(x + ox, y + oy);
        mismatches += pa[0] != pb[0] || pa[1] != pb[1] || pa[2] != pb[2];
      }
    }
    CHECK(mismatches == 0);
  }
}

TEST_CASE("generated rows pair the cameras per identity") {
  const SynthDataset data = generate_dataset(5, 4, testing::shift_spec(3), default_gallery_spec());
  REQUIRE(data.rows.size() == 8);
  CHECK(data.rows[0] == ManifestRow{"A_p0000", "A", "p0000", "front", "A/p0000.png"});
  CHECK(data.rows[7] == ManifestRow{"B_p0003", "B", "p0003", "front", "B/p0003.png"});
  CHECK(data.ground_truth == testing::shift_spec(3));
  CHECK_NOTHROW(validate_manifest_rows(data.rows));
}

TEST_CASE("generation is reproducible per seed") {
  const auto spec = testing::shift_spec(3);
  const auto a = generate_dataset(9, 6, spec, default_gallery_spec());
  const auto b = generate_dataset(9, 6, spec, default_gallery_spec());
  const auto c = generate_dataset(10, 6, spec, default_gallery_spec());
  CHECK(a.images == b.images);
  CHECK(a.images != c.images);
}

TEST_CASE("pose labels follow the mixture probabilities") {
  TransformSpec spec;
  spec.pose_mix = {{"front", 0.7, 4, 0}, {"back", 0.3, -4, 0}};
  const auto data = generate_dataset(2, 400, spec, default_gallery_spec());
  std::map<std::string, int> count;
  for (std::size_t k = 0; k < data.rows.size(); k += 2) {
    CHECK(data.rows[k].pose_label == data.rows[k + 1].pose_label);
    ++count[data.rows[k].pose_label];
  }
  CHECK(count.size() == 2);
  // 400 draws at p = 0.3: four standard deviations is about 37.
  CHECK(std::abs(count["back"] - 120) < 37);
}

TEST_CASE("transform validation") {
  TransformSpec spec;
  CHECK(spec.poses() == std::vector<PoseShift>{{"front", 1.0, 0, 0}});
  CHECK_NOTHROW(spec.validate(32));
  spec.dy = 32;
  CHECK(thrown_code([&] { spec.validate(32); }) == ErrorCode::kShiftOutOfBounds);
  spec.dy = 20;
  spec.dx = 12;
  CHECK(thrown_code([&] { spec.validate(32); }) == ErrorCode::kShiftOutOfBounds);

  TransformSpec mix;
  mix.pose_mix = {{"front", 0.5, 1, 0}, {"back", 0.4, -1, 0}};
  CHECK(thrown_code([&] { mix.validate(32); }) == ErrorCode::kInvalidSpec);
  mix.pose_mix[1].probability = 0.5;
  CHECK_NOTHROW(mix.validate(32));
  mix.pose_mix[1].label = "a,b";
  CHECK(thrown_code([&] { mix.validate(32); }) == ErrorCode::kInvalidSpec);

  TransformSpec gain;
  gain.gain_min = 1.2;
  gain.gain_max = 1.1;
  CHECK(thrown_code([&] { gain.validate(32); }) == ErrorCode::kInvalidSpec);
  CHECK(thrown_code([] { generate_dataset(1, 3, TransformSpec{}, default_gallery_spec()); }) ==
        ErrorCode::kDatasetTooSmall);
  TransformSpec far;
  far.dy = 32;  // 32 strides of 4 px cover the 128 px height
  CHECK(thrown_code([&] { generate_dataset(1, 4, far, default_gallery_spec(), 64); }) ==
        ErrorCode::kShiftOutOfBounds);
}

TEST_CASE("shifted targets on the default geometry") {
  const LayoutPtr layout = default_layout();
  CHECK(shifted_target(*layout, probe_at(0, 0), 8, 0) == gallery_at(8, 0));
  CHECK(shifted_target(*layout, probe_at(3, 2), -2, 1) == gallery_at(4, 5));
  CHECK(shifted_target(*layout, probe_at(13, 5), 1, 0) == -1);
  CHECK(shifted_target(*layout, probe_at(13, 5), -1, 0) == gallery_at(25, 10));
  CHECK(shifted_target(*layout, probe_at(0, 0), 0, -1) == -1);
}

TEST_CASE("ground-truth structures put pose mass on shifted cells") {
  const LayoutPtr layout = default_layout();
  SUBCASE("single pose with clamping") {
    const auto s = ground_truth_structure(testing::shift_spec(8), layout);
    CHECK(is_row_stochastic(s));
    CHECK(s.at(probe_at(1, 1), static_cast<PatchIndex>(gallery_at(10, 2))) == 1.0);
    CHECK(s.at(probe_at(12, 0), static_cast<PatchIndex>(gallery_at(26, 0))) == 1.0);
    CHECK(s.at(probe_at(13, 0), static_cast<PatchIndex>(gallery_at(26, 0))) == 1.0);
  }
  SUBCASE("pose mixture splits the mass") {
    TransformSpec spec;
    spec.pose_mix = {{"front", 0.25, 8, 0}, {"back", 0.75, -8, 0}};
    const auto s = ground_truth_structure(spec, layout);
    CHECK(is_row_stochastic(s));
    CHECK(s.at(probe_at(6, 3), static_cast<PatchIndex>(gallery_at(20, 6))) == 0.25);
    CHECK(s.at(probe_at(6, 3), static_cast<PatchIndex>(gallery_at(4, 6))) == 0.75);
    CHECK(s.at(probe_at(0, 3), static_cast<PatchIndex>(gallery_at(0, 6))) == 0.75);
  }
}

TEST_CASE("interior rows keep every pose target inside the grid") {
  const LayoutPtr layout = default_layout();
  const auto down = interior_rows(testing::shift_spec(8), *layout);
  CHECK(down.size() == 60);
  CHECK(down.front() == probe_at(0, 0));
  CHECK(down.back() == probe_at(9, 5));

  TransformSpec spec;
  spec.pose_mix = {{"front", 0.5, 8, 0}, {"back", 0.5, -8, 0}};
  const auto both = interior_rows(spec, *layout);
  CHECK(both.size() == 36);
  CHECK(both.front() == probe_at(4, 0));
  CHECK(interior_rows(TransformSpec{}, *layout).size() == 84);
}
