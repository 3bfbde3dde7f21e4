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

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "corrstruct/error.hpp"
#include "corrstruct/structure.hpp"
#include "support.hpp"

using namespace corrstruct;

namespace {

// One row of three 2×2 patches.
const GridSpec kStrip{6, 2, 2, 2, 2, 2};

}  // namespace

TEST_CASE("initialization weights are 1/(d+1) normalized per row") {
  const auto s = init_structure(make_layout(kStrip, kStrip, 2));
  CHECK(s.at(1, 0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(s.at(1, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.at(1, 2) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(s.at(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(s.at(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(s.at(0, 2) == 0.0);
}

TEST_CASE("T_d = 1 initialization is one-hot at co-location") {
  const LayoutPtr layout = make_layout(default_probe_spec(), default_gallery_spec(), 1);
  const auto s = init_structure(layout);
  for (PatchIndex i = 0; i < s.n_rows(); ++i) {
    CHECK(s.row(i).size() == 1);
    CHECK(s.at(i, layout->colocated(i)) == 1.0);
  }
}

TEST_CASE("default-geometry initialization matches an independent recomputation") {
  const PatchGrid probe(default_probe_spec()), gallery(default_gallery_spec());
  const auto s = init_structure(probe, gallery, 32);
  CHECK(is_row_stochastic(s));
  const Eigen::MatrixXd dense = s.dense();
  for (PatchIndex i = 0; i < probe.size(); i += 7) {
    const PatchIndex c = colocated_patch(probe, gallery, i);
    double total = 0.0;
    for (PatchIndex j = 0; j < gallery.size(); ++j) {
      const int d = patch_distance(gallery, c, j);
      if (d < 32) total += 1.0 / (d + 1);
    }
    for (PatchIndex j = 0; j < gallery.size(); ++j) {
      const int d = patch_distance(gallery, c, j);
      const double expected = d < 32 ? 1.0 / (d + 1) / total : 0.0;
      CHECK(dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ==
            doctest::Approx(expected).epsilon(1e-12));
    }
  }
  const auto narrow = init_structure(probe, gallery, 3);
  const Eigen::MatrixXd nd = narrow.dense();
  for (PatchIndex i = 0; i < probe.size(); ++i) {
    const PatchIndex c = colocated_patch(probe, gallery, i);
    for (PatchIndex j = 0; j < gallery.size(); ++j) {
      if (patch_distance(gallery, c, j) >= 3) CHECK(nd(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == 0.0);
    }
  }
}

TEST_CASE("entries outside the search range cannot be set") {
  CorrespondenceStructure s(make_layout(kStrip, kStrip, 2));
  CHECK_THROWS_AS(s.set(0, 2, 0.5), Error);
  CHECK(s.at(0, 2) == 0.0);
}

TEST_CASE("row normalization") {
  const LayoutPtr layout = make_layout(kStrip, kStrip, 2);
  SUBCASE("normalized input is unchanged") {
    const auto s = init_structure(layout);
    const auto r = normalize_rows(s);
    CHECK(r.zero_rows.empty());
    for (PatchIndex i = 0; i < 3; ++i) {
      for (PatchIndex j = 0; j < 3; ++j) CHECK(std::abs(r.structure.at(i, j) - s.at(i, j)) < 1e-12);
    }
  }
  SUBCASE("equal weights split evenly and zero rows are reported") {
    CorrespondenceStructure s(layout);
    s.set(0, 0, 2.0);
    s.set(0, 1, 2.0);
    s.set(1, 1, 1.0);
    const auto r = normalize_rows(s);
    CHECK(r.structure.at(0, 0) == 0.5);
    CHECK(r.structure.at(0, 1) == 0.5);
    CHECK(r.zero_rows == std::vector<PatchIndex>{2});
    CHECK(r.structure.at(2, 1) == 0.0);
  }
  SUBCASE("negative entries are rejected") {
    CorrespondenceStructure s(layout);
    s.set(0, 0, -1.0);
    CHECK_THROWS_AS(normalize_rows(s), Error);
  }
}

TEST_CASE("threshold mask keeps entries strictly above T_c") {
  const auto s = init_structure(make_layout(kStrip, kStrip, 2));
  const auto loose = threshold_mask(s, 0.05);
  CHECK(loose.row(1) == std::vector<PatchIndex>{0, 1, 2});
  const auto tight = threshold_mask(s, 0.3);
  CHECK(tight.row(1) == std::vector<PatchIndex>{1});
  CHECK(tight.row(0) == std::vector<PatchIndex>{0, 1});
  const auto zero = threshold_mask(s, 0.0);
  CHECK(zero.count() == 7);
  CHECK(threshold_mask(s, 0.5).row(1).empty());
}

TEST_CASE("structure files round trip bit-exactly") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const LayoutPtr layout = make_layout(default_probe_spec(), default_gallery_spec(), 32);
  CorrespondenceStructure s(layout, "random");
  for (PatchIndex i = 0; i < s.n_rows(); ++i) {
    for (double& v : s.row(i)) v = u(rng);
  }
  const auto dir = testing::scratch_dir("structure");
  save_structure(dir / "s.cstr", s);
  const auto back = load_structure(dir / "s.cstr");
  CHECK(back == s);
  CHECK(back.checksum() == s.checksum());

  const auto wide = init_structure(make_layout(default_probe_spec(), default_gallery_spec(), 20));
  save_structure(dir / "w.cstr", wide);
  CHECK(load_structure(dir / "w.cstr").t_d() == 20);

  const auto size = std::filesystem::file_size(dir / "s.cstr");
  std::filesystem::resize_file(dir / "s.cstr", size - 9);
  try {
    load_structure(dir / "s.cstr");
    FAIL("truncated file loaded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kCorruptFile);
  }
  CHECK_THROWS_AS(load_structure(dir / "missing.cstr"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("heatmap export writes the dense matrix") {
  const auto s = init_structure(make_layout(kStrip, kStrip, 2));
  const auto dir = testing::scratch_dir("heatmap");
  export_heatmap_csv(dir / "h.csv", s);
  std::ifstream in(dir / "h.csv");
  std::string line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  REQUIRE(rows.size() == 3);
  for (PatchIndex i = 0; i < 3; ++i) {
    REQUIRE(rows[i].size() == 3);
    for (PatchIndex j = 0; j < 3; ++j) CHECK(rows[i][j] == s.at(i, j));
  }
  std::filesystem::remove_all(dir);
}
