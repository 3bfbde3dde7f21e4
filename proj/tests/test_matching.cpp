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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "corrstruct/error.hpp"
#include "corrstruct/matching.hpp"
#include "corrstruct/structure.hpp"
#include "support.hpp"

using namespace corrstruct;
using corrstruct::testing::patches;
using corrstruct::testing::rows;
using corrstruct::testing::unit_bank;

namespace {

// Two patches side by side.
const GridSpec kPair{4, 2, 2, 2, 2, 2};

}  // namespace

TEST_CASE("correlation entries follow log(Φ·P) above T_c") {
  const LayoutPtr layout = make_layout(kPair, kPair, 2);
  const MetricBank bank = unit_bank(1);
  const ImagePatches u = patches("A1", "p", kPair, rows({{0.0}, {0.0}}));
  const ImagePatches v = patches("B1", "p", kPair, rows({{0.0}, {1.0}}));

  CorrespondenceStructure s(layout);
  s.set(0, 0, 1.0);   // Φ = 1
  s.set(1, 1, 0.5);   // Φ = e^-1
  s.set(1, 0, 0.04);  // below T_c
  const ScoreMatrix c = correlation_matrix(u, v, s, bank, 0.05);
  CHECK(c(0, 0) == 0.0);
  CHECK(c(1, 1) == doctest::Approx(-1.0 + std::log(0.5)).epsilon(1e-14));
  CHECK(c(1, 1) == doctest::Approx(-1.6931).epsilon(1e-4));
  CHECK(!c.feasible(1, 0));
  CHECK(!c.feasible(0, 1));
}

TEST_CASE("self-match under a one-hot co-located structure scores 0") {
  const GridSpec g{6, 4, 2, 2, 2, 2};
  const LayoutPtr layout = make_layout(g, g, 3);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  FeatureMatrix f(6, 3);
  for (Eigen::Index r = 0; r < 6; ++r) {
    for (Eigen::Index c = 0; c < 3; ++c) f(r, c) = n(rng);
  }
  CorrespondenceStructure s(layout);
  for (PatchIndex i = 0; i < 6; ++i) s.set(i, layout->colocated(i), 1.0);
  const MatchReport r = match_score(patches("A1", "p", g, f), patches("B1", "p", g, f), s, unit_bank(3), 0.05);
  CHECK(r.score == 0.0);
  CHECK(r.unmatched_rows == 0);
  REQUIRE(r.assignment.pairs.size() == 6);
  for (const auto& [i, j] : r.assignment.pairs) CHECK(j == layout->colocated(i));
}

TEST_CASE("two-patch toy agrees with the brute-force assignment") {
  const LayoutPtr layout = make_layout(kPair, kPair, 2);
  const ImagePatches u = patches("A1", "p", kPair, rows({{0.0}, {1.0}}));
  const ImagePatches v = patches("B1", "p", kPair, rows({{0.9}, {0.2}}));
  CorrespondenceStructure s(layout);
  s.set(0, 0, 0.3);
  s.set(0, 1, 0.7);
  s.set(1, 0, 0.6);
  s.set(1, 1, 0.4);
  const MetricBank bank = unit_bank(1, 0.5);
  const ScoreMatrix c = correlation_matrix(u, v, s, bank, 0.05);
  const MatchReport r = match_score(u, v, s, bank, 0.05);
  CHECK(r.score == brute_force_assignment(c).total);
  CHECK(r.assignment.pairs == brute_force_assignment(c).pairs);
}

TEST_CASE("rows below T_c everywhere are all unmatched") {
  const LayoutPtr layout = make_layout(default_probe_spec(), default_gallery_spec(), 32);
  const auto s = init_structure(layout);
  const ImagePatches u = patches("A1", "p", default_probe_spec(), FeatureMatrix::Zero(84, 2));
  const ImagePatches v = patches("B1", "p", default_gallery_spec(), FeatureMatrix::Zero(297, 2));
  const MatchReport r = match_score(u, v, s, unit_bank(2), 0.05);
  CHECK(r.unmatched_rows == 84);
  CHECK(r.assignment.pairs.empty());
  CHECK(r.score == 84 * std::log(1e-300));
  CHECK(kUnmatchedPenalty == std::log(1e-300));
}

TEST_CASE("a row crowded out of the assignment keeps its best entry") {
  const LayoutPtr layout = make_layout(kPair, kPair, 2);
  const ImagePatches u = patches("A1", "p", kPair, rows({{0.0}, {0.5}}));
  const ImagePatches v = patches("B1", "p", kPair, rows({{0.0}, {9.0}}));
  CorrespondenceStructure s(layout);
  s.set(0, 0, 1.0);
  s.set(1, 0, 1.0);
  const MatchReport r = match_score(u, v, s, unit_bank(1), 0.05);
  // Row 0 matches exactly (score 0); row 1 scores -(0.5)^2 = -0.25 on the shared column.
  CHECK(r.unmatched_rows == 0);
  CHECK(r.shared_rows == 1);
  CHECK(r.assignment.pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}});
  CHECK(r.shared_total == doctest::Approx(-0.25));
  CHECK(r.score == doctest::Approx(-0.25));
}

TEST_CASE("greedy score takes per-row maxima") {
  const LayoutPtr layout = make_layout(kPair, kPair, 2);
  const ImagePatches u = patches("A1", "p", kPair, rows({{0.0}, {0.0}}));
  const ImagePatches v = patches("B1", "p", kPair, rows({{0.0}, {2.0}}));
  const MetricBank bank = unit_bank(1);
  const MaskedStructure all = MaskedStructure::all_in_range(layout, "all");
  const Matcher m(bank);
  const PreparedImage pu = m.prepare(u), pv = m.prepare(v);
  CHECK(m.greedy_score(pu, pv, all) == 0.0);  // both rows pick column 0
  CHECK(m.match(pu, pv, all).score == -4.0);   // one row must take column 1
  CHECK(m.score(pu, pv, all, Solver::kGreedy) == 0.0);
}

TEST_CASE("grid mismatches are rejected") {
  const LayoutPtr layout = make_layout(kPair, kPair, 2);
  const auto s = init_structure(layout);
  const ImagePatches u = patches("A1", "p", kPair, rows({{0.0}, {0.0}}));
  const ImagePatches wrong = patches("B1", "p", default_gallery_spec(), FeatureMatrix::Zero(297, 1));
  try {
    match_score(u, wrong, s, unit_bank(1), 0.05);
    FAIL("grid mismatch accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kGridMismatch);
  }
}

TEST_CASE("rank of the correct match") {
  const std::vector<std::string> one{"g0"};
  CHECK(rank_of(std::vector<double>{-5.0}, one, 0) == 1);

  const std::vector<std::string> five{"a", "b", "c", "d", "e"};
  CHECK(rank_of(std::vector<double>{1, 2, 9, 3, 4}, five, 2) == 1);

  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> level(0, 4);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> scores(10);
    std::vector<std::string> ids(10);
    for (std::size_t k = 0; k < 10; ++k) {
      scores[k] = level(rng);
      ids[k] = "id" + std::to_string((k * 7) % 10);
    }
    const std::size_t correct = static_cast<std::size_t>(t % 10);
    std::vector<std::size_t> order(10);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scores[a] != scores[b] ? scores[a] > scores[b] : ids[a] < ids[b];
    });
    const auto pos = std::find(order.begin(), order.end(), correct) - order.begin();
    CHECK(rank_of(scores, ids, correct) == static_cast<std::size_t>(pos + 1));
    const RankedGallery ranked = rank_scores(scores, ids, correct);
    CHECK(ranked.order == order);
  }
}

TEST_CASE("rank_gallery needs exactly one correct match") {
  const LayoutPtr layout = make_layout(kPair, kPair, 2);
  CorrespondenceStructure s(layout);
  s.set(0, 0, 1.0);
  s.set(1, 1, 1.0);
  const MetricBank bank = unit_bank(1);
  const ImagePatches probe = patches("A1", "p1", kPair, rows({{0.0}, {1.0}}));
  std::vector<ImagePatches> gallery{patches("B1", "p1", kPair, rows({{0.0}, {1.0}})),
                                    patches("B2", "p2", kPair, rows({{3.0}, {1.0}})),
                                    patches("B3", "p3", kPair, rows({{0.0}, {4.0}}))};
  const RankedGallery r = rank_gallery(probe, gallery, s, bank, 0.05);
  CHECK(r.rank == 1);
  CHECK(r.order.front() == 0);
  CHECK(r.scores[0] == 0.0);

  gallery[1].person_id = "p1";
  CHECK_THROWS_AS(rank_gallery(probe, gallery, s, bank, 0.05), Error);
  gallery[0].person_id = gallery[1].person_id = "x";
  CHECK_THROWS_AS(rank_gallery(probe, gallery, s, bank, 0.05), Error);
}
