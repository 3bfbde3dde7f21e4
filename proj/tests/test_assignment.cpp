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
#include <numeric>
#include <random>

#include "corrstruct/assignment.hpp"
#include "corrstruct/error.hpp"

using namespace corrstruct;

namespace {

ScoreMatrix from_rows(const std::vector<std::vector<double>>& v) {
  ScoreMatrix m(v.size(), v.front().size());
  for (std::size_t r = 0; r < v.size(); ++r) {
    for (std::size_t c = 0; c < v[r].size(); ++c) {
      if (v[r][c] != ScoreMatrix::kInfeasible) m.set(r, c, v[r][c]);
    }
  }
  return m;
}

// Best total over every injection, enumerated by permuting the columns.
double enumerate_best(const ScoreMatrix& m) {
  std::vector<std::size_t> cols(m.cols());
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  double best = ScoreMatrix::kInfeasible;
  do {
    double total = 0.0;
    bool ok = true;
    for (std::size_t r = 0; r < m.rows() && ok; ++r) {
      ok = m.feasible(r, cols[r]);
      if (ok) total += m(r, cols[r]);
    }
    if (ok) best = std::max(best, total);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

constexpr double X = ScoreMatrix::kInfeasible;

}  // namespace

TEST_CASE("1x1 feasible matrix") {
  const auto a = solve_assignment(from_rows({{-2.5}}));
  CHECK(a.pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}});
  CHECK(a.total == -2.5);
}

TEST_CASE("2x2 picks the diagonal") {
  const auto m = from_rows({{3, 1}, {1, 3}});
  const auto a = solve_assignment(m);
  CHECK(a.pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}});
  CHECK(a.total == 6.0);
  CHECK(a.total == enumerate_best(m));
}

TEST_CASE("2x3 with infeasible entries") {
  const auto m = from_rows({{5, X, 1}, {4, 2, X}});
  const auto a = solve_assignment(m);
  CHECK(a.pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}});
  CHECK(a.total == 7.0);
  CHECK(enumerate_best(m) == 7.0);
}

TEST_CASE("error conditions") {
  CHECK_THROWS_AS(solve_assignment(from_rows({{1}, {2}})), Error);
  try {
    solve_assignment(from_rows({{1, 2}, {X, X}}));
    FAIL("infeasible row accepted");
  } catch (const InfeasibleRowError& e) {
    CHECK(e.row() == 1);
  }
  try {
    solve_assignment(from_rows({{1, X}, {2, X}}));
    FAIL("unsolvable matrix accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnsolvable);
  }
  ScoreMatrix big(9, 9);
  CHECK_THROWS_AS(brute_force_assignment(big), Error);
  ScoreMatrix m(1, 1);
  CHECK_THROWS_AS(m.set(0, 0, std::numeric_limits<double>::quiet_NaN()), Error);
}

TEST_CASE("single row picks the argmax column") {
  const auto m = from_rows({{-4, -1, X, -3}});
  CHECK(solve_assignment(m).pairs.front().second == 1);
  CHECK(brute_force_assignment(m).pairs.front().second == 1);
}

TEST_CASE("all-equal entries give the lexicographically smallest matching") {
  const auto m = from_rows({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
  const std::vector<std::pair<std::size_t, std::size_t>> diag{{0, 0}, {1, 1}, {2, 2}};
  CHECK(brute_force_assignment(m).pairs == diag);
  CHECK(solve_assignment(m).pairs == diag);
}

TEST_CASE("solver matches brute force on random matrices") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> score(-10.0, 0.0);
  std::uniform_int_distribution<int> small(-3, 0);
  std::bernoulli_distribution drop(0.2);
  int checked = 0;
  for (int t = 0; t < 3000 && checked < 1000; ++t) {
    const std::size_t rows = 1 + t % 6;
    const std::size_t cols = rows + (t / 6) % 3;
    const bool integer = t % 2 == 0;  // integer scores create ties
    ScoreMatrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        if (!drop(rng)) m.set(r, c, integer ? small(rng) : score(rng));
      }
      if (!m.row_has_feasible(r)) m.set(r, 0, -1.0);
    }
    Assignment expected;
    try {
      expected = brute_force_assignment(m);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kUnsolvable);
      CHECK_THROWS_AS(solve_assignment(m), Error);
      continue;
    }
    const Assignment got = solve_assignment(m);
    CHECK(got.total == expected.total);
    CHECK(got.total == enumerate_best(m));
    if (integer) CHECK(got.pairs == expected.pairs);
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("adding a constant to a row keeps the optimal matching") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> score(-10.0, 0.0);
  for (int t = 0; t < 100; ++t) {
    ScoreMatrix m(5, 5), shifted(5, 5);
    const double offset = score(rng);
    for (std::size_t r = 0; r < 5; ++r) {
      for (std::size_t c = 0; c < 5; ++c) {
        const double v = score(rng);
        m.set(r, c, v);
        shifted.set(r, c, r == 2 ? v + offset : v);
      }
    }
    CHECK(solve_assignment(m).pairs == solve_assignment(shifted).pairs);
  }
}
