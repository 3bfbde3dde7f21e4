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

#ifndef CORRSTRUCT_ASSIGNMENT_HPP
#define CORRSTRUCT_ASSIGNMENT_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace corrstruct {

/// Rectangular score matrix (rows ≤ cols) where entries may be excluded.
class ScoreMatrix {
 public:
  static constexpr double kInfeasible = -std::numeric_limits<double>::infinity();

  ScoreMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), values_(rows * cols, kInfeasible) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  bool feasible(std::size_t r, std::size_t c) const { return values_[r * cols_ + c] != kInfeasible; }

  /// Finite scores only; use set_infeasible to exclude an entry.
  void set(std::size_t r, std::size_t c, double score);
  void set_infeasible(std::size_t r, std::size_t c) { values_[r * cols_ + c] = kInfeasible; }

  bool row_has_feasible(std::size_t r) const;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> values_;
};

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (row, col), ascending rows
  double total = 0.0;  // entries summed in row order
};

/// Maximum-total one-to-one assignment covering every row. Among optimal
/// assignments the lexicographically smallest column sequence is returned.
///
/// Shortest-augmenting-path Hungarian method on the rectangular matrix (equivalent
/// to padding with zero-score dummy rows), followed by a walk over the
/// equality subgraph of the final duals that moves each row, in order, to its
/// smallest tight column that still admits a complete matching.
///
/// Throws InfeasibleRowError when a row has no feasible entry and
/// Error(kUnsolvable) when no assignment covers every row.
Assignment solve_assignment(const ScoreMatrix& m);

/// Exhaustive enumeration over injections in lexicographic order; rows ≤ 8.
Assignment brute_force_assignment(const ScoreMatrix& m);

}  // namespace corrstruct

#endif  // CORRSTRUCT_ASSIGNMENT_HPP
