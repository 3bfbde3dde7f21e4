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

#include "corrstruct/assignment.hpp"

#include <algorithm>
#include <deque>
#include <string>

#include "corrstruct/error.hpp"

namespace corrstruct {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_shape(const ScoreMatrix& m) {
  if (m.cols() < m.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "score matrix has more rows (" +
                                               std::to_string(m.rows()) + ") than columns (" +
                                               std::to_string(m.cols()) + ")");
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (!m.row_has_feasible(r)) throw InfeasibleRowError(r);
  }
}

double row_order_total(const ScoreMatrix& m, const std::vector<std::size_t>& match) {
  double total = 0.0;
  for (std::size_t r = 0; r < match.size(); ++r) total += m(r, match[r]);
  return total;
}

// Moves rows onto their smallest tight columns while a complete matching in
// the equality subgraph of (u, v) survives. Rows before the current one stay
// fixed. Free columns are held by implicit dummy rows (dual 0), which are
// tight exactly on columns whose v is 0.
class LexRefiner {
 public:
  LexRefiner(const ScoreMatrix& m, const std::vector<double>& u, const std::vector<double>& v,
             std::vector<std::size_t>& match)
      : m_(m), u_(u), v_(v), match_(match), owner_(m.cols(), kFree) {
    double scale = 1.0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) {
        if (m.feasible(r, c)) scale = std::max(scale, std::abs(m(r, c)));
      }
    }
    tol_ = 1e-9 * scale;
    for (std::size_t r = 0; r < match_.size(); ++r) owner_[match_[r]] = r;
  }

  void run() {
    for (std::size_t r = 0; r < match_.size(); ++r) {
      for (std::size_t c = 0; c < match_[r]; ++c) {
        if (!tight(r, c) || (owner_[c] != kFree && owner_[c] < r)) continue;
        if (try_move(r, c)) break;
      }
    }
  }

 private:
  static constexpr std::size_t kFree = std::numeric_limits<std::size_t>::max();

  bool tight(std::size_t r, std::size_t c) const {
    // Costs are negated scores; row r sits at u_[r + 1], column c at v_[c + 1].
    return m_.feasible(r, c) && (-m_(r, c) - u_[r + 1] - v_[c + 1]) <= tol_;
  }
  bool dummy_tight(std::size_t c) const { return std::abs(v_[c + 1]) <= tol_; }

  bool holder_tight(std::size_t holder, std::size_t c) const {
    return holder == kFree ? dummy_tight(c) : tight(holder, c);
  }

  bool try_move(std::size_t r, std::size_t target) {
    const std::size_t vacated = match_[r];
    const std::size_t n = m_.cols();
    std::vector<std::size_t> parent(n, kFree);
    std::vector<char> seen(n, 0);
    std::deque<std::size_t> queue{target};
    seen[target] = 1;
    while (!queue.empty()) {
      const std::size_t x = queue.front();
      queue.pop_front();
      const std::size_t holder = owner_[x];
      if (holder_tight(holder, vacated)) {
        apply(r, target, x, vacated, parent);
        return true;
      }
      for (std::size_t y = 0; y < n; ++y) {
        if (seen[y] || y == vacated) continue;
        const std::size_t next_holder = owner_[y];
        if (next_holder != kFree && next_holder <= r) continue;
        if (holder == kFree && next_holder == kFree) continue;
        if (!holder_tight(holder, y)) continue;
        seen[y] = 1;
        parent[y] = x;
        queue.push_back(y);
      }
    }
    return false;
  }

  void apply(std::size_t r, std::size_t target, std::size_t last, std::size_t vacated,
             const std::vector<std::size_t>& parent) {
    const std::vector<std::size_t> saved_match = match_;
    const std::vector<std::size_t> saved_owner = owner_;
    const double before = row_order_total(m_, match_);

    // Walk back from the end of the chain: the holder of each column moves
    // one step forward, and the final holder takes the vacated column.
    std::size_t dest = vacated;
    std::size_t x = last;
    for (;;) {
      const std::size_t holder = saved_owner[x];
      if (holder != kFree) match_[holder] = dest;
      owner_[dest] = holder;
      if (x == target) break;
      dest = x;
      x = parent[x];
    }
    match_[r] = target;
    owner_[target] = r;

    // Keep the rotation only when the floating-point total does not drop.
    if (row_order_total(m_, match_) < before) {
      match_ = saved_match;
      owner_ = saved_owner;
    }
  }

  const ScoreMatrix& m_;
  const std::vector<double>& u_;
  const std::vector<double>& v_;
  std::vector<std::size_t>& match_;
  std::vector<std::size_t> owner_;
  double tol_ = 0.0;
};

}  // namespace

void ScoreMatrix::set(std::size_t r, std::size_t c, double score) {
  if (!std::isfinite(score)) {
    throw Error(ErrorCode::kInvalidSpec, "score must be finite; use set_infeasible to exclude");
  }
  values_[r * cols_ + c] = score;
}

bool ScoreMatrix::row_has_feasible(std::size_t r) const {
  for (std::size_t c = 0; c < cols_; ++c) {
    if (feasible(r, c)) return true;
  }
  return false;
}

Assignment solve_assignment(const ScoreMatrix& m) {
  check_shape(m);
  const std::size_t n = m.rows();
  const std::size_t cols = m.cols();

  // Minimization over cost = -score, 1-based rows/columns, column 0 virtual.
  std::vector<double> u(n + 1, 0.0), v(cols + 1, 0.0), minv(cols + 1);
  std::vector<std::size_t> p(cols + 1, 0), way(cols + 1, 0);
  std::vector<char> used(cols + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      const double ui = u[i0];
      for (std::size_t j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double score = m(i0 - 1, j - 1);
        if (score != ScoreMatrix::kInfeasible) {
          const double cur = -score - ui - v[j];
          if (cur < minv[j]) {
            minv[j] = cur;
            way[j] = j0;
          }
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      if (j1 == 0) {
        throw Error(ErrorCode::kUnsolvable,
                    "no assignment covers every row (row " + std::to_string(i - 1) + ")");
      }
      for (std::size_t j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> match(n);
  for (std::size_t j = 1; j <= cols; ++j) {
    if (p[j] != 0) match[p[j] - 1] = j - 1;
  }
  LexRefiner(m, u, v, match).run();

  Assignment out;
  out.pairs.reserve(n);
  for (std::size_t r = 0; r < n; ++r) out.pairs.emplace_back(r, match[r]);
  out.total = row_order_total(m, match);
  return out;
}

Assignment brute_force_assignment(const ScoreMatrix& m) {
  if (m.rows() > 8) {
    throw Error(ErrorCode::kTooLarge, "brute force limited to 8 rows, got " + std::to_string(m.rows()));
  }
  check_shape(m);
  const std::size_t n = m.rows();
  std::vector<std::size_t> current(n), best;
  std::vector<char> taken(m.cols(), 0);
  double best_total = -kInf;

  const auto recurse = [&](auto&& self, std::size_t r, double partial) -> void {
    if (r == n) {
      if (best.empty() || partial > best_total) {
        best_total = partial;
        best = current;
      }
      return;
    }
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (taken[c] || !m.feasible(r, c)) continue;
      taken[c] = 1;
      current[r] = c;
      self(self, r + 1, partial + m(r, c));
      taken[c] = 0;
    }
  };
  recurse(recurse, 0, 0.0);
  if (best.empty() && n > 0) throw Error(ErrorCode::kUnsolvable, "no assignment covers every row");

  Assignment out;
  for (std::size_t r = 0; r < n; ++r) out.pairs.emplace_back(r, best[r]);
  out.total = n == 0 ? 0.0 : best_total;
  return out;
}

}  // namespace corrstruct
