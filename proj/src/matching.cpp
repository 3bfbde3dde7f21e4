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

#include "corrstruct/matching.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "corrstruct/error.hpp"
#include "corrstruct/parallel.hpp"

namespace corrstruct {

namespace {

const double kLogFloor = kUnmatchedPenalty;

}  // namespace

MaskedStructure::MaskedStructure(const CorrespondenceStructure& s, double t_c)
    : layout_(s.layout_ptr()), rows_(s.n_rows()), tag_(s.tag()) {
  if (!(t_c >= 0.0 && t_c < 1.0)) {
    throw Error(ErrorCode::kInvalidSpec, "T_c must lie in [0, 1)");
  }
  for (PatchIndex i = 0; i < s.n_rows(); ++i) {
    const auto& range = layout_->range(i);
    const auto values = s.row(i);
    for (std::size_t k = 0; k < range.size(); ++k) {
      if (values[k] > t_c) rows_[i].push_back({range[k], std::log(values[k])});
    }
  }
}

MaskedStructure::MaskedStructure(LayoutPtr layout, std::vector<std::vector<Entry>> rows,
                                 std::string tag)
    : layout_(std::move(layout)), rows_(std::move(rows)), tag_(std::move(tag)) {
  if (rows_.size() != layout_->n_rows()) {
    throw Error(ErrorCode::kShapeMismatch, "masked structure row count differs from layout");
  }
  for (auto& row : rows_) {
    std::sort(row.begin(), row.end(), [](const Entry& a, const Entry& b) { return a.col < b.col; });
    for (const Entry& e : row) {
      if (e.col >= layout_->n_cols()) {
        throw Error(ErrorCode::kIndexOutOfRange, "masked entry column out of range");
      }
    }
  }
}

MaskedStructure MaskedStructure::all_in_range(LayoutPtr layout, std::string tag) {
  std::vector<std::vector<Entry>> rows(layout->n_rows());
  for (PatchIndex i = 0; i < rows.size(); ++i) {
    for (PatchIndex j : layout->range(i)) rows[i].push_back({j, 0.0});
  }
  return MaskedStructure(std::move(layout), std::move(rows), std::move(tag));
}

MaskedStructure MaskedStructure::colocated(LayoutPtr layout, std::string tag) {
  std::vector<std::vector<Entry>> rows(layout->n_rows());
  for (PatchIndex i = 0; i < rows.size(); ++i) rows[i].push_back({layout->colocated(i), 0.0});
  return MaskedStructure(std::move(layout), std::move(rows), std::move(tag));
}

std::size_t MaskedStructure::count() const {
  std::size_t n = 0;
  for (const auto& row : rows_) n += row.size();
  return n;
}

PreparedImage Matcher::prepare(const ImagePatches& image) const {
  const PatchGrid grid(image.grid);
  if (static_cast<std::size_t>(image.feats.rows()) != grid.size()) {
    throw Error(ErrorCode::kGridMismatch, "image " + image.image_id + " has " +
                                              std::to_string(image.feats.rows()) +
                                              " feature rows for a " +
                                              std::to_string(grid.size()) + "-patch grid");
  }
  return engine_.prepare(image.feats);
}

void Matcher::check_shapes(const PreparedImage& u, const PreparedImage& v,
                           const MaskedStructure& s) const {
  if (static_cast<std::size_t>(u.feats.rows()) != s.layout().n_rows() ||
      static_cast<std::size_t>(v.feats.rows()) != s.layout().n_cols()) {
    throw Error(ErrorCode::kGridMismatch, "image grids do not match the structure grids");
  }
}

double Matcher::entry(const PreparedImage& u, PatchIndex i, const PreparedImage& v,
                      const MaskedStructure::Entry& e) const {
  return std::max(engine_.log_similarity(u, i, v, e.col) + e.log_p, kLogFloor);
}

ScoreMatrix Matcher::correlation(const PreparedImage& u, const PreparedImage& v,
                                 const MaskedStructure& s) const {
  check_shapes(u, v, s);
  ScoreMatrix m(s.layout().n_rows(), s.layout().n_cols());
  for (PatchIndex i = 0; i < s.n_rows(); ++i) {
    for (const auto& e : s.row(i)) m.set(i, e.col, entry(u, i, v, e));
  }
  return m;
}

MatchReport Matcher::match(const PreparedImage& u, const PreparedImage& v,
                           const MaskedStructure& s) const {
  check_shapes(u, v, s);
  const std::size_t n_cols = s.layout().n_cols();
  std::vector<PatchIndex> active;
  for (PatchIndex i = 0; i < s.n_rows(); ++i) {
    if (!s.row(i).empty()) active.push_back(i);
  }

  MatchReport report;
  report.used_structure_tag = s.tag();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> best;
  if (!active.empty()) {
    const auto fill = [&](ScoreMatrix& m) {
      for (std::size_t r = 0; r < active.size(); ++r) {
        for (const auto& e : s.row(active[r])) m.set(r, e.col, entry(u, active[r], v, e));
      }
    };
    bool solved = false;
    if (active.size() <= n_cols) {
      ScoreMatrix m(active.size(), n_cols);
      fill(m);
      try {
        pairs = solve_assignment(m).pairs;
        solved = true;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kUnsolvable) throw;
      }
    }
    if (!solved) {
      // One private drop column per row, after the real columns. A dropped row
      // keeps its best feasible entry without claiming the column.
      ScoreMatrix m(active.size(), n_cols + active.size());
      fill(m);
      best.assign(active.size(), kLogFloor);
      for (std::size_t r = 0; r < active.size(); ++r) {
        for (const auto& e : s.row(active[r])) best[r] = std::max(best[r], m(r, e.col));
        m.set(r, n_cols + r, best[r] + kUnmatchedPenalty);
      }
      pairs = solve_assignment(m).pairs;
    }
  }

  for (const auto& [r, c] : pairs) {
    if (c >= n_cols) {
      ++report.shared_rows;
      report.shared_total += best[r];
      continue;
    }
    report.assignment.pairs.emplace_back(active[r], c);
  }
  double total = 0.0;
  for (const auto& [i, j] : report.assignment.pairs) {
    const auto row = s.row(i);
    const auto it = std::lower_bound(
        row.begin(), row.end(), j,
        [](const MaskedStructure::Entry& e, std::size_t col) { return e.col < col; });
    total += entry(u, i, v, *it);
  }
  report.assignment.total = total;
  report.unmatched_rows = s.n_rows() - active.size();
  report.score = total + report.shared_total +
                 static_cast<double>(report.unmatched_rows) * kUnmatchedPenalty;
  return report;
}

double Matcher::greedy_score(const PreparedImage& u, const PreparedImage& v,
                             const MaskedStructure& s) const {
  check_shapes(u, v, s);
  double total = 0.0;
  for (PatchIndex i = 0; i < s.n_rows(); ++i) {
    const auto row = s.row(i);
    if (row.empty()) {
      total += kUnmatchedPenalty;
      continue;
    }
    double best = kLogFloor;
    for (const auto& e : row) best = std::max(best, entry(u, i, v, e));
    total += best;
  }
  return total;
}

double Matcher::score(const PreparedImage& u, const PreparedImage& v, const MaskedStructure& s,
                      Solver solver) const {
  return solver == Solver::kGlobal ? match(u, v, s).score : greedy_score(u, v, s);
}

ScoreMatrix correlation_matrix(const ImagePatches& u, const ImagePatches& v,
                               const CorrespondenceStructure& s, const MetricBank& bank,
                               double t_c) {
  if (!(u.grid == s.layout().probe().spec()) || !(v.grid == s.layout().gallery().spec())) {
    throw Error(ErrorCode::kGridMismatch, "image grids do not match the structure grids");
  }
  const Matcher matcher(bank);
  return matcher.correlation(matcher.prepare(u), matcher.prepare(v), MaskedStructure(s, t_c));
}

MatchReport match_score(const ImagePatches& u, const ImagePatches& v,
                        const CorrespondenceStructure& s, const MetricBank& bank, double t_c) {
  if (!(u.grid == s.layout().probe().spec()) || !(v.grid == s.layout().gallery().spec())) {
    throw Error(ErrorCode::kGridMismatch, "image grids do not match the structure grids");
  }
  const Matcher matcher(bank);
  return matcher.match(matcher.prepare(u), matcher.prepare(v), MaskedStructure(s, t_c));
}

std::size_t rank_of(std::span<const double> scores, std::span<const std::string> ids,
                    std::size_t correct) {
  const double target = scores[correct];
  std::size_t ahead = 0;
  for (std::size_t b = 0; b < scores.size(); ++b) {
    if (b == correct) continue;
    if (scores[b] > target || (scores[b] == target && ids[b] < ids[correct])) ++ahead;
  }
  return ahead + 1;
}

RankedGallery rank_scores(std::span<const double> scores, std::span<const std::string> ids,
                          std::size_t correct) {
  if (scores.size() != ids.size()) {
    throw Error(ErrorCode::kLengthMismatch, "scores and ids differ in length");
  }
  if (correct >= scores.size()) throw Error(ErrorCode::kIndexOutOfRange, "correct index out of range");
  RankedGallery out;
  out.scores.assign(scores.begin(), scores.end());
  out.order.resize(scores.size());
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::sort(out.order.begin(), out.order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  out.rank = static_cast<std::size_t>(
                 std::find(out.order.begin(), out.order.end(), correct) - out.order.begin()) +
             1;
  return out;
}

std::size_t correct_match_index(const std::string& person_id,
                                std::span<const ImagePatches> gallery) {
  std::size_t found = gallery.size();
  std::size_t count = 0;
  for (std::size_t b = 0; b < gallery.size(); ++b) {
    if (gallery[b].person_id == person_id) {
      found = b;
      ++count;
    }
  }
  if (count != 1) {
    throw Error(ErrorCode::kNoCorrectMatch, "person " + person_id + " has " +
                                                std::to_string(count) +
                                                " gallery images; exactly one is required");
  }
  return found;
}

RankedGallery rank_gallery(const Matcher& matcher, const ImagePatches& probe,
                           std::span<const ImagePatches> gallery, const StructurePicker& pick,
                           Solver solver) {
  if (gallery.empty()) throw Error(ErrorCode::kNoCorrectMatch, "gallery is empty");
  const std::size_t correct = correct_match_index(probe.person_id, gallery);
  const PreparedImage u = matcher.prepare(probe);
  std::vector<double> scores(gallery.size());
  std::vector<std::string> ids(gallery.size());
  parallel_for(gallery.size(), [&](std::size_t b) {
    scores[b] = matcher.score(u, matcher.prepare(gallery[b]), pick(b), solver);
  });
  for (std::size_t b = 0; b < gallery.size(); ++b) ids[b] = gallery[b].image_id;
  return rank_scores(scores, ids, correct);
}

RankedGallery rank_gallery(const ImagePatches& probe, std::span<const ImagePatches> gallery,
                           const CorrespondenceStructure& s, const MetricBank& bank, double t_c,
                           Solver solver) {
  const Matcher matcher(bank);
  const MaskedStructure masked(s, t_c);
  return rank_gallery(
      matcher, probe, gallery, [&](std::size_t) -> const MaskedStructure& { return masked; },
      solver);
}

}  // namespace corrstruct
