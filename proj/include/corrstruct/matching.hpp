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

#ifndef CORRSTRUCT_MATCHING_HPP
#define CORRSTRUCT_MATCHING_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "corrstruct/assignment.hpp"
#include "corrstruct/features.hpp"
#include "corrstruct/grid.hpp"
#include "corrstruct/metric.hpp"
#include "corrstruct/structure.hpp"

namespace corrstruct {

/// Lower clamp applied to Φ·P before taking the log.
inline constexpr double kProbabilityFloor = 1e-300;
/// Contribution of a probe patch that ends up unmatched.
inline const double kUnmatchedPenalty = std::log(kProbabilityFloor);

struct ImagePatches {
  std::string image_id;
  std::string camera_id;
  std::string person_id;
  std::string pose_label;
  GridSpec grid;
  FeatureMatrix feats;  // one row per patch of `grid`
};

/// The entries of a structure that pass the λ_{T_c} mask, with log P_ij.
class MaskedStructure {
 public:
  struct Entry {
    PatchIndex col = 0;
    double log_p = 0.0;
  };

  MaskedStructure() = default;
  MaskedStructure(const CorrespondenceStructure& s, double t_c);
  MaskedStructure(LayoutPtr layout, std::vector<std::vector<Entry>> rows, std::string tag);

  /// P_ij = 1 on every in-range pair.
  static MaskedStructure all_in_range(LayoutPtr layout, std::string tag);
  /// P_ij = 1 on each probe patch's co-located gallery patch.
  static MaskedStructure colocated(LayoutPtr layout, std::string tag);

  const StructureLayout& layout() const { return *layout_; }
  const LayoutPtr& layout_ptr() const noexcept { return layout_; }
  std::size_t n_rows() const noexcept { return rows_.size(); }
  std::span<const Entry> row(PatchIndex i) const { return rows_.at(i); }
  const std::string& tag() const noexcept { return tag_; }
  std::size_t count() const;

 private:
  LayoutPtr layout_;
  std::vector<std::vector<Entry>> rows_;
  std::string tag_;
};

enum class Solver { kGlobal, kGreedy };

struct MatchReport {
  double score = 0.0;  // assignment.total + shared_total + unmatched_rows · kUnmatchedPenalty
  Assignment assignment;
  std::size_t unmatched_rows = 0;  // rows with no feasible column
  std::size_t shared_rows = 0;     // rows left out of the one-to-one assignment
  double shared_total = 0.0;       // best feasible entries of the shared rows
  std::string used_structure_tag;
};

/// Scores image pairs under one metric bank. Images are prepared once and
/// reused across every pair they take part in.
class Matcher {
 public:
  explicit Matcher(const MetricBank& bank) : engine_(bank) {}
  explicit Matcher(MetricBank&&) = delete;

  PreparedImage prepare(const ImagePatches& image) const;

  ScoreMatrix correlation(const PreparedImage& u, const PreparedImage& v,
                          const MaskedStructure& s) const;
  /// Global one-to-one matching. Rows without a feasible entry are dropped;
  /// when the remaining rows admit no complete matching, each row may also
  /// drop out at kUnmatchedPenalty.
  MatchReport match(const PreparedImage& u, const PreparedImage& v,
                    const MaskedStructure& s) const;
  /// Σ_i max_j C(x_i, y_j), no one-to-one constraint.
  double greedy_score(const PreparedImage& u, const PreparedImage& v,
                      const MaskedStructure& s) const;
  double score(const PreparedImage& u, const PreparedImage& v, const MaskedStructure& s,
               Solver solver) const;

  const SimilarityEngine& engine() const noexcept { return engine_; }

 private:
  void check_shapes(const PreparedImage& u, const PreparedImage& v,
                    const MaskedStructure& s) const;
  double entry(const PreparedImage& u, PatchIndex i, const PreparedImage& v,
               const MaskedStructure::Entry& e) const;

  SimilarityEngine engine_;
};

/// C(x_i, y_j) = log(max(Φ_ij · P_ij, 1e-300)) where P_ij > T_c; INFEASIBLE elsewhere.
ScoreMatrix correlation_matrix(const ImagePatches& u, const ImagePatches& v,
                               const CorrespondenceStructure& s, const MetricBank& bank,
                               double t_c);

MatchReport match_score(const ImagePatches& u, const ImagePatches& v,
                        const CorrespondenceStructure& s, const MetricBank& bank, double t_c);

/// 1-based rank of `correct` when `scores` are sorted descending with ties
/// broken by ascending id.
std::size_t rank_of(std::span<const double> scores, std::span<const std::string> ids,
                    std::size_t correct);

struct RankedGallery {
  std::vector<std::size_t> order;  // gallery indices, best first
  std::vector<double> scores;      // indexed like the gallery
  std::size_t rank = 0;            // 1-based rank of the correct match
};

/// Orders gallery indices by descending score, ties by ascending image_id.
RankedGallery rank_scores(std::span<const double> scores, std::span<const std::string> ids,
                          std::size_t correct);

/// Picks the structure used for one (probe, gallery item) pair.
using StructurePicker = std::function<const MaskedStructure&(std::size_t gallery_index)>;

/// Scores the probe against every gallery image and ranks the correct match
/// (the unique gallery image sharing the probe's person_id).
/// Throws Error(kNoCorrectMatch) when there is not exactly one such image.
RankedGallery rank_gallery(const Matcher& matcher, const ImagePatches& probe,
                           std::span<const ImagePatches> gallery, const StructurePicker& pick,
                           Solver solver = Solver::kGlobal);

RankedGallery rank_gallery(const ImagePatches& probe, std::span<const ImagePatches> gallery,
                           const CorrespondenceStructure& s, const MetricBank& bank, double t_c,
                           Solver solver = Solver::kGlobal);

/// Index of the single gallery image sharing `person_id`.
std::size_t correct_match_index(const std::string& person_id,
                                std::span<const ImagePatches> gallery);

}  // namespace corrstruct

#endif  // CORRSTRUCT_MATCHING_HPP
