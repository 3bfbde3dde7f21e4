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

#ifndef CORRSTRUCT_STRUCTURE_HPP
#define CORRSTRUCT_STRUCTURE_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "corrstruct/grid.hpp"

namespace corrstruct {

/// Geometry shared by every structure over the same camera pair: grids,
/// co-location map and each probe patch's in-range gallery patches.
class StructureLayout {
 public:
  StructureLayout(const GridSpec& probe, const GridSpec& gallery, int t_d);

  const PatchGrid& probe() const noexcept { return probe_; }
  const PatchGrid& gallery() const noexcept { return gallery_; }
  int t_d() const noexcept { return t_d_; }
  std::size_t n_rows() const noexcept { return probe_.size(); }
  std::size_t n_cols() const noexcept { return gallery_.size(); }

  PatchIndex colocated(PatchIndex i) const { return coloc_.at(i); }
  /// In-range gallery patches of probe patch i, ascending.
  const std::vector<PatchIndex>& range(PatchIndex i) const { return ranges_.at(i); }
  /// Position of j inside range(i), or -1.
  std::ptrdiff_t slot(PatchIndex i, PatchIndex j) const;
  /// Gallery-grid distance between probe patch i's co-located patch and j.
  int distance(PatchIndex i, PatchIndex j) const;

  bool same_geometry(const StructureLayout& other) const noexcept {
    return probe_.spec() == other.probe_.spec() && gallery_.spec() == other.gallery_.spec() &&
           t_d_ == other.t_d_;
  }

 private:
  PatchGrid probe_;
  PatchGrid gallery_;
  int t_d_;
  std::vector<PatchIndex> coloc_;
  std::vector<std::vector<PatchIndex>> ranges_;
};

using LayoutPtr = std::shared_ptr<const StructureLayout>;

LayoutPtr make_layout(const GridSpec& probe, const GridSpec& gallery, int t_d);

/// Row-stochastic matrix of probe-patch → gallery-patch matching
/// probabilities. Only in-range entries are stored; everything else is 0.
class CorrespondenceStructure {
 public:
  CorrespondenceStructure() = default;
  /// All-zero structure over `layout`.
  explicit CorrespondenceStructure(LayoutPtr layout, std::string tag = {});

  const StructureLayout& layout() const { return *layout_; }
  const LayoutPtr& layout_ptr() const noexcept { return layout_; }
  std::size_t n_rows() const { return layout_->n_rows(); }
  std::size_t n_cols() const { return layout_->n_cols(); }
  int t_d() const { return layout_->t_d(); }

  const std::string& tag() const noexcept { return tag_; }
  void set_tag(std::string tag) { tag_ = std::move(tag); }

  double at(PatchIndex i, PatchIndex j) const;
  /// Throws Error(kIndexOutOfRange) when (i, j) lies outside the search range.
  void set(PatchIndex i, PatchIndex j, double value);

  /// Values aligned with layout().range(i).
  std::span<const double> row(PatchIndex i) const { return values_.at(i); }
  std::span<double> row(PatchIndex i) { return values_.at(i); }

  Eigen::MatrixXd dense() const;

  /// FNV-1a over the stored probabilities' bit patterns.
  std::uint64_t checksum() const;

  friend bool operator==(const CorrespondenceStructure& a, const CorrespondenceStructure& b) {
    return a.layout_->same_geometry(*b.layout_) && a.values_ == b.values_ && a.tag_ == b.tag_;
  }

 private:
  LayoutPtr layout_;
  std::vector<std::vector<double>> values_;
  std::string tag_;
};

/// P⁰_ij ∝ 1/(d+1) for d < T_d (d measured from the co-located patch),
/// normalized per row.
CorrespondenceStructure init_structure(const PatchGrid& probe, const PatchGrid& gallery, int t_d);
CorrespondenceStructure init_structure(LayoutPtr layout);

struct NormalizeResult {
  CorrespondenceStructure structure;
  std::vector<PatchIndex> zero_rows;
};

/// Scales every nonzero row to sum 1; all-zero rows are left alone and reported.
NormalizeResult normalize_rows(const CorrespondenceStructure& s);

/// λ_{T_c}: true exactly where P_ij > T_c.
class StructureMask {
 public:
  StructureMask(std::size_t n_rows, std::size_t n_cols) : n_cols_(n_cols), cols_(n_rows) {}

  bool at(PatchIndex i, PatchIndex j) const;
  const std::vector<PatchIndex>& row(PatchIndex i) const { return cols_.at(i); }
  std::size_t n_rows() const noexcept { return cols_.size(); }
  std::size_t n_cols() const noexcept { return n_cols_; }
  std::size_t count() const;

 private:
  friend StructureMask threshold_mask(const CorrespondenceStructure&, double);
  std::size_t n_cols_;
  std::vector<std::vector<PatchIndex>> cols_;
};

StructureMask threshold_mask(const CorrespondenceStructure& s, double t_c);

/// Row sums within `tol` of 1 for every row with a nonempty range, and no
/// negative or non-finite entry.
bool is_row_stochastic(const CorrespondenceStructure& s, double tol = 1e-9);

/// "CSTR" container: magic, u16 version, both grid specs, T_d, tag, then
/// (u32 row, u32 col, f64 value) for every nonzero entry.
void save_structure(const std::filesystem::path& path, const CorrespondenceStructure& s);
CorrespondenceStructure load_structure(const std::filesystem::path& path);

/// Dense heatmap CSV, probe patches as rows and gallery patches as columns,
/// both in row-first scan order. `downsample` > 1 averages k×k blocks.
void export_heatmap_csv(const std::filesystem::path& path, const CorrespondenceStructure& s,
                        int downsample = 1);

}  // namespace corrstruct

#endif  // CORRSTRUCT_STRUCTURE_HPP
