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

#ifndef CORRSTRUCT_GRID_HPP
#define CORRSTRUCT_GRID_HPP

#include <cstddef>
#include <vector>

namespace corrstruct {

/// Index of a patch inside a PatchGrid, in row-first scan order.
using PatchIndex = std::size_t;

/// Geometry of one camera's patch layout, in pixels.
struct GridSpec {
  int image_w = 48;
  int image_h = 128;
  int patch_w = 18;
  int patch_h = 24;
  int stride_x = 6;
  int stride_y = 8;

  /// Throws Error(kInvalidSpec) when the patch does not fit or a stride is < 1.
  void validate() const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Default probe (camera A) and gallery (camera B) geometries.
GridSpec default_probe_spec();
GridSpec default_gallery_spec();

struct PatchPosition {
  int top = 0;
  int left = 0;
  friend bool operator==(const PatchPosition&, const PatchPosition&) = default;
};

class PatchGrid {
 public:
  /// Builds the grid of all top-left positions where a patch fits.
  explicit PatchGrid(const GridSpec& spec);

  const GridSpec& spec() const noexcept { return spec_; }
  int cols() const noexcept { return cols_; }
  int rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return positions_.size(); }

  const PatchPosition& position(PatchIndex idx) const;
  const std::vector<PatchPosition>& positions() const noexcept { return positions_; }

  int row_of(PatchIndex idx) const;
  int col_of(PatchIndex idx) const;
  PatchIndex index_of(int row, int col) const;
  bool contains(int row, int col) const noexcept {
    return row >= 0 && row < rows_ && col >= 0 && col < cols_;
  }

 private:
  void check(PatchIndex idx) const;

  GridSpec spec_;
  int cols_ = 0;
  int rows_ = 0;
  std::vector<PatchPosition> positions_;
};

inline PatchGrid build_grid(const GridSpec& spec) { return PatchGrid(spec); }

/// L1 distance between two cells of the same grid, in strides.
int patch_distance(const PatchGrid& grid, PatchIndex a, PatchIndex b);

/// Gallery patch whose pixel position is nearest to probe patch `i`
/// (Euclidean; lowest ordinal on ties).
PatchIndex colocated_patch(const PatchGrid& probe, const PatchGrid& gallery, PatchIndex i);

/// colocated_patch for every probe patch.
std::vector<PatchIndex> colocation_map(const PatchGrid& probe, const PatchGrid& gallery);

/// Gallery patches strictly closer than `range` strides to `center`, ascending.
std::vector<PatchIndex> search_set(const PatchGrid& gallery, PatchIndex center, int range);

}  // namespace corrstruct

#endif  // CORRSTRUCT_GRID_HPP
