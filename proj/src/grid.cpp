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

#include "corrstruct/grid.hpp"

#include <cstdlib>
#include <limits>
#include <string>

#include "corrstruct/error.hpp"

namespace corrstruct {

void GridSpec::validate() const {
  if (image_w < 1 || image_h < 1 || patch_w < 1 || patch_h < 1) {
    throw Error(ErrorCode::kInvalidSpec, "image and patch sizes must be positive");
  }
  if (patch_w > image_w || patch_h > image_h) {
    throw Error(ErrorCode::kInvalidSpec, "patch " + std::to_string(patch_w) + "x" +
                                             std::to_string(patch_h) + " exceeds image " +
                                             std::to_string(image_w) + "x" + std::to_string(image_h));
  }
  if (stride_x < 1 || stride_y < 1) {
    throw Error(ErrorCode::kInvalidSpec, "strides must be >= 1");
  }
}

GridSpec default_probe_spec() { return GridSpec{48, 128, 18, 24, 6, 8}; }

GridSpec default_gallery_spec() { return GridSpec{48, 128, 18, 24, 3, 4}; }

PatchGrid::PatchGrid(const GridSpec& spec) : spec_(spec) {
  spec_.validate();
  cols_ = (spec_.image_w - spec_.patch_w) / spec_.stride_x + 1;
  rows_ = (spec_.image_h - spec_.patch_h) / spec_.stride_y + 1;
  positions_.reserve(static_cast<std::size_t>(rows_) * cols_);
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      positions_.push_back({r * spec_.stride_y, c * spec_.stride_x});
    }
  }
}

void PatchGrid::check(PatchIndex idx) const {
  if (idx >= positions_.size()) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "patch index " + std::to_string(idx) + " outside grid of " +
                    std::to_string(positions_.size()));
  }
}

const PatchPosition& PatchGrid::position(PatchIndex idx) const {
  check(idx);
  return positions_[idx];
}

int PatchGrid::row_of(PatchIndex idx) const {
  check(idx);
  return static_cast<int>(idx) / cols_;
}

int PatchGrid::col_of(PatchIndex idx) const {
  check(idx);
  return static_cast<int>(idx) % cols_;
}

PatchIndex PatchGrid::index_of(int row, int col) const {
  if (!contains(row, col)) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "cell (" + std::to_string(row) + "," + std::to_string(col) + ") outside grid");
  }
  return static_cast<PatchIndex>(row) * cols_ + col;
}

int patch_distance(const PatchGrid& grid, PatchIndex a, PatchIndex b) {
  return std::abs(grid.row_of(a) - grid.row_of(b)) + std::abs(grid.col_of(a) - grid.col_of(b));
}

PatchIndex colocated_patch(const PatchGrid& probe, const PatchGrid& gallery, PatchIndex i) {
  const PatchPosition& p = probe.position(i);
  PatchIndex best = 0;
  long best_d2 = std::numeric_limits<long>::max();
  for (PatchIndex j = 0; j < gallery.size(); ++j) {
    const PatchPosition& g = gallery.positions()[j];
    const long dy = g.top - p.top;
    const long dx = g.left - p.left;
    const long d2 = dy * dy + dx * dx;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = j;
    }
  }
  return best;
}

std::vector<PatchIndex> colocation_map(const PatchGrid& probe, const PatchGrid& gallery) {
  std::vector<PatchIndex> out(probe.size());
  for (PatchIndex i = 0; i < probe.size(); ++i) out[i] = colocated_patch(probe, gallery, i);
  return out;
}

std::vector<PatchIndex> search_set(const PatchGrid& gallery, PatchIndex center, int range) {
  std::vector<PatchIndex> out;
  if (range <= 0) {
    gallery.position(center);
    return out;
  }
  const int cr = gallery.row_of(center);
  const int cc = gallery.col_of(center);
  for (PatchIndex j = 0; j < gallery.size(); ++j) {
    const int d = std::abs(static_cast<int>(j) / gallery.cols() - cr) +
                  std::abs(static_cast<int>(j) % gallery.cols() - cc);
    if (d < range) out.push_back(j);
  }
  return out;
}

}  // namespace corrstruct
