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

#ifndef CORRSTRUCT_SYNTH_HPP
#define CORRSTRUCT_SYNTH_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "corrstruct/grid.hpp"
#include "corrstruct/image.hpp"
#include "corrstruct/manifest.hpp"
#include "corrstruct/structure.hpp"

namespace corrstruct {

/// Pose-specific shift override, in gallery strides.
struct PoseShift {
  std::string label;
  double probability = 1.0;
  int dy = 0;
  int dx = 0;
  friend bool operator==(const PoseShift&, const PoseShift&) = default;
};

/// Cross-view transform from camera A to camera B. Shifts are in gallery
/// strides; positive dy moves content down in camera B.
struct TransformSpec {
  int dy = 0;
  int dx = 0;
  std::vector<PoseShift> pose_mix;  // empty: one pose "front" using (dy, dx)
  double gain_min = 1.0;
  double gain_max = 1.0;
  double noise_sigma = 0.0;  // per-channel Gaussian noise, intensity units in [0, 1]

  /// The effective pose list.
  std::vector<PoseShift> poses() const;
  /// Throws ShiftOutOfBounds when a shift reaches T_d, InvalidSpec otherwise.
  void validate(int t_d) const;
  friend bool operator==(const TransformSpec&, const TransformSpec&) = default;
};

struct SynthDataset {
  std::vector<ManifestRow> rows;  // A then B image per identity
  std::vector<RgbImage> images;   // aligned with rows
  TransformSpec ground_truth;
};

/// Renders n_identities two-camera identities. Each texture is a stack of
/// horizontal bands of random Lab colours, each band split into colour blocks,
/// plus a dark vertical strap whose side encodes the pose. Camera B shows the
/// same texture translated by the pose's shift, with gain and noise.
SynthDataset generate_dataset(std::uint64_t seed, int n_identities, const TransformSpec& spec,
                              const GridSpec& gallery, int t_d = 32);

/// Writes PNGs under dir/A and dir/B plus dir/manifest.csv.
void write_dataset(const std::filesystem::path& dir, const SynthDataset& data);

/// Gallery cell hit by shifting probe patch i's co-located cell, or -1 when it
/// leaves the grid.
std::ptrdiff_t shifted_target(const StructureLayout& layout, PatchIndex i, int dy, int dx);

/// Rows are pose-weighted one-hot masses at the shifted co-located cell; a
/// target outside the grid is clamped to the nearest cell.
CorrespondenceStructure ground_truth_structure(const TransformSpec& spec, LayoutPtr layout);

/// Probe patches whose shifted targets stay inside the grid for every pose.
std::vector<PatchIndex> interior_rows(const TransformSpec& spec, const StructureLayout& layout);

}  // namespace corrstruct

#endif  // CORRSTRUCT_SYNTH_HPP
