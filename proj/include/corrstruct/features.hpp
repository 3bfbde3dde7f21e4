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

#ifndef CORRSTRUCT_FEATURES_HPP
#define CORRSTRUCT_FEATURES_HPP

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "corrstruct/grid.hpp"
#include "corrstruct/image.hpp"

namespace corrstruct {

using FeatureVector = Eigen::VectorXd;

/// One feature vector per row, rows in patch order.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ColorSpace { kLab, kHsv };

struct FeatureConfig {
  ColorSpace color_space = ColorSpace::kLab;
  int bins_per_channel = 16;
  int grad_orient_bins = 8;
  int grad_cells_x = 2;
  int grad_cells_y = 2;
  std::optional<int> pca_dim = 34;

  void validate() const;

  /// Length before dimensionality reduction.
  std::size_t raw_length() const {
    return static_cast<std::size_t>(3 * bins_per_channel +
                                    grad_orient_bins * grad_cells_x * grad_cells_y);
  }

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

/// Color histograms (one per channel) followed by per-cell gradient
/// orientation histograms. Every block is L1-normalized; a cell without
/// gradient energy gets a uniform orientation block.
FeatureVector extract_patch_features(const RgbImage& patch, const FeatureConfig& cfg);

/// Raw features of every patch of `image` (rescaled to the grid's image size first).
FeatureMatrix extract_image_features(const RgbImage& image, const PatchGrid& grid,
                                     const FeatureConfig& cfg);

struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd basis;  // pca_dim × raw_len, orthonormal rows
  double explained_fraction = 0.0;

  std::size_t input_dim() const { return static_cast<std::size_t>(mean.size()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(basis.rows()); }
};

/// Principal directions of the sample rows. Each basis row is flipped so its
/// largest-magnitude coordinate is positive.
PcaModel fit_pca(const FeatureMatrix& samples, int dim);

FeatureVector apply_pca(const PcaModel& model, const FeatureVector& f);
FeatureMatrix apply_pca(const PcaModel& model, const FeatureMatrix& rows);

/// basisᵀ·z + mean.
FeatureVector reconstruct_pca(const PcaModel& model, const FeatureVector& z);

}  // namespace corrstruct

#endif  // CORRSTRUCT_FEATURES_HPP
