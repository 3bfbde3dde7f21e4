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

#include "corrstruct/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>
#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "corrstruct/error.hpp"

namespace corrstruct {

namespace {

void normalize_block(Eigen::Ref<Eigen::VectorXd> block) {
  const double s = block.sum();
  if (s > 0.0) {
    block /= s;
  } else {
    block.setConstant(1.0 / static_cast<double>(block.size()));
  }
}

cv::Mat convert_color(const RgbImage& patch, ColorSpace space) {
  cv::Mat rgb(patch.height, patch.width, CV_8UC3, const_cast<std::uint8_t*>(patch.data.data()));
  cv::Mat out;
  cv::cvtColor(rgb, out, space == ColorSpace::kLab ? cv::COLOR_RGB2Lab : cv::COLOR_RGB2HSV_FULL);
  return out;
}

}  // namespace

void FeatureConfig::validate() const {
  if (bins_per_channel < 2) throw Error(ErrorCode::kInvalidSpec, "bins_per_channel must be >= 2");
  if (grad_orient_bins < 2) throw Error(ErrorCode::kInvalidSpec, "grad_orient_bins must be >= 2");
  if (grad_cells_x < 1 || grad_cells_y < 1) {
    throw Error(ErrorCode::kInvalidSpec, "gradient cell grid must be at least 1x1");
  }
  if (pca_dim && (*pca_dim < 1 || static_cast<std::size_t>(*pca_dim) > raw_length())) {
    throw Error(ErrorCode::kInvalidSpec,
                "pca_dim " + std::to_string(*pca_dim) + " outside [1, " +
                    std::to_string(raw_length()) + "]");
  }
}

FeatureVector extract_patch_features(const RgbImage& patch, const FeatureConfig& cfg) {
  const int w = patch.width;
  const int h = patch.height;
  const int nb = cfg.bins_per_channel;
  const int no = cfg.grad_orient_bins;
  FeatureVector f = FeatureVector::Zero(static_cast<Eigen::Index>(cfg.raw_length()));
  if (w == 0 || h == 0) throw Error(ErrorCode::kDecodeError, "empty patch");

  const cv::Mat color = convert_color(patch, cfg.color_space);
  for (int y = 0; y < h; ++y) {
    const auto* row = color.ptr<std::uint8_t>(y);
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const int bin = row[3 * x + c] * nb / 256;
        f[c * nb + bin] += 1.0;
      }
    }
  }
  for (int c = 0; c < 3; ++c) normalize_block(f.segment(c * nb, nb));

  std::vector<double> lum(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto* p = patch.pixel(x, y);
      lum[static_cast<std::size_t>(y) * w + x] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    }
  }
  const auto at = [&](int x, int y) { return lum[static_cast<std::size_t>(y) * w + x]; };
  const Eigen::Index grad_base = 3 * nb;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = at(std::min(x + 1, w - 1), y) - at(std::max(x - 1, 0), y);
      const double gy = at(x, std::min(y + 1, h - 1)) - at(x, std::max(y - 1, 0));
      const double mag = std::hypot(gx, gy);
      if (mag == 0.0) continue;
      double theta = std::atan2(gy, gx);
      if (theta < 0.0) theta += std::numbers::pi;
      if (theta >= std::numbers::pi) theta -= std::numbers::pi;
      const int bin = std::min(no - 1, static_cast<int>(theta / std::numbers::pi * no));
      const int cx = x * cfg.grad_cells_x / w;
      const int cy = y * cfg.grad_cells_y / h;
      f[grad_base + (cy * cfg.grad_cells_x + cx) * no + bin] += mag;
    }
  }
  for (int cell = 0; cell < cfg.grad_cells_x * cfg.grad_cells_y; ++cell) {
    normalize_block(f.segment(grad_base + cell * no, no));
  }
  return f;
}

FeatureMatrix extract_image_features(const RgbImage& image, const PatchGrid& grid,
                                     const FeatureConfig& cfg) {
  const GridSpec& spec = grid.spec();
  const RgbImage scaled = resize_image(image, spec.image_w, spec.image_h);
  FeatureMatrix out(static_cast<Eigen::Index>(grid.size()),
                    static_cast<Eigen::Index>(cfg.raw_length()));
  for (PatchIndex i = 0; i < grid.size(); ++i) {
    const PatchPosition& p = grid.positions()[i];
    out.row(static_cast<Eigen::Index>(i)) =
        extract_patch_features(scaled.crop(p.left, p.top, spec.patch_w, spec.patch_h), cfg)
            .transpose();
  }
  return out;
}

PcaModel fit_pca(const FeatureMatrix& samples, int dim) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index d = samples.cols();
  if (dim < 1 || dim > d) {
    throw Error(ErrorCode::kInvalidSpec, "pca dim " + std::to_string(dim) + " outside [1, " +
                                             std::to_string(d) + "]");
  }
  if (n <= dim) {
    throw Error(ErrorCode::kInsufficientSamples,
                "pca needs more than " + std::to_string(dim) + " samples, got " + std::to_string(n));
  }
  PcaModel model;
  model.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - model.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  // Eigenvalues come back ascending.
  const Eigen::VectorXd values = eig.eigenvalues().cwiseMax(0.0);
  model.basis.resize(dim, d);
  double kept = 0.0;
  for (int k = 0; k < dim; ++k) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    model.basis.row(k) = v.transpose();
    kept += values[d - 1 - k];
  }
  const double total = values.sum();
  model.explained_fraction = total > 0.0 ? std::clamp(kept / total, 0.0, 1.0) : 1.0;
  return model;
}

FeatureVector apply_pca(const PcaModel& model, const FeatureVector& f) {
  if (static_cast<std::size_t>(f.size()) != model.input_dim()) {
    throw Error(ErrorCode::kLengthMismatch, "feature length " + std::to_string(f.size()) +
                                                " != pca input " +
                                                std::to_string(model.input_dim()));
  }
  return model.basis * (f - model.mean);
}

FeatureMatrix apply_pca(const PcaModel& model, const FeatureMatrix& rows) {
  if (static_cast<std::size_t>(rows.cols()) != model.input_dim()) {
    throw Error(ErrorCode::kLengthMismatch, "feature length " + std::to_string(rows.cols()) +
                                                " != pca input " +
                                                std::to_string(model.input_dim()));
  }
  FeatureMatrix out = (rows.rowwise() - model.mean.transpose()) * model.basis.transpose();
  return out;
}

FeatureVector reconstruct_pca(const PcaModel& model, const FeatureVector& z) {
  if (static_cast<std::size_t>(z.size()) != model.output_dim()) {
    throw Error(ErrorCode::kLengthMismatch, "projected length mismatch");
  }
  return model.basis.transpose() * z + model.mean;
}

}  // namespace corrstruct
