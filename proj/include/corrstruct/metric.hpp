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

#ifndef CORRSTRUCT_METRIC_HPP
#define CORRSTRUCT_METRIC_HPP

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "corrstruct/features.hpp"
#include "corrstruct/grid.hpp"

namespace corrstruct {

struct LocationKey {
  PatchIndex probe = 0;
  PatchIndex gallery = 0;
  friend auto operator<=>(const LocationKey&, const LocationKey&) = default;
};

/// KISSME metric M = Σ_sim⁻¹ − Σ_dis⁻¹ with a distance calibration constant.
/// M is deliberately not projected onto the PSD cone; negative quadratic
/// forms are clamped where they are turned into similarities.
struct KissmeModel {
  Eigen::MatrixXd m;
  double calib_sigma = 1.0;
  std::optional<LocationKey> location;  // nullopt: the global model

  Eigen::Index dim() const { return m.rows(); }

  /// (a−b)ᵀ M (a−b); may be negative.
  double distance(const Eigen::Ref<const Eigen::VectorXd>& a,
                  const Eigen::Ref<const Eigen::VectorXd>& b) const;
};

/// Default ridge for a covariance: 1e-3 · trace(Σ) / dim.
double default_ridge(const Eigen::MatrixXd& covariance);

/// Rows of `similar_diffs` / `dissimilar_diffs` are pair differences f_a − f_b.
/// `ridge` nullopt selects default_ridge per covariance.
KissmeModel fit_kissme(const FeatureMatrix& similar_diffs, const FeatureMatrix& dissimilar_diffs,
                       std::optional<double> ridge = std::nullopt);

/// exp(−max(d_M, 0) / calib_sigma), always in (0, 1].
double similarity(const KissmeModel& model, const FeatureVector& a, const FeatureVector& b);

/// log of `similarity`, without the exp round trip.
double log_similarity(const KissmeModel& model, const Eigen::Ref<const Eigen::VectorXd>& a,
                      const Eigen::Ref<const Eigen::VectorXd>& b);

enum class MetricMode { kShared, kPerLocation };

class MetricBank {
 public:
  MetricBank() = default;
  MetricBank(MetricMode mode, KissmeModel fallback, std::map<LocationKey, KissmeModel> models = {});

  MetricMode mode() const noexcept { return mode_; }
  const KissmeModel& fallback() const noexcept { return fallback_; }
  const std::map<LocationKey, KissmeModel>& models() const noexcept { return models_; }

  /// Location model when present, otherwise the global fallback.
  const KissmeModel& model_for(PatchIndex i, PatchIndex j) const;

 private:
  MetricMode mode_ = MetricMode::kShared;
  KissmeModel fallback_;
  std::map<LocationKey, KissmeModel> models_;
};

struct MetricConfig {
  MetricMode mode = MetricMode::kShared;
  std::optional<double> ridge;  // nullopt: default_ridge
  int dissimilar_factor = 4;
  friend bool operator==(const MetricConfig&, const MetricConfig&) = default;
};

/// Features of the correct-match training pairs: probes[k] and galleries[k]
/// belong to the same identity.
struct TrainingFeatures {
  std::span<const FeatureMatrix> probes;
  std::span<const FeatureMatrix> galleries;
};

/// Fits the global model and, in per-location mode, one model per in-range
/// location pair.
///
/// Global similar pairs align every probe patch with its nearest (Euclidean)
/// in-range gallery patch of the same identity; dissimilar pairs draw a random
/// in-range gallery patch of another identity. Per-location models use the
/// feature pairs at (i, j), pooling the 8 neighbouring gallery locations when
/// there are fewer than dim+1 samples, and fall back to the global model when
/// pooling is still short.
MetricBank fit_metric_bank(const TrainingFeatures& train, const PatchGrid& probe,
                           const PatchGrid& gallery, int t_d, const MetricConfig& cfg,
                           std::uint64_t seed);

/// Average similarity Φ̄_ij over correct-match pairs, defined on in-range pairs
/// (zero elsewhere).
struct SimilarityTable {
  Eigen::MatrixXd values;  // probe patches × gallery patches
  double at(PatchIndex i, PatchIndex j) const {
    return values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
};

SimilarityTable build_similarity_table(const TrainingFeatures& train, const MetricBank& bank,
                                       const PatchGrid& probe, const PatchGrid& gallery, int t_d);

/// Image features arranged for repeated similarity queries under one bank.
struct PreparedImage {
  FeatureMatrix feats;      // as given
  FeatureMatrix projected;  // shared mode: feats in the eigenbasis of M
};

/// Fast log-similarity queries. In shared mode M = VΛVᵀ is diagonalized once,
/// so each query costs O(dim) instead of O(dim²).
class SimilarityEngine {
 public:
  explicit SimilarityEngine(const MetricBank& bank);
  explicit SimilarityEngine(MetricBank&&) = delete;

  PreparedImage prepare(const FeatureMatrix& feats) const;

  double log_similarity(const PreparedImage& a, PatchIndex i, const PreparedImage& b,
                        PatchIndex j) const;

  const MetricBank& bank() const noexcept { return *bank_; }

 private:
  const MetricBank* bank_;
  Eigen::MatrixXd eigvecs_;
  Eigen::VectorXd eigvals_;
  double inv_sigma_ = 1.0;
};

/// Versioned binary container ("MBNK"); the optional PCA model travels with
/// the bank so a saved pair is self-sufficient for matching.
void save_metric_bank(const std::filesystem::path& path, const MetricBank& bank,
                      const std::optional<PcaModel>& pca);
MetricBank load_metric_bank(const std::filesystem::path& path, std::optional<PcaModel>* pca);

}  // namespace corrstruct

#endif  // CORRSTRUCT_METRIC_HPP
