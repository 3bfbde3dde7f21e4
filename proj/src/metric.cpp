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

#include "corrstruct/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "binary_io.hpp"
#include "corrstruct/error.hpp"
#include "corrstruct/parallel.hpp"

namespace corrstruct {

namespace {

constexpr double kMinSigma = 1e-12;
constexpr std::uint16_t kBankVersion = 1;

Eigen::MatrixXd second_moment(const FeatureMatrix& diffs) {
  return diffs.transpose() * diffs / static_cast<double>(diffs.rows());
}

Eigen::MatrixXd regularized_inverse(const Eigen::MatrixXd& cov, double ridge) {
  const Eigen::Index d = cov.rows();
  Eigen::MatrixXd reg = cov;
  reg.diagonal().array() += ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(reg);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kSingularCovariance, "covariance not positive definite (ridge " +
                                                    std::to_string(ridge) + ")");
  }
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(d, d));
  if (!inv.allFinite()) throw Error(ErrorCode::kSingularCovariance, "covariance inverse not finite");
  return inv;
}

// Gallery patches in range of each probe patch.
std::vector<std::vector<PatchIndex>> ranges_of(const PatchGrid& probe, const PatchGrid& gallery,
                                               int t_d) {
  const auto coloc = colocation_map(probe, gallery);
  std::vector<std::vector<PatchIndex>> out(probe.size());
  for (PatchIndex i = 0; i < probe.size(); ++i) out[i] = search_set(gallery, coloc[i], t_d);
  return out;
}

void write_model(detail::BinaryWriter& w, const KissmeModel& model) {
  w.put<std::uint8_t>(model.location ? 1 : 0);
  if (model.location) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(model.location->probe));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(model.location->gallery));
  }
  w.put<double>(model.calib_sigma);
  for (Eigen::Index r = 0; r < model.m.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.m.cols(); ++c) w.put<double>(model.m(r, c));
  }
}

KissmeModel read_model(detail::BinaryReader& r, Eigen::Index dim) {
  KissmeModel model;
  if (r.get<std::uint8_t>() != 0) {
    LocationKey key;
    key.probe = r.get<std::uint32_t>();
    key.gallery = r.get<std::uint32_t>();
    model.location = key;
  }
  model.calib_sigma = r.get<double>();
  if (!(model.calib_sigma > 0.0)) throw Error(ErrorCode::kCorruptFile, r.name() + ": bad sigma");
  model.m.resize(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) model.m(i, j) = r.get<double>();
  }
  return model;
}

}  // namespace

double KissmeModel::distance(const Eigen::Ref<const Eigen::VectorXd>& a,
                             const Eigen::Ref<const Eigen::VectorXd>& b) const {
  if (a.size() != m.rows() || b.size() != m.rows()) {
    throw Error(ErrorCode::kLengthMismatch, "feature length " + std::to_string(a.size()) + "/" +
                                                std::to_string(b.size()) + " != metric dim " +
                                                std::to_string(m.rows()));
  }
  const Eigen::VectorXd diff = a - b;
  return diff.dot(m * diff);
}

double default_ridge(const Eigen::MatrixXd& covariance) {
  return 1e-3 * covariance.trace() / static_cast<double>(covariance.rows());
}

KissmeModel fit_kissme(const FeatureMatrix& similar_diffs, const FeatureMatrix& dissimilar_diffs,
                       std::optional<double> ridge) {
  const Eigen::Index dim = similar_diffs.cols();
  if (dissimilar_diffs.cols() != dim) {
    throw Error(ErrorCode::kLengthMismatch, "similar/dissimilar difference lengths differ");
  }
  if (similar_diffs.rows() < dim + 1 || dissimilar_diffs.rows() < dim + 1) {
    throw Error(ErrorCode::kInsufficientPairs,
                "kissme needs at least " + std::to_string(dim + 1) + " pairs per set, got " +
                    std::to_string(similar_diffs.rows()) + "/" +
                    std::to_string(dissimilar_diffs.rows()));
  }
  if (ridge && !(*ridge >= 0.0)) throw Error(ErrorCode::kInvalidSpec, "ridge must be >= 0");

  const Eigen::MatrixXd cov_sim = second_moment(similar_diffs);
  const Eigen::MatrixXd cov_dis = second_moment(dissimilar_diffs);
  const double ridge_sim = ridge ? *ridge : default_ridge(cov_sim);
  const double ridge_dis = ridge ? *ridge : default_ridge(cov_dis);

  KissmeModel model;
  model.m = regularized_inverse(cov_sim, ridge_sim) - regularized_inverse(cov_dis, ridge_dis);
  model.m = 0.5 * (model.m + model.m.transpose()).eval();

  double total = 0.0;
  for (Eigen::Index r = 0; r < similar_diffs.rows(); ++r) {
    const auto d = similar_diffs.row(r);
    total += d.dot(d * model.m);
  }
  model.calib_sigma = std::max(total / static_cast<double>(similar_diffs.rows()), kMinSigma);
  return model;
}

double log_similarity(const KissmeModel& model, const Eigen::Ref<const Eigen::VectorXd>& a,
                      const Eigen::Ref<const Eigen::VectorXd>& b) {
  return -std::max(model.distance(a, b), 0.0) / model.calib_sigma;
}

double similarity(const KissmeModel& model, const FeatureVector& a, const FeatureVector& b) {
  return std::max(std::exp(log_similarity(model, a, b)), std::numeric_limits<double>::min());
}

MetricBank::MetricBank(MetricMode mode, KissmeModel fallback,
                       std::map<LocationKey, KissmeModel> models)
    : mode_(mode), fallback_(std::move(fallback)), models_(std::move(models)) {
  fallback_.location.reset();
  for (auto& [key, model] : models_) model.location = key;
}

const KissmeModel& MetricBank::model_for(PatchIndex i, PatchIndex j) const {
  if (mode_ == MetricMode::kPerLocation) {
    const auto it = models_.find(LocationKey{i, j});
    if (it != models_.end()) return it->second;
  }
  return fallback_;
}

MetricBank fit_metric_bank(const TrainingFeatures& train, const PatchGrid& probe,
                           const PatchGrid& gallery, int t_d, const MetricConfig& cfg,
                           std::uint64_t seed) {
  const std::size_t ids = train.probes.size();
  if (ids == 0 || train.galleries.size() != ids) {
    throw Error(ErrorCode::kEmptyTrainingSet, "metric fitting needs matched probe/gallery features");
  }
  if (ids < 2) throw Error(ErrorCode::kInsufficientPairs, "need two identities for dissimilar pairs");
  if (cfg.dissimilar_factor < 1) throw Error(ErrorCode::kInvalidSpec, "dissimilar_factor must be >= 1");
  const Eigen::Index dim = train.probes[0].cols();
  for (std::size_t k = 0; k < ids; ++k) {
    if (static_cast<std::size_t>(train.probes[k].rows()) != probe.size() ||
        static_cast<std::size_t>(train.galleries[k].rows()) != gallery.size() ||
        train.probes[k].cols() != dim || train.galleries[k].cols() != dim) {
      throw Error(ErrorCode::kGridMismatch, "training features do not match the grids");
    }
  }
  const auto ranges = ranges_of(probe, gallery, t_d);
  for (const auto& r : ranges) {
    if (r.empty()) throw Error(ErrorCode::kInvalidSpec, "empty search range (T_d too small)");
  }

  // Global model.
  const Eigen::Index n_sim = static_cast<Eigen::Index>(ids * probe.size());
  FeatureMatrix similar(n_sim, dim);
  Eigen::Index row = 0;
  for (std::size_t k = 0; k < ids; ++k) {
    const FeatureMatrix& f = train.probes[k];
    const FeatureMatrix& g = train.galleries[k];
    for (PatchIndex i = 0; i < probe.size(); ++i) {
      PatchIndex best = ranges[i].front();
      double best_d = std::numeric_limits<double>::infinity();
      for (PatchIndex j : ranges[i]) {
        const double d = (f.row(static_cast<Eigen::Index>(i)) - g.row(static_cast<Eigen::Index>(j)))
                             .squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      similar.row(row++) = f.row(static_cast<Eigen::Index>(i)) - g.row(static_cast<Eigen::Index>(best));
    }
  }
  const Eigen::Index n_dis = n_sim * cfg.dissimilar_factor;
  FeatureMatrix dissimilar(n_dis, dim);
  std::mt19937_64 rng(mix_seed(seed, 0x6b6973));
  std::uniform_int_distribution<std::size_t> pick_id(0, ids - 1);
  std::uniform_int_distribution<std::size_t> pick_other(0, ids - 2);
  std::uniform_int_distribution<PatchIndex> pick_patch(0, probe.size() - 1);
  for (Eigen::Index r = 0; r < n_dis; ++r) {
    const std::size_t p = pick_id(rng);
    std::size_t q = pick_other(rng);
    if (q >= p) ++q;
    const PatchIndex i = pick_patch(rng);
    const auto& range = ranges[i];
    const PatchIndex j = range[std::uniform_int_distribution<std::size_t>(0, range.size() - 1)(rng)];
    dissimilar.row(r) =
        train.probes[p].row(static_cast<Eigen::Index>(i)) - train.galleries[q].row(static_cast<Eigen::Index>(j));
  }
  KissmeModel global = fit_kissme(similar, dissimilar, cfg.ridge);
  if (cfg.mode == MetricMode::kShared) return MetricBank(MetricMode::kShared, std::move(global));

  // Per-location models.
  std::vector<LocationKey> keys;
  for (PatchIndex i = 0; i < probe.size(); ++i) {
    for (PatchIndex j : ranges[i]) keys.push_back({i, j});
  }
  std::vector<std::optional<KissmeModel>> fitted(keys.size());
  const std::size_t floor = static_cast<std::size_t>(dim) + 1;
  parallel_for(keys.size(), [&](std::size_t k) {
    const LocationKey key = keys[k];
    std::vector<PatchIndex> locations{key.gallery};
    if (ids < floor) {
      const int gr = gallery.row_of(key.gallery);
      const int gc = gallery.col_of(key.gallery);
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if ((dr == 0 && dc == 0) || !gallery.contains(gr + dr, gc + dc)) continue;
          const PatchIndex j = gallery.index_of(gr + dr, gc + dc);
          if (std::binary_search(ranges[key.probe].begin(), ranges[key.probe].end(), j)) {
            locations.push_back(j);
          }
        }
      }
    }
    const std::size_t count = ids * locations.size();
    if (count < floor) return;
    const auto pi = static_cast<Eigen::Index>(key.probe);
    FeatureMatrix sim(static_cast<Eigen::Index>(count), dim);
    Eigen::Index r = 0;
    for (PatchIndex j : locations) {
      for (std::size_t id = 0; id < ids; ++id) {
        sim.row(r++) = train.probes[id].row(pi) - train.galleries[id].row(static_cast<Eigen::Index>(j));
      }
    }
    std::mt19937_64 local(mix_seed(seed, key.probe * 1000003ULL + key.gallery));
    std::uniform_int_distribution<std::size_t> loc_pick(0, locations.size() - 1);
    std::uniform_int_distribution<std::size_t> id_pick(0, ids - 1);
    std::uniform_int_distribution<std::size_t> other_pick(0, ids - 2);
    FeatureMatrix dis(static_cast<Eigen::Index>(count) * cfg.dissimilar_factor, dim);
    for (Eigen::Index d = 0; d < dis.rows(); ++d) {
      const std::size_t p = id_pick(local);
      std::size_t q = other_pick(local);
      if (q >= p) ++q;
      const PatchIndex j = locations[loc_pick(local)];
      dis.row(d) = train.probes[p].row(pi) - train.galleries[q].row(static_cast<Eigen::Index>(j));
    }
    KissmeModel model = fit_kissme(sim, dis, cfg.ridge);
    model.location = key;
    fitted[k] = std::move(model);
  });
  std::map<LocationKey, KissmeModel> models;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    if (fitted[k]) models.emplace(keys[k], std::move(*fitted[k]));
  }
  return MetricBank(MetricMode::kPerLocation, std::move(global), std::move(models));
}

SimilarityTable build_similarity_table(const TrainingFeatures& train, const MetricBank& bank,
                                       const PatchGrid& probe, const PatchGrid& gallery, int t_d) {
  const std::size_t ids = train.probes.size();
  if (ids == 0) throw Error(ErrorCode::kEmptyTrainingSet, "similarity table needs training pairs");
  const auto ranges = ranges_of(probe, gallery, t_d);
  const SimilarityEngine engine(bank);
  std::vector<PreparedImage> probes(ids);
  std::vector<PreparedImage> galleries(ids);
  for (std::size_t k = 0; k < ids; ++k) {
    probes[k] = engine.prepare(train.probes[k]);
    galleries[k] = engine.prepare(train.galleries[k]);
  }
  SimilarityTable table;
  table.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(probe.size()),
                                       static_cast<Eigen::Index>(gallery.size()));
  parallel_for(probe.size(), [&](std::size_t i) {
    for (PatchIndex j : ranges[i]) {
      double sum = 0.0;
      for (std::size_t k = 0; k < ids; ++k) {
        sum += std::exp(engine.log_similarity(probes[k], i, galleries[k], j));
      }
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::clamp(sum / static_cast<double>(ids), 1e-300, 1.0);
    }
  });
  return table;
}

SimilarityEngine::SimilarityEngine(const MetricBank& bank) : bank_(&bank) {
  if (bank.mode() == MetricMode::kShared) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(bank.fallback().m);
    eigvecs_ = eig.eigenvectors();
    eigvals_ = eig.eigenvalues();
    inv_sigma_ = 1.0 / bank.fallback().calib_sigma;
  }
}

PreparedImage SimilarityEngine::prepare(const FeatureMatrix& feats) const {
  if (feats.cols() != bank_->fallback().dim()) {
    throw Error(ErrorCode::kLengthMismatch, "feature length " + std::to_string(feats.cols()) +
                                                " != metric dim " +
                                                std::to_string(bank_->fallback().dim()));
  }
  PreparedImage out;
  out.feats = feats;
  if (bank_->mode() == MetricMode::kShared) out.projected = feats * eigvecs_;
  return out;
}

double SimilarityEngine::log_similarity(const PreparedImage& a, PatchIndex i,
                                        const PreparedImage& b, PatchIndex j) const {
  const auto ii = static_cast<Eigen::Index>(i);
  const auto jj = static_cast<Eigen::Index>(j);
  if (bank_->mode() == MetricMode::kShared) {
    const double* pa = a.projected.row(ii).data();
    const double* pb = b.projected.row(jj).data();
    const double* lam = eigvals_.data();
    const Eigen::Index n = eigvals_.size();
    double d = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double diff = pa[k] - pb[k];
      d += lam[k] * diff * diff;
    }
    return -std::max(d, 0.0) * inv_sigma_;
  }
  return corrstruct::log_similarity(bank_->model_for(i, j), a.feats.row(ii).transpose(),
                                    b.feats.row(jj).transpose());
}

void save_metric_bank(const std::filesystem::path& path, const MetricBank& bank,
                      const std::optional<PcaModel>& pca) {
  detail::BinaryWriter w;
  w.magic("MBNK");
  w.put<std::uint16_t>(kBankVersion);
  w.put<std::uint8_t>(bank.mode() == MetricMode::kShared ? 0 : 1);
  const Eigen::Index dim = bank.fallback().dim();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dim));
  write_model(w, bank.fallback());
  w.put<std::uint64_t>(bank.models().size());
  for (const auto& [key, model] : bank.models()) write_model(w, model);
  w.put<std::uint8_t>(pca ? 1 : 0);
  if (pca) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(pca->input_dim()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(pca->output_dim()));
    w.put<double>(pca->explained_fraction);
    for (Eigen::Index k = 0; k < pca->mean.size(); ++k) w.put<double>(pca->mean[k]);
    for (Eigen::Index r = 0; r < pca->basis.rows(); ++r) {
      for (Eigen::Index c = 0; c < pca->basis.cols(); ++c) w.put<double>(pca->basis(r, c));
    }
  }
  w.save(path);
}

MetricBank load_metric_bank(const std::filesystem::path& path, std::optional<PcaModel>* pca) {
  detail::BinaryReader r(path);
  r.expect_magic("MBNK");
  const auto version = r.get<std::uint16_t>();
  if (version != kBankVersion) {
    throw Error(ErrorCode::kVersionMismatch, path.string() + ": metric bank version " +
                                                 std::to_string(version) + " unsupported");
  }
  const auto mode_byte = r.get<std::uint8_t>();
  if (mode_byte > 1) throw Error(ErrorCode::kCorruptFile, path.string() + ": bad metric mode");
  const auto dim = static_cast<Eigen::Index>(r.get<std::uint32_t>());
  KissmeModel fallback = read_model(r, dim);
  const auto n = r.get<std::uint64_t>();
  std::map<LocationKey, KissmeModel> models;
  for (std::uint64_t k = 0; k < n; ++k) {
    KissmeModel m = read_model(r, dim);
    if (!m.location) throw Error(ErrorCode::kCorruptFile, path.string() + ": location model without key");
    models.emplace(*m.location, std::move(m));
  }
  std::optional<PcaModel> loaded;
  if (r.get<std::uint8_t>() != 0) {
    PcaModel p;
    const auto in = static_cast<Eigen::Index>(r.get<std::uint32_t>());
    const auto out = static_cast<Eigen::Index>(r.get<std::uint32_t>());
    p.explained_fraction = r.get<double>();
    p.mean.resize(in);
    for (Eigen::Index k = 0; k < in; ++k) p.mean[k] = r.get<double>();
    p.basis.resize(out, in);
    for (Eigen::Index a = 0; a < out; ++a) {
      for (Eigen::Index b = 0; b < in; ++b) p.basis(a, b) = r.get<double>();
    }
    loaded = std::move(p);
  }
  if (!r.at_end()) throw Error(ErrorCode::kCorruptFile, path.string() + ": trailing bytes");
  if (pca) *pca = std::move(loaded);
  return MetricBank(mode_byte == 0 ? MetricMode::kShared : MetricMode::kPerLocation,
                    std::move(fallback), std::move(models));
}

}  // namespace corrstruct
