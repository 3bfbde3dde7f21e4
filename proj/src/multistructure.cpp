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

#include "corrstruct/multistructure.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "corrstruct/error.hpp"
#include "corrstruct/parallel.hpp"

namespace corrstruct {

namespace {

using Json = nlohmann::json;

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(pct, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double linear_score(const FeatureVector& centroid, const FeatureVector& x) {
  return centroid.dot(x) - 0.5 * centroid.squaredNorm();
}

// Lloyd iterations from k-means++ seeds; the best of several restarts by inertia.
std::vector<std::size_t> kmeans(const Eigen::MatrixXd& x, int k, std::uint64_t seed) {
  const Eigen::Index n = x.rows();
  std::vector<std::size_t> best_labels(static_cast<std::size_t>(n), 0);
  double best_inertia = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed);
  const auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  for (int restart = 0; restart < 10; ++restart) {
    Eigen::MatrixXd centers(k, x.cols());
    centers.row(0) = x.row(static_cast<Eigen::Index>(unit() * static_cast<double>(n)));
    Eigen::VectorXd d2(n);
    for (int c = 1; c < k; ++c) {
      for (Eigen::Index i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int p = 0; p < c; ++p) best = std::min(best, (x.row(i) - centers.row(p)).squaredNorm());
        d2(i) = best;
      }
      const double total = d2.sum();
      Eigen::Index pick = 0;
      if (total > 0.0) {
        double target = unit() * total;
        for (pick = 0; pick < n - 1; ++pick) {
          target -= d2(pick);
          if (target < 0.0) break;
        }
      }
      centers.row(c) = x.row(pick);
    }
    std::vector<std::size_t> labels(static_cast<std::size_t>(n), 0);
    double inertia = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      bool moved = false;
      inertia = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        std::size_t arg = 0;
        double best = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
          const double d = (x.row(i) - centers.row(c)).squaredNorm();
          if (d < best) {
            best = d;
            arg = static_cast<std::size_t>(c);
          }
        }
        inertia += best;
        moved = moved || labels[static_cast<std::size_t>(i)] != arg;
        labels[static_cast<std::size_t>(i)] = arg;
      }
      if (!moved && iter > 0) break;
      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
      std::vector<int> counts(static_cast<std::size_t>(k), 0);
      for (Eigen::Index i = 0; i < n; ++i) {
        sums.row(static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)])) += x.row(i);
        ++counts[labels[static_cast<std::size_t>(i)]];
      }
      for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
      }
    }
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best_labels = labels;
    }
  }
  // Canonical numbering: clusters ordered by their first member.
  std::vector<std::size_t> remap(static_cast<std::size_t>(k), static_cast<std::size_t>(k));
  std::size_t next = 0;
  for (auto& l : best_labels) {
    if (remap[l] == static_cast<std::size_t>(k)) remap[l] = next++;
    l = remap[l];
  }
  return best_labels;
}

std::vector<std::string> spectral_labels(const std::vector<FeatureVector>& desc, int k_max,
                                         std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(desc.size());
  Eigen::MatrixXd d2(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) d2(i, j) = (desc[i] - desc[j]).squaredNorm();
  }
  // Self-tuning bandwidth: distance to the 7th nearest neighbour.
  const Eigen::Index knn = std::min<Eigen::Index>(7, n - 1);
  Eigen::VectorXd sigma(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> row;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) row.push_back(std::sqrt(d2(i, j)));
    }
    std::sort(row.begin(), row.end());
    double s = row[static_cast<std::size_t>(knn - 1)];
    if (s <= 0.0) {
      const auto pos = std::find_if(row.begin(), row.end(), [](double v) { return v > 0.0; });
      s = pos == row.end() ? 1.0 : *pos;
    }
    sigma(i) = s;
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) a(i, j) = std::exp(-d2(i, j) / (sigma(i) * sigma(j)));
    }
  }
  Eigen::VectorXd inv_sqrt_deg(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double deg = a.row(i).sum();
    inv_sqrt_deg(i) = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  const Eigen::MatrixXd l = inv_sqrt_deg.asDiagonal() * a * inv_sqrt_deg.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(l);
  const Eigen::VectorXd lambda = eig.eigenvalues().reverse();
  const Eigen::MatrixXd vecs = eig.eigenvectors().rowwise().reverse();

  const int k_cap = static_cast<int>(std::min<Eigen::Index>(k_max, n - 1));
  int k = 1;
  double best_gap = -std::numeric_limits<double>::infinity();
  for (int c = 1; c <= k_cap; ++c) {
    const double gap = lambda(c - 1) - lambda(c);
    if (gap > best_gap + 1e-12) {
      best_gap = gap;
      k = c;
    }
  }
  std::vector<std::string> labels(desc.size(), "g0");
  if (k == 1) return labels;

  Eigen::MatrixXd emb = vecs.leftCols(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = emb.row(i).norm();
    if (norm > 0.0) emb.row(i) /= norm;
  }
  const auto assignment = kmeans(emb, k, seed);
  for (std::size_t i = 0; i < desc.size(); ++i) labels[i] = "g" + std::to_string(assignment[i]);
  return labels;
}

std::string pair_key(const std::string& a, const std::string& b) { return a + "|" + b; }

Json vector_json(const FeatureVector& v) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

FeatureVector vector_from_json(const Json& j) {
  FeatureVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v(static_cast<Eigen::Index>(k)) = j[k].get<double>();
  return v;
}

Json model_json(const PoseGroupModel& m) {
  Json groups = Json::array();
  for (const auto& g : m.groups) {
    groups.push_back({{"group_id", g.group_id},
                      {"threshold", g.threshold},
                      {"members", g.members},
                      {"centroid", vector_json(g.centroid)}});
  }
  return {{"camera_id", m.camera_id}, {"groups", groups}};
}

PoseGroupModel model_from_json(const Json& j) {
  PoseGroupModel m;
  m.camera_id = j.at("camera_id").get<std::string>();
  for (const auto& g : j.at("groups")) {
    m.groups.push_back({g.at("group_id").get<std::string>(), vector_from_json(g.at("centroid")),
                        g.at("members").get<std::vector<std::string>>(),
                        g.at("threshold").get<double>()});
  }
  return m;
}

}  // namespace

FeatureVector pose_descriptor(const ImagePatches& image) {
  const PatchGrid grid(image.grid);
  if (static_cast<std::size_t>(image.feats.rows()) != grid.size()) {
    throw Error(ErrorCode::kGridMismatch, "feature rows do not match the image grid");
  }
  const int quarter = (image.grid.image_h + 3) / 4;
  std::vector<PatchIndex> top;
  for (PatchIndex i = 0; i < grid.size(); ++i) {
    if (grid.position(i).top + image.grid.patch_h <= quarter) top.push_back(i);
  }
  if (top.empty()) {
    for (int c = 0; c < grid.cols(); ++c) top.push_back(grid.index_of(0, c));
  }
  const Eigen::Index dim = image.feats.cols();
  FeatureVector out(dim * static_cast<Eigen::Index>(top.size()));
  for (std::size_t k = 0; k < top.size(); ++k) {
    out.segment(static_cast<Eigen::Index>(k) * dim, dim) =
        image.feats.row(static_cast<Eigen::Index>(top[k])).transpose();
  }
  return out;
}

PoseClassification PoseGroupModel::classify(const FeatureVector& descriptor) const {
  PoseClassification out;
  if (groups.empty()) return out;
  if (groups.size() == 1) {
    out.margin = std::numeric_limits<double>::infinity();
    out.confident = true;
    return out;
  }
  double best = -std::numeric_limits<double>::infinity();
  double second = best;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double s = linear_score(groups[g].centroid, descriptor);
    if (s > best) {
      second = best;
      best = s;
      out.group = g;
    } else if (s > second) {
      second = s;
    }
  }
  out.margin = best - second;
  out.confident = out.margin > groups[out.group].threshold;
  return out;
}

std::size_t PoseGroupModel::group_of(const std::string& image_id) const {
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& m = groups[g].members;
    if (std::find(m.begin(), m.end(), image_id) != m.end()) return g;
  }
  return groups.size();
}

PoseGroupModel build_pose_model(std::span<const ImagePatches> images,
                                std::span<const std::string> labels,
                                double confidence_percentile) {
  if (images.size() != labels.size()) throw Error(ErrorCode::kLengthMismatch, "one label per image required");
  if (images.size() < 2) throw Error(ErrorCode::kTooFewImages, "pose grouping needs at least 2 images");
  PoseGroupModel model;
  model.camera_id = images.front().camera_id;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t k = 0; k < images.size(); ++k) members[labels[k]].push_back(k);

  std::vector<FeatureVector> desc;
  for (const auto& img : images) desc.push_back(pose_descriptor(img));
  for (const auto& [label, idx] : members) {
    PoseGroup g;
    g.group_id = label;
    g.centroid = FeatureVector::Zero(desc.front().size());
    for (std::size_t k : idx) {
      g.centroid += desc[k];
      g.members.push_back(images[k].image_id);
    }
    g.centroid /= static_cast<double>(idx.size());
    model.groups.push_back(std::move(g));
  }
  if (model.groups.size() > 1) {
    // Held-out margins: each member is scored against its group centroid without it.
    std::vector<std::vector<double>> margins(model.groups.size());
    std::size_t g = 0;
    for (const auto& [label, idx] : members) {
      const auto n = static_cast<double>(idx.size());
      for (std::size_t k : idx) {
        const FeatureVector own =
            idx.size() > 1 ? FeatureVector((model.groups[g].centroid * n - desc[k]) / (n - 1.0))
                           : model.groups[g].centroid;
        double other = -std::numeric_limits<double>::infinity();
        for (std::size_t h = 0; h < model.groups.size(); ++h) {
          if (h != g) other = std::max(other, linear_score(model.groups[h].centroid, desc[k]));
        }
        margins[g].push_back(linear_score(own, desc[k]) - other);
      }
      ++g;
    }
    for (g = 0; g < model.groups.size(); ++g) {
      model.groups[g].threshold = std::max(0.0, percentile(margins[g], confidence_percentile));
    }
  }
  return model;
}

PoseGroupModel cluster_pose_groups(std::span<const ImagePatches> images, MultiMode mode,
                                   int k_max, double confidence_percentile, std::uint64_t seed) {
  if (images.size() < 2) throw Error(ErrorCode::kTooFewImages, "pose grouping needs at least 2 images");
  std::vector<std::string> labels;
  if (mode == MultiMode::kAuto) {
    if (k_max < 1) throw Error(ErrorCode::kInvalidSpec, "k_max must be >= 1");
    std::vector<FeatureVector> desc;
    for (const auto& img : images) desc.push_back(pose_descriptor(img));
    labels = spectral_labels(desc, k_max, seed);
  } else {
    for (const auto& img : images) labels.push_back(img.pose_label.empty() ? "unlabeled" : img.pose_label);
  }
  return build_pose_model(images, labels, confidence_percentile);
}

std::vector<GroupPair> form_group_pairs(const PoseGroupModel& model_a,
                                        const PoseGroupModel& model_b,
                                        std::span<const ImagePatches> probes,
                                        std::span<const ImagePatches> galleries, int min_pairs) {
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> found;
  for (const auto& p : probes) {
    const std::size_t b = correct_match_index(p.person_id, galleries);
    const std::size_t ga = model_a.group_of(p.image_id);
    const std::size_t gb = model_b.group_of(galleries[b].image_id);
    if (ga >= model_a.groups.size() || gb >= model_b.groups.size()) continue;
    found[{model_a.groups[ga].group_id, model_b.groups[gb].group_id}].push_back(p.person_id);
  }
  std::vector<GroupPair> out;
  for (auto& [key, persons] : found) {
    if (persons.size() >= static_cast<std::size_t>(std::max(min_pairs, 1))) {
      out.push_back({key.first, key.second, std::move(persons)});
    }
  }
  return out;
}

void backfill_empty_rows(CorrespondenceStructure& local, const CorrespondenceStructure& global,
                         double t_c) {
  for (PatchIndex i = 0; i < local.n_rows(); ++i) {
    const auto row = local.row(i);
    if (std::any_of(row.begin(), row.end(), [&](double v) { return v > t_c; })) continue;
    const auto src = global.row(i);
    std::copy(src.begin(), src.end(), row.begin());
  }
}

RegistryResult learn_registry(const Matcher& matcher, std::span<const ImagePatches> probes,
                              std::span<const ImagePatches> galleries,
                              const std::vector<GroupPair>& pairs, PoseGroupModel model_a,
                              PoseGroupModel model_b, const LayoutPtr& layout,
                              const LearnConfig& cfg, std::uint64_t seed) {
  RegistryResult out;
  {
    const TrainingSet train(matcher, probes, galleries, layout);
    LearnConfig global_cfg = cfg;
    const auto n = static_cast<int>(train.size());
    global_cfg.structures_per_iter = std::min(cfg.structures_per_iter, n - n % 2);
    auto learned = learn(train, global_cfg, seed);
    out.registry.global_structure = std::move(learned.structure);
    out.registry.global_structure.set_tag("global");
    out.global_trace = std::move(learned.trace);
    out.global_pool = std::move(learned.pool);
  }

  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& pair = pairs[k];
    std::vector<ImagePatches> sub_probes, sub_galleries;
    for (const auto& p : probes) {
      if (std::find(pair.persons.begin(), pair.persons.end(), p.person_id) != pair.persons.end()) {
        sub_probes.push_back(p);
        sub_galleries.push_back(galleries[correct_match_index(p.person_id, galleries)]);
      }
    }
    const auto n = static_cast<int>(sub_probes.size());
    LearnConfig local_cfg = cfg;
    local_cfg.structures_per_iter = std::min(cfg.structures_per_iter, n - n % 2);
    if (local_cfg.structures_per_iter < 2) {
      out.skipped.push_back(pair_key(pair.group_a, pair.group_b));
      continue;
    }
    const TrainingSet train(matcher, sub_probes, sub_galleries, layout);
    auto learned = learn(train, local_cfg, seed);
    backfill_empty_rows(learned.structure, out.registry.global_structure, cfg.t_c);
    learned.structure.set_tag(pair_key(pair.group_a, pair.group_b));
    out.registry.locals.emplace(std::make_pair(pair.group_a, pair.group_b),
                                std::move(learned.structure));
  }
  out.registry.model_a = std::move(model_a);
  out.registry.model_b = std::move(model_b);
  return out;
}

const CorrespondenceStructure& select_structure(const ImagePatches& probe,
                                                const ImagePatches& gallery,
                                                const StructureRegistry& registry) {
  if (registry.locals.empty() || registry.model_a.groups.empty() ||
      registry.model_b.groups.empty()) {
    return registry.global_structure;
  }
  const auto ca = registry.model_a.classify(pose_descriptor(probe));
  const auto cb = registry.model_b.classify(pose_descriptor(gallery));
  if (!ca.confident || !cb.confident) return registry.global_structure;
  const auto it = registry.locals.find(
      {registry.model_a.groups[ca.group].group_id, registry.model_b.groups[cb.group].group_id});
  return it == registry.locals.end() ? registry.global_structure : it->second;
}

void save_registry(const std::filesystem::path& dir, const StructureRegistry& registry) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());
  save_structure(dir / "global.cstr", registry.global_structure);
  Json locals = Json::array();
  std::size_t k = 0;
  for (const auto& [key, s] : registry.locals) {
    const std::string file = "local_" + std::to_string(k++) + ".cstr";
    save_structure(dir / file, s);
    locals.push_back({{"group_a", key.first}, {"group_b", key.second}, {"file", file}});
  }
  const Json doc = {{"version", 1},
                    {"global", "global.cstr"},
                    {"locals", locals},
                    {"model_a", model_json(registry.model_a)},
                    {"model_b", model_json(registry.model_b)}};
  std::ofstream out(dir / "registry.json", std::ios::binary);
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "cannot write registry.json in " + dir.string());
}

StructureRegistry load_registry(const std::filesystem::path& dir) {
  std::ifstream in(dir / "registry.json");
  if (!in) throw Error(ErrorCode::kMissingFile, "no registry.json in " + dir.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kCorruptFile, std::string("registry.json: ") + e.what());
  }
  try {
    if (doc.at("version").get<int>() != 1) {
      throw Error(ErrorCode::kVersionMismatch, "unsupported registry version");
    }
    StructureRegistry reg;
    reg.global_structure = load_structure(dir / doc.at("global").get<std::string>());
    for (const auto& l : doc.at("locals")) {
      auto s = load_structure(dir / l.at("file").get<std::string>());
      if (!s.layout().same_geometry(reg.global_structure.layout())) {
        throw Error(ErrorCode::kCorruptFile, "local structure geometry differs from the global one");
      }
      reg.locals.emplace(std::make_pair(l.at("group_a").get<std::string>(),
                                        l.at("group_b").get<std::string>()),
                         std::move(s));
    }
    reg.model_a = model_from_json(doc.at("model_a"));
    reg.model_b = model_from_json(doc.at("model_b"));
    return reg;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kCorruptFile, std::string("registry.json: ") + e.what());
  }
}

}  // namespace corrstruct
