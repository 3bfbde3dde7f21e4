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

#include "corrstruct/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>

#include "corrstruct/csv.hpp"
#include "corrstruct/error.hpp"
#include "corrstruct/parallel.hpp"

namespace corrstruct {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fnv_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool needs_structure(std::span<const Method> methods) {
  return std::any_of(methods.begin(), methods.end(), [](Method m) {
    return m == Method::kProposed || m == Method::kNonGlobal || m == Method::kSimpleAverage ||
           m == Method::kMulti;
  });
}

}  // namespace

CMCCurve cmc_from_ranks(std::span<const std::size_t> ranks, std::size_t max_rank) {
  if (ranks.empty()) throw Error(ErrorCode::kEmptyRanks, "no ranks to summarize");
  std::vector<std::size_t> hits(max_rank + 1, 0);
  for (std::size_t r : ranks) {
    if (r == 0) throw Error(ErrorCode::kInvalidSpec, "ranks are 1-based");
    if (r <= max_rank) ++hits[r];
  }
  CMCCurve curve;
  curve.rates.resize(max_rank);
  std::size_t cum = 0;
  for (std::size_t r = 1; r <= max_rank; ++r) {
    cum += hits[r];
    curve.rates[r - 1] = static_cast<double>(cum) / static_cast<double>(ranks.size());
  }
  return curve;
}

double objective_value(const TrainingSet& set, const CorrespondenceStructure& s, double t_c) {
  return mean_rank(set.ranks(MaskedStructure(s, t_c)));
}

std::string method_name(Method m) {
  switch (m) {
    case Method::kProposed: return "proposed";
    case Method::kNonStructure: return "non-structure";
    case Method::kSimpleAverage: return "simple-average";
    case Method::kAcGlobal: return "ac-global";
    case Method::kNonGlobal: return "non-global";
    case Method::kMulti: return "multi";
  }
  return "unknown";
}

std::optional<Method> parse_method(const std::string& name) {
  for (Method m : {Method::kProposed, Method::kNonStructure, Method::kSimpleAverage,
                   Method::kAcGlobal, Method::kNonGlobal, Method::kMulti}) {
    if (method_name(m) == name) return m;
  }
  return std::nullopt;
}

std::vector<Method> all_single_methods() {
  return {Method::kProposed, Method::kNonStructure, Method::kSimpleAverage, Method::kAcGlobal,
          Method::kNonGlobal};
}

Dataset build_dataset(const std::vector<ManifestRow>& rows, const std::vector<RgbImage>& images,
                      const PipelineConfig& cfg) {
  if (rows.size() != images.size()) throw Error(ErrorCode::kLengthMismatch, "one image per row required");
  validate_manifest_rows(rows);
  Dataset data;
  data.probe_grid = cfg.probe_grid;
  data.gallery_grid = cfg.gallery_grid;
  std::map<std::string, std::size_t> gallery_of;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].camera_id == "B") gallery_of[rows[k].person_id] = k;
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].camera_id == "A") pairs.emplace_back(k, gallery_of.at(rows[k].person_id));
  }
  const PatchGrid probe_grid(cfg.probe_grid);
  const PatchGrid gallery_grid(cfg.gallery_grid);
  data.probe_raw.resize(pairs.size());
  data.gallery_raw.resize(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    data.probe_raw[k] = extract_image_features(images[pairs[k].first], probe_grid, cfg.features);
    data.gallery_raw[k] = extract_image_features(images[pairs[k].second], gallery_grid, cfg.features);
  });
  for (const auto& [a, b] : pairs) {
    data.probe_rows.push_back(rows[a]);
    data.gallery_rows.push_back(rows[b]);
  }
  return data;
}

Dataset load_dataset(const Manifest& manifest, const PipelineConfig& cfg) {
  std::vector<RgbImage> images(manifest.rows.size());
  parallel_for(manifest.rows.size(), [&](std::size_t k) {
    images[k] = load_image(manifest.resolve(manifest.rows[k]));
  });
  return build_dataset(manifest.rows, images, cfg);
}

std::vector<ImagePatches> project_images(const Dataset& data, std::span<const std::size_t> ids,
                                         bool gallery, const std::optional<PcaModel>& pca) {
  std::vector<ImagePatches> out;
  out.reserve(ids.size());
  for (std::size_t k : ids) {
    const ManifestRow& row = gallery ? data.gallery_rows.at(k) : data.probe_rows.at(k);
    const FeatureMatrix& raw = gallery ? data.gallery_raw.at(k) : data.probe_raw.at(k);
    out.push_back({row.image_id, row.camera_id, row.person_id, row.pose_label,
                   gallery ? data.gallery_grid : data.probe_grid,
                   pca ? apply_pca(*pca, raw) : raw});
  }
  return out;
}

FittedPipeline fit_pipeline(const Dataset& data, std::span<const std::size_t> train,
                            const PipelineConfig& cfg, std::uint64_t seed, bool learn_structure) {
  cfg.validate();
  if (train.size() < 2) throw Error(ErrorCode::kDatasetTooSmall, "training needs at least 2 identities");
  FittedPipeline fit;
  if (cfg.features.pca_dim) {
    Eigen::Index rows = 0;
    for (std::size_t k : train) rows += data.probe_raw[k].rows() + data.gallery_raw[k].rows();
    FeatureMatrix samples(rows, static_cast<Eigen::Index>(cfg.features.raw_length()));
    Eigen::Index at = 0;
    for (std::size_t k : train) {
      samples.middleRows(at, data.probe_raw[k].rows()) = data.probe_raw[k];
      at += data.probe_raw[k].rows();
      samples.middleRows(at, data.gallery_raw[k].rows()) = data.gallery_raw[k];
      at += data.gallery_raw[k].rows();
    }
    fit.pca = fit_pca(samples, *cfg.features.pca_dim);
  }
  const auto probes = project_images(data, train, false, fit.pca);
  const auto galleries = project_images(data, train, true, fit.pca);
  std::vector<FeatureMatrix> pf, gf;
  for (std::size_t k = 0; k < probes.size(); ++k) {
    pf.push_back(probes[k].feats);
    gf.push_back(galleries[k].feats);
  }
  const PatchGrid probe_grid(cfg.probe_grid);
  const PatchGrid gallery_grid(cfg.gallery_grid);
  fit.bank = std::make_shared<const MetricBank>(fit_metric_bank(
      TrainingFeatures{pf, gf}, probe_grid, gallery_grid, cfg.learn.t_d, cfg.metric, mix_seed(seed, 11)));
  fit.layout = make_layout(cfg.probe_grid, cfg.gallery_grid, cfg.learn.t_d);
  fit.structure = init_structure(fit.layout);
  fit.structure.set_tag("global");
  if (!learn_structure) return fit;

  const Matcher matcher(*fit.bank);
  if (cfg.multi.mode != MultiMode::kOff) {
    auto model_a = cluster_pose_groups(probes, cfg.multi.mode, cfg.multi.k_max,
                                       cfg.multi.confidence_percentile, mix_seed(seed, 21));
    auto model_b = cluster_pose_groups(galleries, cfg.multi.mode, cfg.multi.k_max,
                                       cfg.multi.confidence_percentile, mix_seed(seed, 22));
    const auto pairs = form_group_pairs(model_a, model_b, probes, galleries, cfg.multi.min_pairs);
    auto result = learn_registry(matcher, probes, galleries, pairs, std::move(model_a),
                                 std::move(model_b), fit.layout, cfg.learn, seed);
    fit.structure = result.registry.global_structure;
    fit.trace = std::move(result.global_trace);
    fit.pool = std::move(result.global_pool);
    fit.registry = std::move(result.registry);
  } else {
    const TrainingSet set(matcher, probes, galleries, fit.layout);
    LearnConfig lc = cfg.learn;
    const auto n = static_cast<int>(set.size());
    lc.structures_per_iter = std::min(lc.structures_per_iter, n - n % 2);
    auto learned = learn(set, lc, seed);
    fit.structure = std::move(learned.structure);
    fit.structure.set_tag("global");
    fit.trace = std::move(learned.trace);
    fit.pool = std::move(learned.pool);
  }
  return fit;
}

std::map<Method, std::vector<std::size_t>> evaluate_methods(const Dataset& data,
                                                            std::span<const std::size_t> test,
                                                            const FittedPipeline& fitted,
                                                            std::span<const Method> methods,
                                                            double t_c,
                                                            double* match_ms_per_pair) {
  const Matcher matcher(*fitted.bank);
  const auto probes = project_images(data, test, false, fitted.pca);
  const auto galleries = project_images(data, test, true, fitted.pca);
  std::vector<PreparedImage> pp(probes.size()), pg(galleries.size());
  parallel_for(probes.size(), [&](std::size_t k) {
    pp[k] = matcher.prepare(probes[k]);
    pg[k] = matcher.prepare(galleries[k]);
  });
  std::vector<std::string> ids;
  for (const auto& g : galleries) ids.push_back(g.image_id);

  const MaskedStructure learned(fitted.structure, t_c);
  std::map<std::string, MaskedStructure> registry_masks;
  if (fitted.registry) {
    registry_masks.emplace(fitted.registry->global_structure.tag(),
                           MaskedStructure(fitted.registry->global_structure, t_c));
    for (const auto& [key, s] : fitted.registry->locals) registry_masks.emplace(s.tag(), MaskedStructure(s, t_c));
  }

  std::map<Method, std::vector<std::size_t>> out;
  for (Method method : methods) {
    if (method == Method::kMulti && !fitted.registry) {
      throw Error(ErrorCode::kInvalidSpec, "method multi needs multi.mode manual or auto");
    }
    MaskedStructure fixed;
    Solver solver = Solver::kGlobal;
    switch (method) {
      case Method::kProposed: fixed = learned; break;
      case Method::kNonGlobal:
        fixed = learned;
        solver = Solver::kGreedy;
        break;
      case Method::kNonStructure:
        fixed = MaskedStructure::colocated(fitted.layout, "non-structure");
        solver = Solver::kGreedy;
        break;
      case Method::kSimpleAverage:
        fixed = MaskedStructure(simple_average_structure(fitted.pool, fitted.layout), t_c);
        break;
      case Method::kAcGlobal: fixed = MaskedStructure::all_in_range(fitted.layout, "ac-global"); break;
      case Method::kMulti: break;
    }
    std::vector<std::vector<double>> scores(probes.size(), std::vector<double>(galleries.size()));
    const auto start = std::chrono::steady_clock::now();
    parallel_for(probes.size() * galleries.size(), [&](std::size_t q) {
      const std::size_t a = q / galleries.size();
      const std::size_t b = q % galleries.size();
      const MaskedStructure* s = &fixed;
      if (method == Method::kMulti) {
        s = &registry_masks.at(select_structure(probes[a], galleries[b], *fitted.registry).tag());
      }
      scores[a][b] = matcher.score(pp[a], pg[b], *s, solver);
    });
    if (method == Method::kProposed && match_ms_per_pair != nullptr) {
      *match_ms_per_pair = seconds_since(start) * 1000.0 /
                           static_cast<double>(probes.size() * galleries.size());
    }
    std::vector<std::size_t> ranks(probes.size());
    for (std::size_t a = 0; a < probes.size(); ++a) {
      ranks[a] = rank_of(scores[a], ids, correct_match_index(probes[a].person_id, galleries));
    }
    out.emplace(method, std::move(ranks));
  }
  return out;
}

void split_identities(std::size_t n, double fraction, std::uint64_t seed,
                      std::vector<std::size_t>& train, std::vector<std::size_t>& test) {
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = k;
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k + 1 < n; ++k) std::swap(order[k], order[k + uniform_index(rng, n - k)]);
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 2, n - 2);
  train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
}

ExperimentReport run_experiment(const Dataset& data, const PipelineConfig& cfg,
                                std::span<const Method> methods, std::uint64_t seed) {
  cfg.validate();
  if (data.size() < 4) throw Error(ErrorCode::kDatasetTooSmall, "experiments need at least 4 identities");
  if (methods.empty()) throw Error(ErrorCode::kInvalidSpec, "no methods requested");
  ExperimentReport report;
  report.methods.assign(methods.begin(), methods.end());
  std::string names;
  for (Method m : methods) names += method_name(m) + ";";
  report.fingerprint = fnv_hex(dump_config(cfg) + "seed=" + std::to_string(seed) + ";" + names);

  const auto n_splits = static_cast<std::size_t>(cfg.protocol.splits);
  report.splits.resize(n_splits);
  parallel_for(n_splits, [&](std::size_t k) {
    SplitReport& split = report.splits[k];
    split.seed = mix_seed(seed, 100 + k);
    split_identities(data.size(), cfg.protocol.fraction, split.seed, split.train, split.test);
    const auto start = std::chrono::steady_clock::now();
    const FittedPipeline fitted =
        fit_pipeline(data, split.train, cfg, split.seed, needs_structure(methods));
    split.train_seconds = seconds_since(start);
    const auto ranks = evaluate_methods(data, split.test, fitted, methods, cfg.learn.t_c,
                                        &split.match_ms_per_pair);
    for (const auto& [m, r] : ranks) split.cmc.emplace(m, cmc_from_ranks(r, split.test.size()));
  });

  for (Method m : methods) {
    std::size_t len = report.splits.front().cmc.at(m).rates.size();
    for (const auto& s : report.splits) len = std::min(len, s.cmc.at(m).rates.size());
    CMCCurve mean;
    mean.rates.assign(len, 0.0);
    for (const auto& s : report.splits) {
      for (std::size_t r = 0; r < len; ++r) mean.rates[r] += s.cmc.at(m).rates[r];
    }
    for (double& v : mean.rates) v /= static_cast<double>(report.splits.size());
    report.mean.emplace(m, std::move(mean));
  }
  return report;
}

void write_cmc_csv(const std::filesystem::path& path, const ExperimentReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << "method,rank,mean_rate";
  for (std::size_t k = 0; k < report.splits.size(); ++k) out << ",split_" << k;
  out << '\n';
  for (Method m : report.methods) {
    const auto& mean = report.mean.at(m);
    for (std::size_t r = 1; r <= mean.rates.size(); ++r) {
      out << method_name(m) << ',' << r << ',' << format_double(mean.rate(r));
      for (const auto& s : report.splits) out << ',' << format_double(s.cmc.at(m).rate(r));
      out << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed: " + path.string());
}

void write_timing_csv(const std::filesystem::path& path, const ExperimentReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << "split,seed,train_seconds,match_ms_per_pair\n";
  for (std::size_t k = 0; k < report.splits.size(); ++k) {
    const auto& s = report.splits[k];
    out << k << ',' << s.seed << ',' << format_double(s.train_seconds) << ','
        << format_double(s.match_ms_per_pair) << '\n';
  }
}

}  // namespace corrstruct
