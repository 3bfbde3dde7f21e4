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

#ifndef CORRSTRUCT_EVALUATION_HPP
#define CORRSTRUCT_EVALUATION_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corrstruct/config.hpp"
#include "corrstruct/features.hpp"
#include "corrstruct/image.hpp"
#include "corrstruct/learning.hpp"
#include "corrstruct/manifest.hpp"
#include "corrstruct/matching.hpp"
#include "corrstruct/metric.hpp"
#include "corrstruct/multistructure.hpp"

namespace corrstruct {

struct CMCCurve {
  std::vector<double> rates;  // rates[r - 1] = share of probes ranked ≤ r

  double rate(std::size_t rank) const { return rates.at(rank - 1); }
  friend bool operator==(const CMCCurve&, const CMCCurve&) = default;
};

/// Throws EmptyRanks for an empty list and InvalidSpec for a rank of 0.
CMCCurve cmc_from_ranks(std::span<const std::size_t> ranks, std::size_t max_rank);

/// Mean rank of the correct matches under greedy scoring.
double objective_value(const TrainingSet& set, const CorrespondenceStructure& s, double t_c);

enum class Method { kProposed, kNonStructure, kSimpleAverage, kAcGlobal, kNonGlobal, kMulti };

std::string method_name(Method m);
/// Accepts the names produced by method_name.
std::optional<Method> parse_method(const std::string& name);
std::vector<Method> all_single_methods();

/// Identities with raw patch features, probe k and gallery k sharing a person.
struct Dataset {
  GridSpec probe_grid;
  GridSpec gallery_grid;
  std::vector<ManifestRow> probe_rows;
  std::vector<ManifestRow> gallery_rows;
  std::vector<FeatureMatrix> probe_raw;
  std::vector<FeatureMatrix> gallery_raw;

  std::size_t size() const noexcept { return probe_rows.size(); }
};

/// Pairs rows by person and extracts raw features; images[k] belongs to rows[k].
Dataset build_dataset(const std::vector<ManifestRow>& rows, const std::vector<RgbImage>& images,
                      const PipelineConfig& cfg);
Dataset load_dataset(const Manifest& manifest, const PipelineConfig& cfg);

/// Everything fitted on a training partition.
struct FittedPipeline {
  std::optional<PcaModel> pca;
  std::shared_ptr<const MetricBank> bank;
  LayoutPtr layout;
  CorrespondenceStructure structure;
  LearnTrace trace;
  std::vector<BinaryMappingStructure> pool;
  std::optional<StructureRegistry> registry;
};

/// PCA-projected patches of the chosen identities for one camera.
std::vector<ImagePatches> project_images(const Dataset& data, std::span<const std::size_t> ids,
                                         bool gallery, const std::optional<PcaModel>& pca);

/// Fits PCA, the metric bank and the structure(s) on the `train` identities.
/// `learn_structure` false skips boosting (baselines without a structure).
FittedPipeline fit_pipeline(const Dataset& data, std::span<const std::size_t> train,
                            const PipelineConfig& cfg, std::uint64_t seed,
                            bool learn_structure = true);

struct SplitReport {
  std::uint64_t seed = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::map<Method, CMCCurve> cmc;
  double train_seconds = 0.0;
  double match_ms_per_pair = 0.0;
};

struct ExperimentReport {
  std::vector<Method> methods;
  std::vector<SplitReport> splits;
  std::map<Method, CMCCurve> mean;
  std::string fingerprint;
};

/// Ranks of the test probes for each method, with the chosen fitted pipeline.
std::map<Method, std::vector<std::size_t>> evaluate_methods(const Dataset& data,
                                                            std::span<const std::size_t> test,
                                                            const FittedPipeline& fitted,
                                                            std::span<const Method> methods,
                                                            double t_c,
                                                            double* match_ms_per_pair = nullptr);

/// Identity partition of one split; train and test are disjoint and sorted.
void split_identities(std::size_t n, double fraction, std::uint64_t seed,
                      std::vector<std::size_t>& train, std::vector<std::size_t>& test);

/// Repeated random identity splits; every fit sees only its training half.
/// Throws DatasetTooSmall below 4 identities.
ExperimentReport run_experiment(const Dataset& data, const PipelineConfig& cfg,
                                std::span<const Method> methods, std::uint64_t seed);

/// method,rank,mean_rate,split_0,... rows.
void write_cmc_csv(const std::filesystem::path& path, const ExperimentReport& report);
/// split,seed,train_seconds,match_ms_per_pair rows.
void write_timing_csv(const std::filesystem::path& path, const ExperimentReport& report);

}  // namespace corrstruct

#endif  // CORRSTRUCT_EVALUATION_HPP
