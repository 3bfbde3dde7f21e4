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

#ifndef CORRSTRUCT_LEARNING_HPP
#define CORRSTRUCT_LEARNING_HPP

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "corrstruct/matching.hpp"
#include "corrstruct/metric.hpp"
#include "corrstruct/structure.hpp"

namespace corrstruct {

struct Link {
  PatchIndex probe = 0;
  PatchIndex gallery = 0;
  friend auto operator<=>(const Link&, const Link&) = default;
};

/// 0/1 link set for one training probe; at most one link per probe patch.
struct BinaryMappingStructure {
  std::vector<Link> links;  // ascending by probe patch
  std::string source_probe;
  int search_range = 0;
  friend bool operator==(const BinaryMappingStructure&, const BinaryMappingStructure&) = default;
};

/// The link set as a structure with P_ij = 1 on links.
MaskedStructure as_masked(const BinaryMappingStructure& m, LayoutPtr layout);

struct LearnConfig {
  double epsilon = 0.2;
  int n_cmc = 5;
  int structures_per_iter = 20;
  int range_min = 26;
  int range_max = 32;
  int max_iters = 300;
  bool use_eval_module = false;
  double t_c = 0.05;
  int t_d = 32;
  int stall_iters = 20;       // stop after this many unchanged iterations once the objective has moved
  int link_subsample = 32;    // probes used for single-link CMC weights
  bool joint_normalization = false;

  void validate() const;
  friend bool operator==(const LearnConfig&, const LearnConfig&) = default;
};

struct TraceEntry {
  int iteration = 0;
  double objective = 0.0;  // mean rank of correct matches on the training set
  bool accepted = true;
  std::uint64_t checksum = 0;
};

struct LearnTrace {
  std::vector<TraceEntry> entries;
};

/// Correct-match training pairs prepared for repeated scoring. Probe k's
/// correct match is gallery k.
class TrainingSet {
 public:
  /// `galleries` may come in any order; each probe's correct match is looked
  /// up by person_id.
  TrainingSet(const Matcher& matcher, std::span<const ImagePatches> probes,
              std::span<const ImagePatches> galleries, LayoutPtr layout);

  std::size_t size() const noexcept { return probes_.size(); }
  const Matcher& matcher() const noexcept { return *matcher_; }
  const LayoutPtr& layout() const noexcept { return layout_; }
  const PreparedImage& probe(std::size_t k) const { return probes_.at(k); }
  const PreparedImage& gallery(std::size_t k) const { return galleries_.at(k); }
  const std::string& probe_id(std::size_t k) const { return probe_ids_.at(k); }
  std::span<const std::string> gallery_ids() const noexcept { return gallery_ids_; }
  TrainingFeatures features() const { return {probe_feats_, gallery_feats_}; }

  /// Greedy-scored rank of probe k's correct match among all galleries.
  std::size_t rank(std::size_t k, const MaskedStructure& s) const;
  /// rank() for every probe in `subset` (all probes when empty).
  std::vector<std::size_t> ranks(const MaskedStructure& s,
                                 std::span<const std::size_t> subset = {}) const;

 private:
  const Matcher* matcher_;
  LayoutPtr layout_;
  std::vector<PreparedImage> probes_;
  std::vector<PreparedImage> galleries_;
  std::vector<FeatureMatrix> probe_feats_;
  std::vector<FeatureMatrix> gallery_feats_;
  std::vector<std::string> probe_ids_;
  std::vector<std::string> gallery_ids_;
};

/// Mean of 1-based ranks.
double mean_rank(std::span<const std::size_t> ranks);

/// One candidate per search range r in [range_min, range_max]: each probe
/// patch links to its most similar gallery patch closer than min(r, T_d)
/// strides to the co-located patch (lowest index on ties).
std::vector<BinaryMappingStructure> candidate_binary_structures(
    const Matcher& matcher, const PreparedImage& u, const PreparedImage& v_correct,
    const StructureLayout& layout, int range_min, int range_max, const std::string& source = {});

/// Candidate with the best rank for probe k; ties go to the smaller range.
BinaryMappingStructure optimal_binary_structure(
    const TrainingSet& train, std::size_t k, std::span<const BinaryMappingStructure> candidates);

/// Fraction of `probes` (all when empty) whose correct match ranks ≤ n.
double cmc_weight(const TrainingSet& train, const MaskedStructure& s, int n,
                  std::span<const std::size_t> probes = {});
/// cmc_weight of the single link as the whole structure.
double link_weight(const TrainingSet& train, const Link& link, int n,
                   std::span<const std::size_t> probes = {});

struct Strata {
  std::vector<std::size_t> top;     // probe indices ranked in the better half
  std::vector<std::size_t> bottom;  // the rest
};

/// Median split by (rank, probe index); an odd count puts the extra probe on top.
Strata split_strata(std::span<const std::size_t> ranks);

/// `count`/2 probes drawn uniformly without replacement from each stratum.
/// Throws Error(kPoolTooSmall) when ranks.size() < count.
std::vector<std::size_t> select_binary_structures(std::span<const std::size_t> ranks, int count,
                                                  std::mt19937_64& rng);

/// Uniform integer in [0, n) with a platform-independent mapping.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

struct EstimateResult {
  CorrespondenceStructure p_hat;
  bool zero_weight_fallback = false;  // all structure weights were 0
};

/// Combines the selected link sets into the boosting estimate P̂. `structure_weights[k]` is R̃_n of gamma[k]; `link_weights` holds
/// R̃_n of every link used.
EstimateResult estimate_update(std::span<const BinaryMappingStructure* const> gamma,
                               std::span<const double> structure_weights,
                               const std::map<Link, double>& link_weights,
                               const SimilarityTable& sim, const LayoutPtr& layout,
                               bool joint_normalization = false);

/// (1−ε)·prev + ε·p_hat over in-range entries, not normalized.
CorrespondenceStructure blend(const CorrespondenceStructure& prev,
                              const CorrespondenceStructure& p_hat, double epsilon);
/// blend followed by row normalization.
CorrespondenceStructure update_structure(const CorrespondenceStructure& prev,
                                         const CorrespondenceStructure& p_hat, double epsilon);

/// Mean of the link sets (rows sum to the fraction of sets linking that row).
CorrespondenceStructure simple_average_structure(std::span<const BinaryMappingStructure> pool,
                                                 const LayoutPtr& layout);

struct LearnResult {
  CorrespondenceStructure structure;
  LearnTrace trace;
  std::vector<BinaryMappingStructure> pool;  // per training probe
};

/// Called with every structure the learner holds, starting from the initialization.
using IterationObserver = std::function<void(int iteration, const CorrespondenceStructure&)>;

/// Boosting-based structure learning over the training set.
LearnResult learn(const TrainingSet& train, const LearnConfig& cfg, std::uint64_t seed,
                  const IterationObserver& observer = {});

}  // namespace corrstruct

#endif  // CORRSTRUCT_LEARNING_HPP
