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

#ifndef CORRSTRUCT_MULTISTRUCTURE_HPP
#define CORRSTRUCT_MULTISTRUCTURE_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "corrstruct/features.hpp"
#include "corrstruct/learning.hpp"
#include "corrstruct/matching.hpp"
#include "corrstruct/structure.hpp"

namespace corrstruct {

enum class MultiMode { kOff, kManual, kAuto };

struct MultiConfig {
  MultiMode mode = MultiMode::kOff;
  int k_max = 4;
  int min_pairs = 10;
  double confidence_percentile = 10.0;
  friend bool operator==(const MultiConfig&, const MultiConfig&) = default;
};

/// Feature rows of the patches lying inside the top quarter of the image,
/// concatenated in patch order (the top patch row when none fits).
FeatureVector pose_descriptor(const ImagePatches& image);

struct PoseGroup {
  std::string group_id;
  FeatureVector centroid;
  std::vector<std::string> members;  // image ids
  double threshold = 0.0;            // minimum margin for a confident assignment
};

struct PoseClassification {
  std::size_t group = 0;
  double margin = 0.0;  // best minus second-best linear score
  bool confident = false;
};

/// Pose groups of one camera with a nearest-centroid linear classifier:
/// score_g(x) = c_gᵀx − ‖c_g‖²/2.
struct PoseGroupModel {
  std::string camera_id;
  std::vector<PoseGroup> groups;

  PoseClassification classify(const FeatureVector& descriptor) const;
  /// Index of the group listing `image_id` as a member, or groups.size().
  std::size_t group_of(const std::string& image_id) const;
};

/// Groups one camera's images. Manual mode uses pose labels; auto mode runs
/// spectral clustering on descriptor affinities and picks the cluster count by
/// the largest eigengap (at most k_max). Throws TooFewImages below 2 images.
PoseGroupModel cluster_pose_groups(std::span<const ImagePatches> images, MultiMode mode,
                                   int k_max, double confidence_percentile, std::uint64_t seed);

/// Builds the classifier of a fixed partition; labels[k] names images[k]'s group.
PoseGroupModel build_pose_model(std::span<const ImagePatches> images,
                                std::span<const std::string> labels,
                                double confidence_percentile);

struct GroupPair {
  std::string group_a;
  std::string group_b;
  std::vector<std::string> persons;
};

/// (probe group, gallery group) combinations shared by ≥ min_pairs identities.
std::vector<GroupPair> form_group_pairs(const PoseGroupModel& model_a,
                                        const PoseGroupModel& model_b,
                                        std::span<const ImagePatches> probes,
                                        std::span<const ImagePatches> galleries, int min_pairs);

struct StructureRegistry {
  std::map<std::pair<std::string, std::string>, CorrespondenceStructure> locals;
  CorrespondenceStructure global_structure;
  PoseGroupModel model_a;
  PoseGroupModel model_b;
};

struct RegistryResult {
  StructureRegistry registry;
  LearnTrace global_trace;
  std::vector<BinaryMappingStructure> global_pool;
  std::vector<std::string> skipped;  // group pairs too small to learn
};

/// Copies the global row into every local row without an entry above t_c.
void backfill_empty_rows(CorrespondenceStructure& local, const CorrespondenceStructure& global,
                         double t_c);

/// Learns the global structure on every pair and one local structure per
/// group pair. structures_per_iter is clamped to the largest even number not
/// above a group's size. Local rows left empty take the global row.
RegistryResult learn_registry(const Matcher& matcher, std::span<const ImagePatches> probes,
                              std::span<const ImagePatches> galleries,
                              const std::vector<GroupPair>& pairs, PoseGroupModel model_a,
                              PoseGroupModel model_b, const LayoutPtr& layout,
                              const LearnConfig& cfg, std::uint64_t seed);

/// Local structure of the classified pose-group pair when both images are
/// confidently classified and the pair was learned; the global one otherwise.
const CorrespondenceStructure& select_structure(const ImagePatches& probe,
                                                const ImagePatches& gallery,
                                                const StructureRegistry& registry);

/// Directory layout: registry.json, global.cstr and local_<k>.cstr files.
void save_registry(const std::filesystem::path& dir, const StructureRegistry& registry);
StructureRegistry load_registry(const std::filesystem::path& dir);

}  // namespace corrstruct

#endif  // CORRSTRUCT_MULTISTRUCTURE_HPP
