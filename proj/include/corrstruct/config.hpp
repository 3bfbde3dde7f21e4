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

#ifndef CORRSTRUCT_CONFIG_HPP
#define CORRSTRUCT_CONFIG_HPP

#include <filesystem>
#include <string>

#include "corrstruct/features.hpp"
#include "corrstruct/grid.hpp"
#include "corrstruct/learning.hpp"
#include "corrstruct/metric.hpp"
#include "corrstruct/multistructure.hpp"

namespace corrstruct {

struct ProtocolConfig {
  int splits = 10;
  double fraction = 0.5;  // share of identities used for training
  friend bool operator==(const ProtocolConfig&, const ProtocolConfig&) = default;
};

struct PipelineConfig {
  GridSpec probe_grid = default_probe_spec();
  GridSpec gallery_grid = default_gallery_spec();
  FeatureConfig features;
  MetricConfig metric;
  LearnConfig learn;
  MultiConfig multi;
  ProtocolConfig protocol;

  void validate() const;
  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

/// Parses `[section]` headers and `key = value` lines; '#' starts a comment.
/// Keys not present keep their defaults. Throws ParseError naming the line.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Every setting, in a form parse_config reads back to an equal config.
std::string dump_config(const PipelineConfig& cfg);

}  // namespace corrstruct

#endif  // CORRSTRUCT_CONFIG_HPP
