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


#ifndef CORRSTRUCT_TESTS_SUPPORT_HPP
#define CORRSTRUCT_TESTS_SUPPORT_HPP

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "corrstruct/config.hpp"
#include "corrstruct/error.hpp"
#include "corrstruct/evaluation.hpp"
#include "corrstruct/synth.hpp"

namespace corrstruct::testing {

inline TransformSpec shift_spec(int dy, int dx = 0) {
  TransformSpec spec;
  spec.dy = dy;
  spec.dx = dx;
  spec.gain_min = 0.9;
  spec.gain_max = 1.1;
  spec.noise_sigma = 8.0 / 255.0;
  return spec;
}

inline Dataset synth_dataset(std::uint64_t seed, int n, const TransformSpec& spec,
                             const PipelineConfig& cfg) {
  const SynthDataset synth = generate_dataset(seed, n, spec, cfg.gallery_grid, cfg.learn.t_d);
  return build_dataset(synth.rows, synth.images, cfg);
}

/// Shared-mode bank with M = I.
inline MetricBank unit_bank(Eigen::Index dim, double sigma = 1.0) {
  KissmeModel m;
  m.m = Eigen::MatrixXd::Identity(dim, dim);
  m.calib_sigma = sigma;
  return MetricBank(MetricMode::kShared, m);
}

/// Patch features of one image; the camera is the first letter of the id.
inline ImagePatches patches(const std::string& id, const std::string& person,
                            const GridSpec& grid, FeatureMatrix feats) {
  ImagePatches img;
  img.image_id = id;
  img.camera_id = id.substr(0, 1);
  img.person_id = person;
  img.grid = grid;
  img.feats = std::move(feats);
  return img;
}

inline FeatureMatrix rows(std::initializer_list<std::initializer_list<double>> v) {
  FeatureMatrix m(static_cast<Eigen::Index>(v.size()),
                  static_cast<Eigen::Index>(v.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : v) {
    Eigen::Index c = 0;
    for (double x : row) m(r, c++) = x;
    ++r;
  }
  return m;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> out(n);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

/// Column index of the largest entry in row i, lowest index on ties.
inline PatchIndex row_argmax(const CorrespondenceStructure& s, PatchIndex i) {
  const auto& range = s.layout().range(i);
  const auto row = s.row(i);
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k) {
    if (row[k] > row[best]) best = k;
  }
  return range[best];
}

/// Code of the Error thrown by f, or nullopt when it returns normally.
template <class F>
std::optional<ErrorCode> thrown_code(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("corrstruct_" + name + "_" + std::to_string(std::random_device{}()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace corrstruct::testing

#endif  // CORRSTRUCT_TESTS_SUPPORT_HPP
