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

#include "corrstruct/structure.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "binary_io.hpp"
#include "corrstruct/csv.hpp"
#include "corrstruct/error.hpp"

namespace corrstruct {

namespace {
constexpr std::uint16_t kStructureVersion = 1;
}

StructureLayout::StructureLayout(const GridSpec& probe, const GridSpec& gallery, int t_d)
    : probe_(probe), gallery_(gallery), t_d_(t_d) {
  if (t_d < 0) throw Error(ErrorCode::kInvalidSpec, "T_d must be >= 0");
  coloc_ = colocation_map(probe_, gallery_);
  ranges_.resize(probe_.size());
  for (PatchIndex i = 0; i < probe_.size(); ++i) ranges_[i] = search_set(gallery_, coloc_[i], t_d);
}

std::ptrdiff_t StructureLayout::slot(PatchIndex i, PatchIndex j) const {
  const auto& r = ranges_.at(i);
  const auto it = std::lower_bound(r.begin(), r.end(), j);
  if (it == r.end() || *it != j) return -1;
  return it - r.begin();
}

int StructureLayout::distance(PatchIndex i, PatchIndex j) const {
  return patch_distance(gallery_, coloc_.at(i), j);
}

LayoutPtr make_layout(const GridSpec& probe, const GridSpec& gallery, int t_d) {
  return std::make_shared<const StructureLayout>(probe, gallery, t_d);
}

CorrespondenceStructure::CorrespondenceStructure(LayoutPtr layout, std::string tag)
    : layout_(std::move(layout)), tag_(std::move(tag)) {
  values_.resize(layout_->n_rows());
  for (PatchIndex i = 0; i < layout_->n_rows(); ++i) {
    values_[i].assign(layout_->range(i).size(), 0.0);
  }
}

double CorrespondenceStructure::at(PatchIndex i, PatchIndex j) const {
  if (i >= n_rows() || j >= n_cols()) {
    throw Error(ErrorCode::kIndexOutOfRange, "structure entry out of range");
  }
  const auto s = layout_->slot(i, j);
  return s < 0 ? 0.0 : values_[i][static_cast<std::size_t>(s)];
}

void CorrespondenceStructure::set(PatchIndex i, PatchIndex j, double value) {
  if (i >= n_rows() || j >= n_cols()) {
    throw Error(ErrorCode::kIndexOutOfRange, "structure entry out of range");
  }
  const auto s = layout_->slot(i, j);
  if (s < 0) {
    throw Error(ErrorCode::kIndexOutOfRange, "entry (" + std::to_string(i) + "," +
                                                 std::to_string(j) + ") outside search range");
  }
  values_[i][static_cast<std::size_t>(s)] = value;
}

Eigen::MatrixXd CorrespondenceStructure::dense() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_rows()),
                                              static_cast<Eigen::Index>(n_cols()));
  for (PatchIndex i = 0; i < n_rows(); ++i) {
    const auto& r = layout_->range(i);
    for (std::size_t k = 0; k < r.size(); ++k) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r[k])) = values_[i][k];
    }
  }
  return out;
}

std::uint64_t CorrespondenceStructure::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& row : values_) {
    for (double v : row) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xffU;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

CorrespondenceStructure init_structure(LayoutPtr layout) {
  CorrespondenceStructure s(layout);
  for (PatchIndex i = 0; i < layout->n_rows(); ++i) {
    const auto& r = layout->range(i);
    auto row = s.row(i);
    double total = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k) {
      row[k] = 1.0 / (layout->distance(i, r[k]) + 1.0);
      total += row[k];
    }
    for (double& v : row) v /= total;
  }
  return s;
}

CorrespondenceStructure init_structure(const PatchGrid& probe, const PatchGrid& gallery, int t_d) {
  return init_structure(make_layout(probe.spec(), gallery.spec(), t_d));
}

NormalizeResult normalize_rows(const CorrespondenceStructure& s) {
  NormalizeResult out{s, {}};
  for (PatchIndex i = 0; i < s.n_rows(); ++i) {
    auto row = out.structure.row(i);
    double total = 0.0;
    for (double v : row) {
      if (v < 0.0 || !std::isfinite(v)) {
        throw Error(ErrorCode::kNegativeEntry, "row " + std::to_string(i) + " has a negative or non-finite entry");
      }
      total += v;
    }
    if (total == 0.0) {
      out.zero_rows.push_back(i);
      continue;
    }
    for (double& v : row) v /= total;
  }
  return out;
}

bool StructureMask::at(PatchIndex i, PatchIndex j) const {
  const auto& r = cols_.at(i);
  return std::binary_search(r.begin(), r.end(), j);
}

std::size_t StructureMask::count() const {
  std::size_t n = 0;
  for (const auto& r : cols_) n += r.size();
  return n;
}

StructureMask threshold_mask(const CorrespondenceStructure& s, double t_c) {
  if (!(t_c >= 0.0 && t_c < 1.0)) throw Error(ErrorCode::kInvalidSpec, "T_c must lie in [0, 1)");
  StructureMask mask(s.n_rows(), s.n_cols());
  for (PatchIndex i = 0; i < s.n_rows(); ++i) {
    const auto& r = s.layout().range(i);
    const auto row = s.row(i);
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (row[k] > t_c) mask.cols_[i].push_back(r[k]);
    }
  }
  return mask;
}

bool is_row_stochastic(const CorrespondenceStructure& s, double tol) {
  for (PatchIndex i = 0; i < s.n_rows(); ++i) {
    const auto row = s.row(i);
    if (row.empty()) continue;
    double total = 0.0;
    for (double v : row) {
      if (!(v >= 0.0) || !std::isfinite(v)) return false;
      total += v;
    }
    if (std::abs(total - 1.0) > tol) return false;
  }
  return true;
}

void save_structure(const std::filesystem::path& path, const CorrespondenceStructure& s) {
  detail::BinaryWriter w;
  w.magic("CSTR");
  w.put<std::uint16_t>(kStructureVersion);
  detail::put_grid_spec(w, s.layout().probe().spec());
  detail::put_grid_spec(w, s.layout().gallery().spec());
  w.put<std::int32_t>(s.t_d());
  w.put_string(s.tag());
  std::uint64_t nnz = 0;
  for (PatchIndex i = 0; i < s.n_rows(); ++i) {
    for (double v : s.row(i)) nnz += v != 0.0 ? 1 : 0;
  }
  w.put<std::uint64_t>(nnz);
  for (PatchIndex i = 0; i < s.n_rows(); ++i) {
    const auto& r = s.layout().range(i);
    const auto row = s.row(i);
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (row[k] == 0.0) continue;
      w.put<std::uint32_t>(static_cast<std::uint32_t>(i));
      w.put<std::uint32_t>(static_cast<std::uint32_t>(r[k]));
      w.put<double>(row[k]);
    }
  }
  w.save(path);
}

CorrespondenceStructure load_structure(const std::filesystem::path& path) {
  detail::BinaryReader r(path);
  r.expect_magic("CSTR");
  const auto version = r.get<std::uint16_t>();
  if (version != kStructureVersion) {
    throw Error(ErrorCode::kVersionMismatch,
                path.string() + ": structure version " + std::to_string(version) + " unsupported");
  }
  const GridSpec probe = detail::get_grid_spec(r);
  const GridSpec gallery = detail::get_grid_spec(r);
  const auto t_d = r.get<std::int32_t>();
  if (t_d < 0) throw Error(ErrorCode::kCorruptFile, path.string() + ": negative T_d");
  std::string tag = r.get_string();
  CorrespondenceStructure s(make_layout(probe, gallery, t_d), std::move(tag));
  const auto nnz = r.get<std::uint64_t>();
  for (std::uint64_t k = 0; k < nnz; ++k) {
    const auto i = r.get<std::uint32_t>();
    const auto j = r.get<std::uint32_t>();
    const auto v = r.get<double>();
    if (i >= s.n_rows() || j >= s.n_cols() || s.layout().slot(i, j) < 0) {
      throw Error(ErrorCode::kCorruptFile, path.string() + ": entry outside search range");
    }
    s.set(i, j, v);
  }
  if (!r.at_end()) throw Error(ErrorCode::kCorruptFile, path.string() + ": trailing bytes");
  return s;
}

void export_heatmap_csv(const std::filesystem::path& path, const CorrespondenceStructure& s,
                        int downsample) {
  if (downsample < 1) throw Error(ErrorCode::kUsage, "downsample must be >= 1");
  const Eigen::MatrixXd full = s.dense();
  const Eigen::Index k = downsample;
  const Eigen::Index rows = (full.rows() + k - 1) / k;
  const Eigen::Index cols = (full.cols() + k - 1) / k;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Eigen::Index h = std::min(k, full.rows() - r * k);
      const Eigen::Index w = std::min(k, full.cols() - c * k);
      const double v = full.block(r * k, c * k, h, w).mean();
      if (c) out << ',';
      out << format_double(v);
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

}  // namespace corrstruct
