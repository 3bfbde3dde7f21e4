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

#include "corrstruct/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <opencv2/imgproc.hpp>

#include "corrstruct/error.hpp"
#include "corrstruct/parallel.hpp"

namespace corrstruct {

namespace {

// Platform-independent draws; the standard distributions are implementation-defined.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(unit(rng) * (hi - lo + 1));
}

double gaussian(std::mt19937_64& rng) {
  const double u1 = 1.0 - unit(rng);
  const double u2 = unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

struct Rgb {
  std::uint8_t r, g, b;
};

Rgb random_lab_color(std::mt19937_64& rng) {
  cv::Mat lab(1, 1, CV_32FC3);
  lab.at<cv::Vec3f>(0, 0) = {static_cast<float>(uniform(rng, 20.0, 90.0)),
                             static_cast<float>(uniform(rng, -70.0, 70.0)),
                             static_cast<float>(uniform(rng, -70.0, 70.0))};
  cv::Mat rgb;
  cv::cvtColor(lab, rgb, cv::COLOR_Lab2RGB);
  const auto v = rgb.at<cv::Vec3f>(0, 0);
  const auto to8 = [](float x) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(x, 0.0f, 1.0f) * 255.0f));
  };
  return {to8(v[0]), to8(v[1]), to8(v[2])};
}

// Extended-canvas texture; camera windows are cut from it.
RgbImage render_texture(std::mt19937_64& rng, int width, int height) {
  RgbImage canvas(width, height);
  const int n_bands = uniform_int(rng, std::max(2, height / 14), std::max(2, height / 8));
  std::vector<double> weights(static_cast<std::size_t>(n_bands));
  double total = 0.0;
  for (double& w : weights) total += (w = uniform(rng, 0.6, 1.4));
  int top = 0;
  double acc = 0.0;
  for (int b = 0; b < n_bands; ++b) {
    acc += weights[static_cast<std::size_t>(b)];
    const int bottom = b + 1 == n_bands ? height : static_cast<int>(std::lround(acc / total * height));
    const int n_blocks = uniform_int(rng, 3, 5);
    std::vector<int> cuts{0};
    for (int k = 1; k < n_blocks; ++k) {
      cuts.push_back(static_cast<int>(std::lround(width * (k + uniform(rng, -0.25, 0.25)) / n_blocks)));
    }
    cuts.push_back(width);
    for (int k = 0; k < n_blocks; ++k) {
      const Rgb c = random_lab_color(rng);
      for (int y = top; y < bottom; ++y) {
        for (int x = cuts[static_cast<std::size_t>(k)]; x < cuts[static_cast<std::size_t>(k) + 1]; ++x) {
          std::uint8_t* p = canvas.pixel(x, y);
          p[0] = c.r;
          p[1] = c.g;
          p[2] = c.b;
        }
      }
    }
    top = bottom;
  }
  return canvas;
}

void draw_strap(RgbImage& canvas, int left, int width) {
  for (int y = 0; y < canvas.height; ++y) {
    for (int x = left; x < left + width; ++x) {
      std::uint8_t* p = canvas.pixel(x, y);
      p[0] = p[1] = p[2] = 20;
    }
  }
}

}  // namespace

std::vector<PoseShift> TransformSpec::poses() const {
  if (pose_mix.empty()) return {PoseShift{"front", 1.0, dy, dx}};
  return pose_mix;
}

void TransformSpec::validate(int t_d) const {
  double total = 0.0;
  for (const auto& p : poses()) {
    if (std::abs(p.dy) >= t_d || std::abs(p.dx) >= t_d || std::abs(p.dy) + std::abs(p.dx) >= t_d) {
      throw Error(ErrorCode::kShiftOutOfBounds, "shift (" + std::to_string(p.dy) + ", " +
                                                    std::to_string(p.dx) + ") reaches T_d " +
                                                    std::to_string(t_d));
    }
    if (!(p.probability >= 0.0)) throw Error(ErrorCode::kInvalidSpec, "pose probability must be >= 0");
    if (p.label.empty() || p.label.find(',') != std::string::npos) {
      throw Error(ErrorCode::kInvalidSpec, "pose labels must be nonempty and comma-free");
    }
    total += p.probability;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::kInvalidSpec, "pose probabilities must sum to 1");
  if (!(gain_min > 0.0 && gain_max >= gain_min)) throw Error(ErrorCode::kInvalidSpec, "invalid gain range");
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::kInvalidSpec, "noise_sigma must be >= 0");
}

SynthDataset generate_dataset(std::uint64_t seed, int n_identities, const TransformSpec& spec,
                              const GridSpec& gallery, int t_d) {
  if (n_identities < 4) throw Error(ErrorCode::kDatasetTooSmall, "at least 4 identities are required");
  gallery.validate();
  spec.validate(t_d);
  const auto poses = spec.poses();
  const int w = gallery.image_w;
  const int h = gallery.image_h;
  int margin_x = 0, margin_y = 0;
  for (const auto& p : poses) {
    margin_x = std::max(margin_x, std::abs(p.dx) * gallery.stride_x);
    margin_y = std::max(margin_y, std::abs(p.dy) * gallery.stride_y);
  }
  if (margin_y >= h || margin_x >= w) {
    throw Error(ErrorCode::kShiftOutOfBounds, "shift moves the whole image out of view");
  }

  SynthDataset data;
  data.ground_truth = spec;
  const auto n = static_cast<std::size_t>(n_identities);
  data.rows.resize(2 * n);
  data.images.resize(2 * n);
  parallel_for(n, [&](std::size_t id) {
    std::mt19937_64 rng(mix_seed(seed, id));
    const double u = unit(rng);
    std::size_t pose = poses.size() - 1;
    double cum = 0.0;
    for (std::size_t k = 0; k < poses.size(); ++k) {
      cum += poses[k].probability;
      if (u < cum) {
        pose = k;
        break;
      }
    }
    RgbImage canvas = render_texture(rng, w + 2 * margin_x, h + 2 * margin_y);
    const int strap_w = std::max(2, w / 8);
    const int slots = static_cast<int>(poses.size());
    const int strap_left = slots == 1 ? 2 : 2 + static_cast<int>(pose) * (w - 4 - strap_w) / (slots - 1);
    draw_strap(canvas, margin_x + strap_left, strap_w);

    const PoseShift& shift = poses[pose];
    RgbImage a = canvas.crop(margin_x, margin_y, w, h);
    RgbImage b = canvas.crop(margin_x - shift.dx * gallery.stride_x,
                             margin_y - shift.dy * gallery.stride_y, w, h);
    const double gain = uniform(rng, spec.gain_min, spec.gain_max);
    for (auto& px : b.data) {
      double v = px * gain;
      if (spec.noise_sigma > 0.0) v += gaussian(rng) * spec.noise_sigma * 255.0;
      px = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }

    char person[16];
    std::snprintf(person, sizeof(person), "p%04zu", id);
    const std::string pid(person);
    data.rows[2 * id] = {"A_" + pid, "A", pid, shift.label, "A/" + pid + ".png"};
    data.rows[2 * id + 1] = {"B_" + pid, "B", pid, shift.label, "B/" + pid + ".png"};
    data.images[2 * id] = std::move(a);
    data.images[2 * id + 1] = std::move(b);
  });
  return data;
}

void write_dataset(const std::filesystem::path& dir, const SynthDataset& data) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "A", ec);
  std::filesystem::create_directories(dir / "B", ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t k = 0; k < data.rows.size(); ++k) save_image(dir / data.rows[k].path, data.images[k]);
  write_manifest(dir / "manifest.csv", data.rows);
}

std::ptrdiff_t shifted_target(const StructureLayout& layout, PatchIndex i, int dy, int dx) {
  const PatchGrid& g = layout.gallery();
  const PatchIndex c = layout.colocated(i);
  const int r = g.row_of(c) + dy;
  const int col = g.col_of(c) + dx;
  return g.contains(r, col) ? static_cast<std::ptrdiff_t>(g.index_of(r, col)) : -1;
}

CorrespondenceStructure ground_truth_structure(const TransformSpec& spec, LayoutPtr layout) {
  spec.validate(layout->t_d());
  CorrespondenceStructure out(layout, "ground-truth");
  const PatchGrid& g = layout->gallery();
  for (PatchIndex i = 0; i < layout->n_rows(); ++i) {
    const PatchIndex c = layout->colocated(i);
    for (const auto& p : spec.poses()) {
      if (p.probability == 0.0) continue;
      const int r = std::clamp(g.row_of(c) + p.dy, 0, g.rows() - 1);
      const int col = std::clamp(g.col_of(c) + p.dx, 0, g.cols() - 1);
      const PatchIndex j = g.index_of(r, col);
      if (layout->slot(i, j) < 0) {
        throw Error(ErrorCode::kShiftOutOfBounds, "shifted target leaves the search range");
      }
      out.set(i, j, out.at(i, j) + p.probability);
    }
  }
  return out;
}

std::vector<PatchIndex> interior_rows(const TransformSpec& spec, const StructureLayout& layout) {
  std::vector<PatchIndex> out;
  for (PatchIndex i = 0; i < layout.n_rows(); ++i) {
    bool inside = true;
    for (const auto& p : spec.poses()) inside = inside && shifted_target(layout, i, p.dy, p.dx) >= 0;
    if (inside) out.push_back(i);
  }
  return out;
}

}  // namespace corrstruct
