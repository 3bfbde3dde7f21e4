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

#ifndef CORRSTRUCT_IMAGE_HPP
#define CORRSTRUCT_IMAGE_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

namespace corrstruct {

/// 8-bit interleaved RGB raster.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // row-major, 3 bytes per pixel

  RgbImage() = default;
  RgbImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::uint8_t* pixel(int x, int y) { return &data[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* pixel(int x, int y) const {
    return &data[(static_cast<std::size_t>(y) * width + x) * 3];
  }

  /// Copies the w×h block whose top-left corner is (left, top).
  RgbImage crop(int left, int top, int w, int h) const;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Decodes PNG/PPM (anything OpenCV reads). Throws Error(kDecodeError).
RgbImage load_image(const std::filesystem::path& path);

/// Encodes by extension (.png, .ppm). Throws Error(kIoError).
void save_image(const std::filesystem::path& path, const RgbImage& image);

/// Bilinear rescale; returns the input unchanged when already w×h.
RgbImage resize_image(const RgbImage& image, int width, int height);

}  // namespace corrstruct

#endif  // CORRSTRUCT_IMAGE_HPP
