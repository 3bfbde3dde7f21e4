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

#include "corrstruct/image.hpp"

#include <cstring>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "corrstruct/error.hpp"

namespace corrstruct {

namespace {

cv::Mat as_mat(const RgbImage& image) {
  // OpenCV does not write through this header, the const_cast only satisfies its API.
  return cv::Mat(image.height, image.width, CV_8UC3,
                 const_cast<std::uint8_t*>(image.data.data()));
}

RgbImage from_mat(const cv::Mat& rgb) {
  RgbImage out(rgb.cols, rgb.rows);
  for (int y = 0; y < rgb.rows; ++y) {
    std::memcpy(out.pixel(0, y), rgb.ptr<std::uint8_t>(y), static_cast<std::size_t>(rgb.cols) * 3);
  }
  return out;
}

}  // namespace

RgbImage RgbImage::crop(int left, int top, int w, int h) const {
  if (left < 0 || top < 0 || w < 0 || h < 0 || left + w > width || top + h > height) {
    throw Error(ErrorCode::kIndexOutOfRange, "crop outside image");
  }
  RgbImage out(w, h);
  for (int y = 0; y < h; ++y) {
    std::memcpy(out.pixel(0, y), pixel(left, top + y), static_cast<std::size_t>(w) * 3);
  }
  return out;
}

RgbImage load_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error(ErrorCode::kDecodeError, "cannot decode image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return from_mat(rgb);
}

void save_image(const std::filesystem::path& path, const RgbImage& image) {
  cv::Mat bgr;
  cv::cvtColor(as_mat(image), bgr, cv::COLOR_RGB2BGR);
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), bgr);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::kIoError, "cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
}

RgbImage resize_image(const RgbImage& image, int width, int height) {
  if (image.width == width && image.height == height) return image;
  cv::Mat out;
  cv::resize(as_mat(image), out, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
  return from_mat(out);
}

}  // namespace corrstruct
