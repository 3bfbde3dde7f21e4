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

#ifndef CORRSTRUCT_SRC_BINARY_IO_HPP
#define CORRSTRUCT_SRC_BINARY_IO_HPP

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "corrstruct/error.hpp"
#include "corrstruct/grid.hpp"

namespace corrstruct::detail {

static_assert(std::endian::native == std::endian::little, "container encoding assumes little-endian");

class BinaryWriter {
 public:
  void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }

  template <typename T>
  void put(T value) {
    std::array<char, sizeof(T)> raw{};
    std::memcpy(raw.data(), &value, sizeof(T));
    bytes_.insert(bytes_.end(), raw.begin(), raw.end());
  }

  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
    out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
  }

  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path) : name_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kMissingFile, "cannot open " + name_);
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  void expect_magic(std::string_view m) {
    need(m.size());
    if (std::string_view(bytes_.data() + pos_, m.size()) != m) {
      throw Error(ErrorCode::kCorruptFile, name_ + ": bad magic, expected " + std::string(m));
    }
    pos_ += m.size();
  }

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }
  const std::string& name() const { return name_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::kCorruptFile, name_ + ": truncated");
  }

  std::string name_;
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

inline void put_grid_spec(BinaryWriter& w, const GridSpec& g) {
  for (int v : {g.image_w, g.image_h, g.patch_w, g.patch_h, g.stride_x, g.stride_y}) {
    w.put<std::int32_t>(v);
  }
}

inline GridSpec get_grid_spec(BinaryReader& r) {
  GridSpec g;
  g.image_w = r.get<std::int32_t>();
  g.image_h = r.get<std::int32_t>();
  g.patch_w = r.get<std::int32_t>();
  g.patch_h = r.get<std::int32_t>();
  g.stride_x = r.get<std::int32_t>();
  g.stride_y = r.get<std::int32_t>();
  try {
    g.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kCorruptFile, r.name() + ": invalid grid spec: " + e.what());
  }
  return g;
}

}  // namespace corrstruct::detail

#endif  // CORRSTRUCT_SRC_BINARY_IO_HPP
