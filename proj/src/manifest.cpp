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

#include "corrstruct/manifest.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "corrstruct/error.hpp"

namespace corrstruct {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void parse_fail(const std::filesystem::path& path, std::size_t line,
                             const std::string& what) {
  throw Error(ErrorCode::kParseError,
              path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

void validate_manifest_rows(const std::vector<ManifestRow>& rows) {
  std::set<std::string> ids;
  std::map<std::string, std::pair<int, int>> cameras;  // person -> (count A, count B)
  for (const auto& row : rows) {
    if (!ids.insert(row.image_id).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate image_id " + row.image_id);
    }
    auto& counts = cameras[row.person_id];
    (row.camera_id == "A" ? counts.first : counts.second) += 1;
  }
  std::string bad;
  for (const auto& [person, counts] : cameras) {
    if (counts.first != 1 || counts.second != 1) {
      bad += (bad.empty() ? "" : ", ") + person + " (A:" + std::to_string(counts.first) +
             " B:" + std::to_string(counts.second) + ")";
    }
  }
  if (!bad.empty()) {
    throw Error(ErrorCode::kInvalidSpec,
                "persons must appear exactly once in each camera: " + bad);
  }
}

Manifest parse_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open manifest " + path.string());
  Manifest manifest;
  manifest.root = path.parent_path();

  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    if (!header_seen) {
      if (trim(line) != kManifestHeader) {
        parse_fail(path, line_no, std::string("expected header '") + kManifestHeader + "'");
      }
      header_seen = true;
      continue;
    }
    auto fields = split_fields(line);
    if (fields.size() != 5) {
      parse_fail(path, line_no, "expected 5 fields, found " + std::to_string(fields.size()));
    }
    for (auto& f : fields) f = trim(f);
    ManifestRow row{fields[0], fields[1], fields[2], fields[3], fields[4]};
    if (row.image_id.empty() || row.person_id.empty() || row.path.empty()) {
      parse_fail(path, line_no, "image_id, person_id and path must be nonempty");
    }
    if (row.camera_id != "A" && row.camera_id != "B") {
      parse_fail(path, line_no, "camera_id must be A or B, got '" + row.camera_id + "'");
    }
    manifest.rows.push_back(std::move(row));
  }
  if (!header_seen) parse_fail(path, line_no == 0 ? 1 : line_no, "missing header");

  for (const auto& row : manifest.rows) {
    if (!std::filesystem::exists(manifest.resolve(row))) {
      throw Error(ErrorCode::kMissingFile, "image file not found: " + manifest.resolve(row).string());
    }
  }
  validate_manifest_rows(manifest.rows);
  return manifest;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& r : rows) {
    out << r.image_id << ',' << r.camera_id << ',' << r.person_id << ',' << r.pose_label << ','
        << r.path << '\n';
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed: " + path.string());
}

}  // namespace corrstruct
