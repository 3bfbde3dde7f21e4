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

#ifndef CORRSTRUCT_MANIFEST_HPP
#define CORRSTRUCT_MANIFEST_HPP

#include <filesystem>
#include <string>
#include <vector>

namespace corrstruct {

struct ManifestRow {
  std::string image_id;
  std::string camera_id;  // "A" (probe) or "B" (gallery)
  std::string person_id;
  std::string pose_label;  // may be empty
  std::string path;        // relative to the manifest's directory
  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

struct Manifest {
  std::filesystem::path root;  // directory holding the manifest
  std::vector<ManifestRow> rows;

  std::filesystem::path resolve(const ManifestRow& row) const { return root / row.path; }
};

inline constexpr const char* kManifestHeader = "image_id,camera_id,person_id,pose_label,path";

/// Reads and validates a manifest CSV.
///
/// Errors: ParseError (with the 1-based line) for malformed rows, MissingFile
/// for absent image files, DuplicateId for a repeated image_id, InvalidSpec
/// when a person does not appear exactly once in each camera.
Manifest parse_manifest(const std::filesystem::path& path);

/// Validation shared with parse_manifest, without touching the filesystem.
void validate_manifest_rows(const std::vector<ManifestRow>& rows);

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);

}  // namespace corrstruct

#endif  // CORRSTRUCT_MANIFEST_HPP
