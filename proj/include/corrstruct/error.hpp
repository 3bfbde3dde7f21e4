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

#ifndef CORRSTRUCT_ERROR_HPP
#define CORRSTRUCT_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace corrstruct {

/// Machine-readable failure categories. The CLI prints the name and maps
/// each code onto a process exit status (see `exit_status`).
enum class ErrorCode {
  kUsage,
  kInvalidSpec,
  kIndexOutOfRange,
  kLengthMismatch,
  kShapeMismatch,
  kGridMismatch,
  kInsufficientSamples,
  kInsufficientPairs,
  kEmptyTrainingSet,
  kNegativeEntry,
  kVersionMismatch,
  kCorruptFile,
  kParseError,
  kMissingFile,
  kDuplicateId,
  kDecodeError,
  kNoCorrectMatch,
  kPoolTooSmall,
  kTooLarge,
  kTooFewImages,
  kDatasetTooSmall,
  kEmptyRanks,
  kShiftOutOfBounds,
  kInfeasibleRow,
  kUnsolvable,
  kSingularCovariance,
  kIoError,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// 0 ok, 2 usage, 3 data error, 4 numeric failure.
int exit_status(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by the assignment solver when a row has no feasible column.
class InfeasibleRowError : public Error {
 public:
  explicit InfeasibleRowError(std::size_t row)
      : Error(ErrorCode::kInfeasibleRow, "row " + std::to_string(row) + " has no feasible column"),
        row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace corrstruct

#endif  // CORRSTRUCT_ERROR_HPP
