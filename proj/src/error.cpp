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

#include "corrstruct/error.hpp"

namespace corrstruct {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kUsage: return "Usage";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kGridMismatch: return "GridMismatch";
    case ErrorCode::kInsufficientSamples: return "InsufficientSamples";
    case ErrorCode::kInsufficientPairs: return "InsufficientPairs";
    case ErrorCode::kEmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::kNegativeEntry: return "NegativeEntry";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kCorruptFile: return "CorruptFile";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kDecodeError: return "DecodeError";
    case ErrorCode::kNoCorrectMatch: return "NoCorrectMatch";
    case ErrorCode::kPoolTooSmall: return "PoolTooSmall";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kTooFewImages: return "TooFewImages";
    case ErrorCode::kDatasetTooSmall: return "DatasetTooSmall";
    case ErrorCode::kEmptyRanks: return "EmptyRanks";
    case ErrorCode::kShiftOutOfBounds: return "ShiftOutOfBounds";
    case ErrorCode::kInfeasibleRow: return "InfeasibleRow";
    case ErrorCode::kUnsolvable: return "Unsolvable";
    case ErrorCode::kSingularCovariance: return "SingularCovariance";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

int exit_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kUsage:
      return 2;
    case ErrorCode::kInsufficientSamples:
    case ErrorCode::kInsufficientPairs:
    case ErrorCode::kInfeasibleRow:
    case ErrorCode::kUnsolvable:
    case ErrorCode::kSingularCovariance:
      return 4;
    default:
      return 3;
  }
}

}  // namespace corrstruct
