/*
 * Copyright 2026 The GeoXAI Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace geoxai {

// Every failure surfaced by the library carries one of these codes. The CLI
// maps them onto process exit codes (see exit_code_for).
enum class ErrorCode {
  // tabular-core
  kMissingColumn,
  kEmptyAfterFiltering,
  kMalformedCsv,
  kInvalidK,
  kInvalidSchema,
  // metrics
  kLengthMismatch,
  kEmptyInput,
  kZeroVariance,
  // gbdt-model
  kInvalidParams,
  kTooFewRows,
  kArityMismatch,
  kCorruptModelFile,
  // geoshapley-engine
  kOutOfRange,
  kCapExceeded,
  kSingularSystem,
  kInvalidBudget,
  kPredictorFailure,
  // explain-analytics
  kEmptyRecords,
  kUnknownFeature,
  kMissingGeo,
  kBootstrapFailed,
  // synthgen / config
  kInvalidSpec,
  kInvalidConfig,
  kIoError,
  // predictor-bridge
  kTimeout,
  kVersionMismatch,
  kTransportError,
  kMalformedReply,
  kRemoteError,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kEmptyAfterFiltering: return "EmptyAfterFiltering";
    case ErrorCode::kMalformedCsv: return "MalformedCsv";
    case ErrorCode::kInvalidK: return "InvalidK";
    case ErrorCode::kInvalidSchema: return "InvalidSchema";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kZeroVariance: return "ZeroVariance";
    case ErrorCode::kInvalidParams: return "InvalidParams";
    case ErrorCode::kTooFewRows: return "TooFewRows";
    case ErrorCode::kArityMismatch: return "ArityMismatch";
    case ErrorCode::kCorruptModelFile: return "CorruptModelFile";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kCapExceeded: return "CapExceeded";
    case ErrorCode::kSingularSystem: return "SingularSystem";
    case ErrorCode::kInvalidBudget: return "InvalidBudget";
    case ErrorCode::kPredictorFailure: return "PredictorFailure";
    case ErrorCode::kEmptyRecords: return "EmptyRecords";
    case ErrorCode::kUnknownFeature: return "UnknownFeature";
    case ErrorCode::kMissingGeo: return "MissingGeo";
    case ErrorCode::kBootstrapFailed: return "BootstrapFailed";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kTransportError: return "TransportError";
    case ErrorCode::kMalformedReply: return "MalformedReply";
    case ErrorCode::kRemoteError: return "RemoteError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Process exit codes: 0 success, 2 usage/config, 3 engine precondition,
// 4 transport.
inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kTimeout:
    case ErrorCode::kVersionMismatch:
    case ErrorCode::kTransportError:
    case ErrorCode::kMalformedReply:
    case ErrorCode::kRemoteError:
      return 4;
    case ErrorCode::kOutOfRange:
    case ErrorCode::kCapExceeded:
    case ErrorCode::kSingularSystem:
    case ErrorCode::kInvalidBudget:
    case ErrorCode::kPredictorFailure:
    case ErrorCode::kArityMismatch:
    case ErrorCode::kBootstrapFailed:
    case ErrorCode::kTooFewRows:
    case ErrorCode::kZeroVariance:
      return 3;
    default:
      return 2;
  }
}

}  // namespace geoxai
