// Copyright 2026 The Savanna Authors
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

#ifndef SAVANNA_ERROR_HPP_
#define SAVANNA_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace savanna {

/// Closed set of failure categories. The wire API reports these verbatim
/// (see to_string) so scripts can branch on them.
enum class ErrorCode {
  kInvalidArgument,
  kNotFound,
  kConflict,
  /// A feedback verdict names a proposal that is not in the pending query.
  /// A refinement of kInvalidArgument that the service reports as 409.
  kVerdictNotInQuery,
  kCalibrationFailure,
  kTrainingFailure,
  kSessionComplete,
  kIoError,
  kInternal,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string detail = {})
      : std::runtime_error(std::move(message)),
        code_(code),
        detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  std::string const& detail() const noexcept { return detail_; }

  bool is_invalid_argument() const noexcept {
    return code_ == ErrorCode::kInvalidArgument ||
           code_ == ErrorCode::kVerdictNotInQuery;
  }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void throw_invalid(std::string message,
                                       std::string detail = {}) {
  throw Error(ErrorCode::kInvalidArgument, std::move(message),
              std::move(detail));
}

}  // namespace savanna

#endif  // SAVANNA_ERROR_HPP_
