// Copyright 2026 The lexstat Authors
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

#ifndef LEXSTAT_ERROR_HPP_
#define LEXSTAT_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace lexstat {

/// Error categories. The HTTP layer maps each onto a status class and the
/// CLI maps them all onto exit code 1.
enum class ErrorCode {
  kInvalidArgument,   // malformed input, schema violation
  kValidation,        // a Parse or ontology edit does not validate
  kNotFound,
  kConflict,          // duplicate names, job already active
  kPrecondition,      // missing seeds, index not built, ...
  kContextLength,     // request would exceed the model context window
  kAuth,
  kTransient,         // retryable transport failure
  kTimeout,
  kParseFailure,      // LLM output could not be repaired into a Parse
  kToolRouting,
  kInternal,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string detail = {})
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace lexstat

#endif  // LEXSTAT_ERROR_HPP_
