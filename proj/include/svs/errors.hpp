/**
 * Copyright 2026 the svsep authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef SVS_ERRORS_HPP
#define SVS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace svs {

enum class ErrorCode {
  invalid_input,
  invalid_config,
  invalid_spec,
  kind_mismatch,
  shape_mismatch,
  segment_out_of_range,
  infeasible_split,
  missing_genre,
  missing_stem,
  missing_source,
  alignment_failed,
  silent_track,
  undefined_metric,
  numeric_error,
  io_error,
};

const char* error_code_name(ErrorCode code);

/// Exception carrying a machine-checkable error code next to the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::invalid_config: return "invalid-config";
    case ErrorCode::invalid_spec: return "invalid-spec";
    case ErrorCode::kind_mismatch: return "kind-mismatch";
    case ErrorCode::shape_mismatch: return "shape-mismatch";
    case ErrorCode::segment_out_of_range: return "segment-out-of-range";
    case ErrorCode::infeasible_split: return "infeasible-split";
    case ErrorCode::missing_genre: return "missing-genre";
    case ErrorCode::missing_stem: return "missing-stem";
    case ErrorCode::missing_source: return "missing-source";
    case ErrorCode::alignment_failed: return "alignment-failed";
    case ErrorCode::silent_track: return "silent-track";
    case ErrorCode::undefined_metric: return "undefined-metric";
    case ErrorCode::numeric_error: return "numeric-error";
    case ErrorCode::io_error: return "io-error";
  }
  return "unknown-error";
}

}  // namespace svs

#endif  // SVS_ERRORS_HPP
