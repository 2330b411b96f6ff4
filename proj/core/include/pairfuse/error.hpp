// ----------------------------------------------------------------------------
// Copyright 2026 The pairfuse Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ----------------------------------------------------------------------------

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pairfuse {

enum class ErrorCode {
  shape_mismatch,
  non_square_spatial,
  non_finite_input,
  invalid_config,
  zero_class_count,
  empty_input,
  parse_error,
  validation_error,
  degenerate_polygon,
  singular_homography,
  zero_std,
  dataset_error,
  diverged_loss,
  io_error,
  schema_version_mismatch,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// callers (tests, the CLI exit-code mapping) can dispatch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& message);

}  // namespace pairfuse
