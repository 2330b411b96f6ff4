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

#include "pairfuse/error.hpp"

namespace pairfuse {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::shape_mismatch: return "ShapeMismatch";
    case ErrorCode::non_square_spatial: return "NonSquareSpatial";
    case ErrorCode::non_finite_input: return "NonFiniteInput";
    case ErrorCode::invalid_config: return "InvalidConfig";
    case ErrorCode::zero_class_count: return "ZeroClassCount";
    case ErrorCode::empty_input: return "EmptyInput";
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::validation_error: return "ValidationError";
    case ErrorCode::degenerate_polygon: return "DegeneratePolygon";
    case ErrorCode::singular_homography: return "SingularHomography";
    case ErrorCode::zero_std: return "ZeroStd";
    case ErrorCode::dataset_error: return "DatasetError";
    case ErrorCode::diverged_loss: return "DivergedLoss";
    case ErrorCode::io_error: return "IoError";
    case ErrorCode::schema_version_mismatch: return "SchemaVersionMismatch";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void raise(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace pairfuse
