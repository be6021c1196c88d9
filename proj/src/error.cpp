// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "chroma_se/error.hpp"

namespace chroma_se {

const char* ToString(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kNotFound: return "not found";
    case ErrorCode::kMalformed: return "malformed";
    case ErrorCode::kUnsupported: return "unsupported";
    case ErrorCode::kIo: return "i/o";
    case ErrorCode::kShapeMismatch: return "shape mismatch";
    case ErrorCode::kVersionMismatch: return "version mismatch";
    case ErrorCode::kNumerical: return "numerical";
    case ErrorCode::kState: return "state";
  }
  return "unknown";
}

}  // namespace chroma_se
