// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>

namespace chroma_se {

enum class ErrorCode {
  kInvalidArgument,
  kNotFound,
  kMalformed,
  kUnsupported,
  kIo,
  kShapeMismatch,
  kVersionMismatch,
  kNumerical,
  kState,
};

const char* ToString(ErrorCode code);

/// Every failure in the library surfaces as this exception; `code()` lets
/// callers tell e.g. a missing WAV file from an unsupported encoding.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void Require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace chroma_se
