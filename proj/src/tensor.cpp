// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "chroma_se/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace chroma_se {

std::string Tensor::ShapeString() const {
  return std::to_string(c_) + "x" + std::to_string(t_) + "x" + std::to_string(f_);
}

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace chroma_se
