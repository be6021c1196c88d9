// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace chroma_se {

/// Dense channel-major 3-D array: (channels, time, frequency). The time axis
/// is the first spatial axis, frequency the second; stride pairs elsewhere
/// are given in the same (time, frequency) order.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int channels, int time, int freq, double fill = 0.0)
      : c_(channels), t_(time), f_(freq),
        data_(static_cast<std::size_t>(channels) * time * freq, fill) {}

  int channels() const { return c_; }
  int time() const { return t_; }
  int freq() const { return f_; }
  std::size_t plane() const { return static_cast<std::size_t>(t_) * f_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int c, int t, int f) {
    return data_[(static_cast<std::size_t>(c) * t_ + t) * f_ + f];
  }
  double at(int c, int t, int f) const {
    return data_[(static_cast<std::size_t>(c) * t_ + t) * f_ + f];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  std::span<double> channel(int c) {
    return std::span<double>(data_).subspan(static_cast<std::size_t>(c) * plane(), plane());
  }
  std::span<const double> channel(int c) const {
    return std::span<const double>(data_).subspan(static_cast<std::size_t>(c) * plane(), plane());
  }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool SameShape(const Tensor& o) const { return c_ == o.c_ && t_ == o.t_ && f_ == o.f_; }
  std::string ShapeString() const;
  bool AllFinite() const;

  bool operator==(const Tensor&) const = default;

 private:
  int c_ = 0, t_ = 0, f_ = 0;
  std::vector<double> data_;
};

}  // namespace chroma_se
