// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "chroma_se/tensor.hpp"

namespace chroma_se::nn {

enum class Padding {
  kSame,   ///< out = ceil(in / stride); pad_before = total / 2, remainder after
  kValid,  ///< out = floor((in - kernel) / stride) + 1, no padding
};

/// Shapes and padding of one convolution. Kernels are stored row-major as
/// (out_c, in_c, kt, kf); the transposed convolution reuses the same kernel
/// and maps out_c channels back to in_c.
struct ConvGeometry {
  int in_c = 0, out_c = 0;
  int kt = 1, kf = 1;
  int st = 1, sf = 1;
  int in_t = 0, in_f = 0;
  int out_t = 0, out_f = 0;
  int pad_t = 0, pad_f = 0;  ///< leading padding per axis

  std::size_t kernel_size() const {
    return static_cast<std::size_t>(out_c) * in_c * kt * kf;
  }
};

ConvGeometry MakeGeometry(int in_c, int out_c, int kt, int kf, int st, int sf, int in_t, int in_f,
                          Padding padding = Padding::kSame);

/// y = conv(x) + bias. bias has out_c entries (may be empty for none).
Tensor Conv2d(const Tensor& x, std::span<const double> kernel, std::span<const double> bias,
              const ConvGeometry& g);

/// Accumulates dL/dkernel and dL/dbias; writes dL/dx when dx is non-null.
void Conv2dBackward(const Tensor& x, std::span<const double> kernel, const ConvGeometry& g,
                    const Tensor& dy, Tensor* dx, std::span<double> d_kernel,
                    std::span<double> d_bias);

/// Adjoint of Conv2d in x, plus bias over its in_c output channels:
/// y has out_c x out_t x out_f, the result in_c x in_t x in_f.
Tensor Conv2dTranspose(const Tensor& y, std::span<const double> kernel,
                       std::span<const double> bias, const ConvGeometry& g);

void Conv2dTransposeBackward(const Tensor& y, std::span<const double> kernel,
                             const ConvGeometry& g, const Tensor& dz, Tensor* dy,
                             std::span<double> d_kernel, std::span<double> d_bias);

/// Per-channel normalization record kept for the backward pass.
struct NormCache {
  Tensor xhat;
  std::vector<double> mean;
  std::vector<double> var;
  std::vector<double> inv_std;
};

/// Train mode: statistics of x itself over each channel plane (population
/// variance). Returns gamma * xhat + beta.
Tensor BatchNormTrain(const Tensor& x, std::span<const double> gamma, std::span<const double> beta,
                      double eps, NormCache* cache);

/// Eval mode: fixed affine map from running statistics.
Tensor BatchNormEval(const Tensor& x, std::span<const double> gamma, std::span<const double> beta,
                     std::span<const double> running_mean, std::span<const double> running_var,
                     double eps, NormCache* cache);

/// Returns dL/dx; accumulates dL/dgamma and dL/dbeta.
Tensor BatchNormTrainBackward(const NormCache& cache, std::span<const double> gamma,
                              const Tensor& dy, std::span<double> d_gamma,
                              std::span<double> d_beta);
Tensor BatchNormEvalBackward(const NormCache& cache, std::span<const double> gamma,
                             const Tensor& dy, std::span<double> d_gamma,
                             std::span<double> d_beta);

Tensor LeakyRelu(const Tensor& x, double slope);
Tensor LeakyReluBackward(const Tensor& x, const Tensor& dy, double slope);

/// Keep-mask scaled by 1/(1-rate); all ones for rate 0.
std::vector<double> DropoutMask(std::size_t n, double rate, std::uint64_t seed);
Tensor Dropout(const Tensor& x, double rate, bool train, std::uint64_t seed);

/// Stacks channels of a then b.
Tensor ConcatChannels(const Tensor& a, const Tensor& b);
/// Splits a gradient for ConcatChannels back into its parts.
void SplitChannels(const Tensor& d, int a_channels, Tensor* da, Tensor* db);

}  // namespace chroma_se::nn
