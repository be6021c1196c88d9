// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "chroma_se/layers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>

#include "chroma_se/error.hpp"
#include "chroma_se/random.hpp"

namespace chroma_se::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

// Caps one im2col buffer at about 32 MB.
constexpr std::size_t kChunkElements = std::size_t{1} << 22;

int RowsPerChunk(const ConvGeometry& g) {
  const std::size_t k = static_cast<std::size_t>(g.in_c) * g.kt * g.kf;
  const std::size_t per_row = k * static_cast<std::size_t>(g.out_f);
  return static_cast<int>(std::max<std::size_t>(1, kChunkElements / std::max<std::size_t>(1, per_row)));
}

// Columns for output rows [t0, t1): K x ((t1 - t0) * out_f).
void Im2Col(const Tensor& x, const ConvGeometry& g, int t0, int t1, RowMat& cols) {
  const int rows = t1 - t0;
  const Eigen::Index p = static_cast<Eigen::Index>(rows) * g.out_f;
  cols.resize(static_cast<Eigen::Index>(g.in_c) * g.kt * g.kf, p);
  Eigen::Index k = 0;
  for (int c = 0; c < g.in_c; ++c) {
    for (int a = 0; a < g.kt; ++a) {
      for (int b = 0; b < g.kf; ++b, ++k) {
        double* dst = cols.row(k).data();
        for (int t = t0; t < t1; ++t) {
          const int it = t * g.st - g.pad_t + a;
          double* row = dst + static_cast<std::size_t>(t - t0) * g.out_f;
          if (it < 0 || it >= g.in_t) {
            std::fill(row, row + g.out_f, 0.0);
            continue;
          }
          const double* src = x.data() + (static_cast<std::size_t>(c) * g.in_t + it) * g.in_f;
          for (int f = 0; f < g.out_f; ++f) {
            const int jf = f * g.sf - g.pad_f + b;
            row[f] = (jf >= 0 && jf < g.in_f) ? src[jf] : 0.0;
          }
        }
      }
    }
  }
}

void Col2ImAdd(const RowMat& cols, const ConvGeometry& g, int t0, int t1, Tensor& x) {
  Eigen::Index k = 0;
  for (int c = 0; c < g.in_c; ++c) {
    for (int a = 0; a < g.kt; ++a) {
      for (int b = 0; b < g.kf; ++b, ++k) {
        const double* src = cols.row(k).data();
        for (int t = t0; t < t1; ++t) {
          const int it = t * g.st - g.pad_t + a;
          if (it < 0 || it >= g.in_t) continue;
          const double* row = src + static_cast<std::size_t>(t - t0) * g.out_f;
          double* dst = x.data() + (static_cast<std::size_t>(c) * g.in_t + it) * g.in_f;
          for (int f = 0; f < g.out_f; ++f) {
            const int jf = f * g.sf - g.pad_f + b;
            if (jf >= 0 && jf < g.in_f) dst[jf] += row[f];
          }
        }
      }
    }
  }
}

void CheckKernel(std::span<const double> kernel, const ConvGeometry& g) {
  Require(kernel.size() == g.kernel_size(), ErrorCode::kShapeMismatch,
          "conv: kernel has " + std::to_string(kernel.size()) + " entries, expected " +
              std::to_string(g.kernel_size()));
}

void CheckInput(const Tensor& x, int c, int t, int f, const char* what) {
  Require(x.channels() == c && x.time() == t && x.freq() == f, ErrorCode::kShapeMismatch,
          std::string(what) + ": got " + x.ShapeString() + ", expected (" + std::to_string(c) +
              ", " + std::to_string(t) + ", " + std::to_string(f) + ")");
}

void AddBias(Tensor& y, std::span<const double> bias) {
  if (bias.empty()) return;
  Require(bias.size() == static_cast<std::size_t>(y.channels()), ErrorCode::kShapeMismatch,
          "conv: bias size mismatch");
  for (int c = 0; c < y.channels(); ++c) {
    for (double& v : y.channel(c)) v += bias[static_cast<std::size_t>(c)];
  }
}

void AccumulateBias(const Tensor& d, std::span<double> d_bias) {
  if (d_bias.empty()) return;
  for (int c = 0; c < d.channels(); ++c) {
    double s = 0.0;
    for (double v : d.channel(c)) s += v;
    d_bias[static_cast<std::size_t>(c)] += s;
  }
}

int SameOut(int in, int s) { return (in + s - 1) / s; }

}  // namespace

ConvGeometry MakeGeometry(int in_c, int out_c, int kt, int kf, int st, int sf, int in_t, int in_f,
                          Padding padding) {
  Require(in_c > 0 && out_c > 0 && kt > 0 && kf > 0 && st > 0 && sf > 0 && in_t > 0 && in_f > 0,
          ErrorCode::kInvalidArgument, "conv: all sizes must be positive");
  ConvGeometry g{in_c, out_c, kt, kf, st, sf, in_t, in_f, 0, 0, 0, 0};
  if (padding == Padding::kSame) {
    g.out_t = SameOut(in_t, st);
    g.out_f = SameOut(in_f, sf);
    g.pad_t = std::max((g.out_t - 1) * st + kt - in_t, 0) / 2;
    g.pad_f = std::max((g.out_f - 1) * sf + kf - in_f, 0) / 2;
  } else {
    Require(in_t >= kt && in_f >= kf, ErrorCode::kShapeMismatch,
            "conv: valid padding needs input at least as large as the kernel");
    g.out_t = (in_t - kt) / st + 1;
    g.out_f = (in_f - kf) / sf + 1;
  }
  return g;
}

Tensor Conv2d(const Tensor& x, std::span<const double> kernel, std::span<const double> bias,
              const ConvGeometry& g) {
  CheckKernel(kernel, g);
  CheckInput(x, g.in_c, g.in_t, g.in_f, "conv2d input");
  Tensor y(g.out_c, g.out_t, g.out_f);
  const ConstMap w(kernel.data(), g.out_c, static_cast<Eigen::Index>(g.in_c) * g.kt * g.kf);
  MutMap ym(y.data(), g.out_c, static_cast<Eigen::Index>(g.out_t) * g.out_f);
  const int step = RowsPerChunk(g);
  RowMat cols;
  for (int t0 = 0; t0 < g.out_t; t0 += step) {
    const int t1 = std::min(g.out_t, t0 + step);
    Im2Col(x, g, t0, t1, cols);
    ym.middleCols(static_cast<Eigen::Index>(t0) * g.out_f, cols.cols()).noalias() = w * cols;
  }
  AddBias(y, bias);
  return y;
}

void Conv2dBackward(const Tensor& x, std::span<const double> kernel, const ConvGeometry& g,
                    const Tensor& dy, Tensor* dx, std::span<double> d_kernel,
                    std::span<double> d_bias) {
  CheckKernel(kernel, g);
  CheckInput(x, g.in_c, g.in_t, g.in_f, "conv2d backward input");
  CheckInput(dy, g.out_c, g.out_t, g.out_f, "conv2d backward gradient");
  Require(d_kernel.size() == kernel.size(), ErrorCode::kShapeMismatch, "conv2d: d_kernel size");
  const Eigen::Index k = static_cast<Eigen::Index>(g.in_c) * g.kt * g.kf;
  const ConstMap w(kernel.data(), g.out_c, k);
  MutMap dw(d_kernel.data(), g.out_c, k);
  const ConstMap dym(dy.data(), g.out_c, static_cast<Eigen::Index>(g.out_t) * g.out_f);
  if (dx != nullptr) *dx = Tensor(g.in_c, g.in_t, g.in_f);
  const int step = RowsPerChunk(g);
  RowMat cols, dcols;
  for (int t0 = 0; t0 < g.out_t; t0 += step) {
    const int t1 = std::min(g.out_t, t0 + step);
    Im2Col(x, g, t0, t1, cols);
    const auto dy_chunk = dym.middleCols(static_cast<Eigen::Index>(t0) * g.out_f, cols.cols());
    dw.noalias() += dy_chunk * cols.transpose();
    if (dx != nullptr) {
      dcols.noalias() = w.transpose() * dy_chunk;
      Col2ImAdd(dcols, g, t0, t1, *dx);
    }
  }
  AccumulateBias(dy, d_bias);
}

Tensor Conv2dTranspose(const Tensor& y, std::span<const double> kernel,
                       std::span<const double> bias, const ConvGeometry& g) {
  CheckKernel(kernel, g);
  CheckInput(y, g.out_c, g.out_t, g.out_f, "conv2d_transpose input");
  Tensor z(g.in_c, g.in_t, g.in_f);
  const Eigen::Index k = static_cast<Eigen::Index>(g.in_c) * g.kt * g.kf;
  const ConstMap w(kernel.data(), g.out_c, k);
  const ConstMap ym(y.data(), g.out_c, static_cast<Eigen::Index>(g.out_t) * g.out_f);
  const int step = RowsPerChunk(g);
  RowMat cols;
  for (int t0 = 0; t0 < g.out_t; t0 += step) {
    const int t1 = std::min(g.out_t, t0 + step);
    cols.noalias() = w.transpose() *
                     ym.middleCols(static_cast<Eigen::Index>(t0) * g.out_f,
                                   static_cast<Eigen::Index>(t1 - t0) * g.out_f);
    Col2ImAdd(cols, g, t0, t1, z);
  }
  AddBias(z, bias);
  return z;
}

void Conv2dTransposeBackward(const Tensor& y, std::span<const double> kernel,
                             const ConvGeometry& g, const Tensor& dz, Tensor* dy,
                             std::span<double> d_kernel, std::span<double> d_bias) {
  CheckKernel(kernel, g);
  CheckInput(y, g.out_c, g.out_t, g.out_f, "conv2d_transpose backward input");
  CheckInput(dz, g.in_c, g.in_t, g.in_f, "conv2d_transpose backward gradient");
  Require(d_kernel.size() == kernel.size(), ErrorCode::kShapeMismatch,
          "conv2d_transpose: d_kernel size");
  const Eigen::Index k = static_cast<Eigen::Index>(g.in_c) * g.kt * g.kf;
  const ConstMap w(kernel.data(), g.out_c, k);
  MutMap dw(d_kernel.data(), g.out_c, k);
  const ConstMap ym(y.data(), g.out_c, static_cast<Eigen::Index>(g.out_t) * g.out_f);
  std::optional<MutMap> dym;
  if (dy != nullptr) {
    *dy = Tensor(g.out_c, g.out_t, g.out_f);
    dym.emplace(dy->data(), g.out_c, static_cast<Eigen::Index>(g.out_t) * g.out_f);
  }
  const int step = RowsPerChunk(g);
  RowMat cols;
  for (int t0 = 0; t0 < g.out_t; t0 += step) {
    const int t1 = std::min(g.out_t, t0 + step);
    Im2Col(dz, g, t0, t1, cols);
    const Eigen::Index c0 = static_cast<Eigen::Index>(t0) * g.out_f;
    dw.noalias() += ym.middleCols(c0, cols.cols()) * cols.transpose();
    if (dym) dym->middleCols(c0, cols.cols()).noalias() = w * cols;
  }
  if (!d_bias.empty()) {
    Require(d_bias.size() == static_cast<std::size_t>(g.in_c), ErrorCode::kShapeMismatch,
            "conv2d_transpose: d_bias size");
    AccumulateBias(dz, d_bias);
  }
}

namespace {

void CheckChannelParams(const Tensor& x, std::span<const double> p, const char* what) {
  Require(p.size() == static_cast<std::size_t>(x.channels()), ErrorCode::kShapeMismatch,
          std::string("batchnorm: ") + what + " size mismatch");
}

}  // namespace

Tensor BatchNormTrain(const Tensor& x, std::span<const double> gamma, std::span<const double> beta,
                      double eps, NormCache* cache) {
  CheckChannelParams(x, gamma, "gamma");
  CheckChannelParams(x, beta, "beta");
  const auto channels = static_cast<std::size_t>(x.channels());
  NormCache local;
  NormCache& nc = cache != nullptr ? *cache : local;
  nc.xhat = Tensor(x.channels(), x.time(), x.freq());
  nc.mean.assign(channels, 0.0);
  nc.var.assign(channels, 0.0);
  nc.inv_std.assign(channels, 0.0);
  Tensor y(x.channels(), x.time(), x.freq());
  const auto n = static_cast<double>(x.plane());
  for (int c = 0; c < x.channels(); ++c) {
    const auto cu = static_cast<std::size_t>(c);
    const auto xs = x.channel(c);
    double mean = 0.0;
    for (double v : xs) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : xs) var += (v - mean) * (v - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    nc.mean[cu] = mean;
    nc.var[cu] = var;
    nc.inv_std[cu] = inv;
    auto xh = nc.xhat.channel(c);
    auto ys = y.channel(c);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      xh[i] = (xs[i] - mean) * inv;
      ys[i] = gamma[cu] * xh[i] + beta[cu];
    }
  }
  return y;
}

Tensor BatchNormEval(const Tensor& x, std::span<const double> gamma, std::span<const double> beta,
                     std::span<const double> running_mean, std::span<const double> running_var,
                     double eps, NormCache* cache) {
  CheckChannelParams(x, gamma, "gamma");
  CheckChannelParams(x, beta, "beta");
  CheckChannelParams(x, running_mean, "running_mean");
  CheckChannelParams(x, running_var, "running_var");
  NormCache local;
  NormCache& nc = cache != nullptr ? *cache : local;
  nc.xhat = Tensor(x.channels(), x.time(), x.freq());
  nc.mean.assign(running_mean.begin(), running_mean.end());
  nc.var.assign(running_var.begin(), running_var.end());
  nc.inv_std.assign(static_cast<std::size_t>(x.channels()), 0.0);
  Tensor y(x.channels(), x.time(), x.freq());
  for (int c = 0; c < x.channels(); ++c) {
    const auto cu = static_cast<std::size_t>(c);
    const double inv = 1.0 / std::sqrt(running_var[cu] + eps);
    nc.inv_std[cu] = inv;
    const auto xs = x.channel(c);
    auto xh = nc.xhat.channel(c);
    auto ys = y.channel(c);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      xh[i] = (xs[i] - running_mean[cu]) * inv;
      ys[i] = gamma[cu] * xh[i] + beta[cu];
    }
  }
  return y;
}

Tensor BatchNormTrainBackward(const NormCache& cache, std::span<const double> gamma,
                              const Tensor& dy, std::span<double> d_gamma,
                              std::span<double> d_beta) {
  Require(dy.SameShape(cache.xhat), ErrorCode::kShapeMismatch, "batchnorm backward: shape");
  Tensor dx(dy.channels(), dy.time(), dy.freq());
  const auto n = static_cast<double>(dy.plane());
  for (int c = 0; c < dy.channels(); ++c) {
    const auto cu = static_cast<std::size_t>(c);
    const auto g = dy.channel(c);
    const auto xh = cache.xhat.channel(c);
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      sum_g += g[i];
      sum_gx += g[i] * xh[i];
    }
    d_gamma[cu] += sum_gx;
    d_beta[cu] += sum_g;
    const double k = gamma[cu] * cache.inv_std[cu] / n;
    auto out = dx.channel(c);
    for (std::size_t i = 0; i < g.size(); ++i) {
      out[i] = k * (n * g[i] - sum_g - xh[i] * sum_gx);
    }
  }
  return dx;
}

Tensor BatchNormEvalBackward(const NormCache& cache, std::span<const double> gamma,
                             const Tensor& dy, std::span<double> d_gamma,
                             std::span<double> d_beta) {
  Require(dy.SameShape(cache.xhat), ErrorCode::kShapeMismatch, "batchnorm backward: shape");
  Tensor dx(dy.channels(), dy.time(), dy.freq());
  for (int c = 0; c < dy.channels(); ++c) {
    const auto cu = static_cast<std::size_t>(c);
    const auto g = dy.channel(c);
    const auto xh = cache.xhat.channel(c);
    double sum_g = 0.0, sum_gx = 0.0;
    const double k = gamma[cu] * cache.inv_std[cu];
    auto out = dx.channel(c);
    for (std::size_t i = 0; i < g.size(); ++i) {
      sum_g += g[i];
      sum_gx += g[i] * xh[i];
      out[i] = k * g[i];
    }
    d_gamma[cu] += sum_gx;
    d_beta[cu] += sum_g;
  }
  return dx;
}

Tensor LeakyRelu(const Tensor& x, double slope) {
  Tensor y = x;
  for (double& v : y.values()) v = v >= 0.0 ? v : slope * v;
  return y;
}

Tensor LeakyReluBackward(const Tensor& x, const Tensor& dy, double slope) {
  Require(x.SameShape(dy), ErrorCode::kShapeMismatch, "leaky_relu backward: shape");
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (x.values()[i] < 0.0) dx.values()[i] *= slope;
  }
  return dx;
}

std::vector<double> DropoutMask(std::size_t n, double rate, std::uint64_t seed) {
  Require(rate >= 0.0 && rate < 1.0, ErrorCode::kInvalidArgument, "dropout: rate must be in [0, 1)");
  std::vector<double> mask(n, 1.0);
  if (rate == 0.0) return mask;
  const double keep = 1.0 / (1.0 - rate);
  Rng rng(seed);
  for (double& m : mask) m = rng.Uniform() < rate ? 0.0 : keep;
  return mask;
}

Tensor Dropout(const Tensor& x, double rate, bool train, std::uint64_t seed) {
  Require(rate >= 0.0 && rate < 1.0, ErrorCode::kInvalidArgument, "dropout: rate must be in [0, 1)");
  if (!train || rate == 0.0) return x;
  const std::vector<double> mask = DropoutMask(x.size(), rate, seed);
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y.values()[i] *= mask[i];
  return y;
}

Tensor ConcatChannels(const Tensor& a, const Tensor& b) {
  Require(a.time() == b.time() && a.freq() == b.freq(), ErrorCode::kShapeMismatch,
          "concat: spatial mismatch " + a.ShapeString() + " vs " + b.ShapeString());
  Tensor out(a.channels() + b.channels(), a.time(), a.freq());
  std::copy(a.values().begin(), a.values().end(), out.values().begin());
  std::copy(b.values().begin(), b.values().end(),
            out.values().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

void SplitChannels(const Tensor& d, int a_channels, Tensor* da, Tensor* db) {
  Require(a_channels >= 0 && a_channels <= d.channels(), ErrorCode::kShapeMismatch,
          "split: bad channel count");
  const std::size_t na = static_cast<std::size_t>(a_channels) * d.plane();
  if (da != nullptr) {
    *da = Tensor(a_channels, d.time(), d.freq());
    std::copy(d.values().begin(), d.values().begin() + static_cast<std::ptrdiff_t>(na),
              da->values().begin());
  }
  if (db != nullptr) {
    *db = Tensor(d.channels() - a_channels, d.time(), d.freq());
    std::copy(d.values().begin() + static_cast<std::ptrdiff_t>(na), d.values().end(),
              db->values().begin());
  }
}

}  // namespace chroma_se::nn
