// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chroma_se/layers.hpp"
#include "chroma_se/tensor.hpp"

namespace chroma_se::unet {

/// One encoder layer; the decoder layer at the mirrored depth reuses its
/// stride and kernel.
struct LayerSpec {
  int channels = 0;
  int stride_t = 1, stride_f = 1;
  int kernel_t = 1, kernel_f = 1;

  bool operator==(const LayerSpec&) const = default;
};

struct UNetConfig {
  int in_channels = 3;
  int out_channels = 3;
  int input_time = 256;
  int input_freq = 256;
  int scale_divisor = 1;  ///< already applied to encoder channel counts
  std::vector<LayerSpec> encoder;
  int dropout_layers = 3;  ///< first decoder layers with dropout
  double dropout_rate = 0.5;
  double leaky_slope = 0.2;
  double init_std = 0.02;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;  ///< running = (1 - m) * running + m * batch

  /// e1..e8: channels 64,128,256,512,512,512,512,512; strides (1,2) x 4 then
  /// (2,2) x 4; kernels (5,7) x 3, (5,5) x 2, (3,3) x 3. Channels divided by
  /// `divisor`, which must divide all of them.
  static UNetConfig Full(int divisor = 1);

  /// Square input of side `size` (a power of two from 16 to 256): keeps the
  /// four (2,2) layers and the first log2(size) - 4 of the (1,2) layers so
  /// the bottleneck has one frequency row.
  static UNetConfig Desk(int size, int divisor);

  std::size_t depth() const { return encoder.size(); }
  void Validate() const;
  std::string ToJson() const;
  static UNetConfig FromJson(const std::string& text);

  bool operator==(const UNetConfig&) const = default;
};

enum class LayerKind { kEncoder, kDecoder };

/// Resolved geometry and parameter offsets for one layer.
struct LayerInfo {
  LayerKind kind = LayerKind::kEncoder;
  int index = 0;  ///< 1-based: e1..en, d1..dn
  nn::ConvGeometry geom;
  bool has_norm = true;
  bool dropout = false;
  std::size_t w_offset = 0, w_size = 0;
  std::size_t b_offset = 0, b_size = 0;
  std::size_t gamma_offset = 0, beta_offset = 0, norm_size = 0;
  std::size_t stat_offset = 0;  ///< into running_mean / running_var

  std::string Name() const;
  std::size_t ParameterCount() const { return w_size + b_size + 2 * norm_size; }
};

/// Resolves every layer of a config (shapes, padding, offsets).
std::vector<LayerInfo> ResolveLayers(const UNetConfig& cfg);

struct UNetModel {
  UNetConfig config;
  std::vector<LayerInfo> layers;  ///< e1..en then d1..dn
  std::vector<double> params;     ///< trainable, flat
  std::vector<double> running_mean;
  std::vector<double> running_var;
};

/// Kernels ~ N(0, init_std), biases and shifts 0, scales 1, running mean 0
/// and variance 1. Deterministic in seed.
UNetModel Build(const UNetConfig& cfg, std::uint64_t seed);

struct ShapeEntry {
  std::string layer;
  int channels, time, freq;
};
/// Output shape of each layer without running the network.
std::vector<ShapeEntry> ShapeTrace(const UNetConfig& cfg);

struct ParamCount {
  std::size_t total = 0;
  std::vector<std::pair<std::string, std::size_t>> by_layer;
};
/// Kernels + biases + normalization scale/shift; running stats excluded.
ParamCount CountParams(const UNetModel& model);
/// Same count from the config alone (no allocation).
ParamCount CountParams(const UNetConfig& cfg);

enum class Mode { kTrain, kEval };

/// Everything the backward pass needs from one forward call.
struct ForwardTrace {
  Mode mode = Mode::kEval;
  std::vector<Tensor> inputs;     ///< input of each layer's convolution
  std::vector<nn::NormCache> norm;
  std::vector<Tensor> pre_act;    ///< value fed to the activation
  std::vector<std::vector<double>> masks;
  Tensor output;
};

/// Runs the network. Train mode normalizes with the statistics of x itself
/// and applies dropout with masks derived from dropout_seed; eval mode uses
/// running statistics and no dropout. Never modifies the model.
Tensor Forward(const UNetModel& model, const Tensor& x, Mode mode, std::uint64_t dropout_seed = 0,
               ForwardTrace* trace = nullptr);

/// Accumulates dL/dparams into grads (sized like model.params) given
/// dL/doutput. Throws kNumerical naming the layer on non-finite values.
void Backward(const UNetModel& model, const ForwardTrace& trace, const Tensor& d_output,
              std::vector<double>& grads);

/// Per-channel log-spectral distance, averaged over channels.
double LsdLoss(const Tensor& reference, const Tensor& estimate);
/// d LsdLoss / d estimate with the square-root epsilon guard.
Tensor LsdLossGradient(const Tensor& reference, const Tensor& estimate);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grads;
  ForwardTrace trace;
};
LossAndGrad ComputeLossAndGrad(const UNetModel& model, const Tensor& input, const Tensor& target,
                               Mode mode, std::uint64_t dropout_seed = 0);

/// Folds the train-mode statistics recorded in a trace into the running
/// statistics.
void UpdateRunningStats(UNetModel& model, const ForwardTrace& trace);

}  // namespace chroma_se::unet
