// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "chroma_se/image.hpp"
#include "chroma_se/spectral.hpp"

namespace chroma_se::regnet {

/// Column statistics used to standardize predictors before the first layer.
struct InputStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool is_set() const { return !mean.empty(); }
};

/// Fully connected regression net: tanh hidden layers, linear output.
/// Default shape 3 -> 10 -> 10 -> 10 -> 1 maps a pixel colour to an LPS value;
/// {1, 10, 10, 10, 1} is the single-input gray variant.
struct RegnetModel {
  std::vector<int> sizes;
  std::vector<Eigen::MatrixXd> weights;  ///< layer l: sizes[l+1] x sizes[l]
  std::vector<Eigen::VectorXd> biases;
  InputStats stats;
  std::string colormap;  ///< table the model was trained on; empty if none

  int num_inputs() const { return sizes.front(); }
  std::size_t num_layers() const { return weights.size(); }
  /// Weights only (240 for the default shape).
  std::size_t WeightCount() const;
  /// Weights plus biases (271 for the default shape).
  std::size_t ParameterCount() const;
};

inline const std::vector<int> kDefaultSizes = {3, 10, 10, 10, 1};
inline const std::vector<int> kGraySizes = {1, 10, 10, 10, 1};

/// Glorot-uniform weights, zero biases, stats unset. Deterministic in seed.
RegnetModel RegnetInit(std::uint64_t seed, const std::vector<int>& sizes = kDefaultSizes);

/// kBypass feeds inputs to the first layer unstandardized (unit tests).
enum class StatsMode { kRequire, kBypass };

double Forward(const RegnetModel& model, std::span<const double> input,
               StatsMode mode = StatsMode::kRequire);

/// Rows of `inputs` are samples (N x num_inputs).
Eigen::VectorXd ForwardBatch(const RegnetModel& model, const Eigen::MatrixXd& inputs,
                             StatsMode mode = StatsMode::kRequire);

struct RegnetGradient {
  std::vector<Eigen::MatrixXd> d_weights;
  std::vector<Eigen::VectorXd> d_biases;
  double loss = 0.0;  ///< mean squared error of the batch
};

/// Exact gradient of the batch MSE with respect to every weight and bias.
/// Input statistics are treated as constants.
RegnetGradient Gradient(const RegnetModel& model, const Eigen::MatrixXd& inputs,
                        const Eigen::VectorXd& targets, StatsMode mode = StatsMode::kRequire);

/// Parameters in a fixed order (layer by layer: weights column-major, then
/// biases). Used by the optimizer and by gradient checks.
std::vector<double> FlattenParameters(const RegnetModel& model);
void SetParameters(RegnetModel& model, std::span<const double> flat);
std::vector<double> FlattenGradient(const RegnetGradient& grad);

struct RegnetTrainConfig {
  int epochs = 1000;
  double holdout = 0.20;
  int batch_size = 256;
  double learning_rate = 1e-3;
  /// Learning rate at the last epoch; cosine decay from learning_rate. Equal
  /// to learning_rate for a constant schedule.
  double final_learning_rate = 1e-3;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct RegnetReport {
  double train_mse = 0.0;
  double test_mse = 0.0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::vector<double> train_curve;  ///< mean batch loss per epoch
  std::vector<double> test_curve;   ///< hold-out MSE per epoch
  std::string optimizer;
};

struct RegnetTrainResult {
  RegnetModel model;
  RegnetReport report;
};

struct HoldoutIndices {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;
};

/// Rows shuffled by MixSeed(seed, 0); the last round(holdout * n) are held out.
HoldoutIndices HoldoutSplit(std::size_t n, double holdout, std::uint64_t seed);

/// Hold-out training: rows are shuffled by seed, the last `holdout` fraction
/// is held out, input stats come from the training split only. Mini-batch
/// Adam. Throws on fewer than 100 rows or a non-finite loss.
RegnetTrainResult Train(RegnetModel model, const codec::PixelDataset& data,
                        const RegnetTrainConfig& cfg);

/// Predictor columns the model consumes (all three, or R only for a
/// single-input model).
Eigen::MatrixXd SelectPredictors(const RegnetModel& model, const Eigen::MatrixXd& rgb);

/// Pixelwise inverse colour map: a 256 x 256 image back to a 256 x 256 LPS
/// matrix (bands x frames). Requires trained input stats.
dsp::LpsMatrix Decode(const RegnetModel& model, const codec::ColorImage& img);

/// Plain-text, versioned; floats written as hexfloat so reload is bit-exact.
void Save(const RegnetModel& model, const std::filesystem::path& path);
RegnetModel Load(const std::filesystem::path& path);

}  // namespace chroma_se::regnet
