// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "chroma_se/tensor.hpp"
#include "chroma_se/unet.hpp"

namespace chroma_se::unet {

struct AdamState {
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<double> m;
  std::vector<double> v;
};

/// Bias-corrected adaptive-moment update. Moments are allocated on first use.
void AdamStep(AdamState& state, std::span<double> params, std::span<const double> grads);

struct TrainRunConfig {
  std::int64_t steps = 6000;  ///< train until this many steps have been taken in total
  int batch_size = 1;
  std::uint64_t seed = 0;
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
  std::int64_t checkpoint_interval = 0;  ///< 0: no periodic checkpoints
  std::filesystem::path checkpoint_dir;

  void Validate() const;
  std::string ToJson() const;
  static TrainRunConfig FromJson(const std::string& text);
};

/// Standardized noisy input and its target.
struct TrainingPair {
  Tensor input;
  Tensor target;
};

struct TrainState {
  UNetModel model;
  AdamState optimizer;
  std::int64_t step = 0;
  std::string colormap;  ///< colormap of the training images; may be empty
};

TrainState InitTrainState(UNetModel model, const TrainRunConfig& cfg);

struct LossPoint {
  std::int64_t step;
  double loss;
};

/// Runs steps state.step+1 .. cfg.steps. Each step draws its pairs and
/// dropout masks from a generator seeded by (seed, step), so a run resumed
/// from a checkpoint replays the uninterrupted one exactly. A non-finite
/// loss throws kNumerical and leaves the last checkpoint on disk untouched.
std::vector<LossPoint> TrainDenoiser(TrainState& state, std::span<const TrainingPair> data,
                                     const TrainRunConfig& cfg,
                                     const std::function<void(const LossPoint&)>& on_step = {});

/// Versioned binary: config, parameters, running statistics, optimizer
/// moments and step counter.
void SaveCheckpoint(const TrainState& state, const std::filesystem::path& path);
TrainState LoadCheckpoint(const std::filesystem::path& path);
/// Loads and additionally requires the stored config to equal `expected`.
TrainState LoadCheckpoint(const std::filesystem::path& path, const UNetConfig& expected);

void WriteLossCsv(std::span<const LossPoint> curve, const std::filesystem::path& path);

}  // namespace chroma_se::unet
