// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "chroma_se/colormap.hpp"
#include "chroma_se/spectral.hpp"
#include "chroma_se/tensor.hpp"

namespace chroma_se::codec {

inline constexpr int kImageSize = 256;

/// RGB image with components in [0, 1]. Row 0 is the top of the picture;
/// spectrogram images put frequency band 0 on the bottom row and frame 0 in
/// column 0.
struct ColorImage {
  int height = 0;
  int width = 0;
  std::vector<double> rgb;  ///< row-major, interleaved R,G,B
  std::string colormap;
  DisplayRange range;

  ColorImage() = default;
  ColorImage(int h, int w) : height(h), width(w), rgb(static_cast<std::size_t>(h) * w * 3, 0.0) {}

  double& at(int row, int col, int ch) {
    return rgb[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
  }
  double at(int row, int col, int ch) const {
    return rgb[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
  }
};

/// Maps every LPS entry through QuantizeIndex and the table. The matrix must
/// be 256 x 256 (bands x frames).
ColorImage EncodeLps(const dsp::LpsMatrix& lps, const ColormapTable& table,
                     const DisplayRange& range);

/// Lossless 8-bit RGB PNG; colormap name and display range go into tEXt
/// chunks (keys: colormap, lps_lo, lps_hi).
void SaveImage(const ColorImage& img, const std::filesystem::path& path);

/// Throws kIo/kMalformed on unreadable or truncated files. With
/// `require_pipeline_size` a non-256x256 image is rejected (kShapeMismatch).
ColorImage LoadImage(const std::filesystem::path& path, bool require_pipeline_size = false);

/// Channel-major tensor view of an image: tensor(c, t, f) = pixel at column
/// t and row (height - 1 - f).
Tensor ImageToTensor(const ColorImage& img);
ColorImage TensorToImage(const Tensor& t, const std::string& colormap, const DisplayRange& range);

/// Rounds components to the 8-bit grid and clamps them to [0, 1].
ColorImage QuantizeTo8Bit(ColorImage img);

struct ChannelStats {
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{1.0, 1.0, 1.0};
  /// Set when a channel had zero variance; its stddev is then taken as 1.
  std::array<bool, 3> degenerate{};

  bool any_degenerate() const { return degenerate[0] || degenerate[1] || degenerate[2]; }
};

struct StandardizedImage {
  Tensor field;
  ChannelStats stats;
};

/// Per-image, per-channel zero-mean / unit-variance (population variance).
StandardizedImage Standardize(const ColorImage& img);

/// Standardizes with externally supplied statistics (used for training
/// targets, which share the statistics of their noisy input).
Tensor ApplyStandardization(const ColorImage& img, const ChannelStats& stats);

ColorImage Destandardize(const Tensor& field, const ChannelStats& stats,
                         const std::string& colormap, const DisplayRange& range);

/// Regression rows: R, G, B predictors and the true LPS value of the pixel.
struct PixelDataset {
  Eigen::MatrixXd predictors;  ///< N x 3
  Eigen::VectorXd targets;     ///< N

  Eigen::Index size() const { return targets.size(); }
};

/// One row per pixel; frames outer, bands inner (band index varies
/// fastest). Images and LPS matrices must both be 256 x 256.
PixelDataset BuildPixelDataset(std::span<const std::pair<ColorImage, dsp::LpsMatrix>> pairs);

}  // namespace chroma_se::codec
