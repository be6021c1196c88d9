// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstddef>
#include <vector>

#include "chroma_se/audio.hpp"

namespace chroma_se::dsp {

/// Hann-windowed framing. Defaults: 512-sample (32 ms) frames, 256 hop.
struct StftParams {
  int frame_len = 512;
  int hop = 256;

  int num_bins() const { return frame_len / 2 + 1; }
  /// floor((n - frame_len) / hop) + 1; frames start at sample 0 (no padding).
  std::size_t NumFrames(std::size_t num_samples) const;
  /// (frames - 1) * hop + frame_len.
  std::size_t SynthesisLength(std::size_t num_frames) const;
  void Validate() const;

  bool operator==(const StftParams&) const = default;
};

/// Periodic Hann window of length n.
std::vector<double> HannWindow(int n);

/// One-sided spectrogram, rows = bins (DC first, Nyquist last), columns =
/// frames. Phase in radians, (-pi, pi].
struct ComplexSpectrogram {
  Eigen::MatrixXd magnitude;
  Eigen::MatrixXd phase;
  StftParams params;
  int sample_rate = 0;

  Eigen::Index num_bins() const { return magnitude.rows(); }
  Eigen::Index num_frames() const { return magnitude.cols(); }
};

/// Throws kInvalidArgument when the clip is shorter than one frame.
ComplexSpectrogram Stft(const AudioClip& clip, const StftParams& params = {});

/// Weighted overlap-add: each frame is inverse transformed, windowed again,
/// summed, and divided by the accumulated squared window. Samples whose
/// squared-window sum is (numerically) zero are left at 0.
AudioClip Istft(const ComplexSpectrogram& spec);

}  // namespace chroma_se::dsp
