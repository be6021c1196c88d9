// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>

#include "chroma_se/audio.hpp"
#include "chroma_se/stft.hpp"

namespace chroma_se::dsp {

/// |S|^2 is clamped here before the log so silent bins stay finite.
inline constexpr double kLogFloor = 1e-10;

/// Log-power spectrogram, rows = frequency bands, columns = frames.
struct LpsMatrix {
  Eigen::MatrixXd values;
  double bin_hz = 0.0;
  double frame_s = 0.0;

  Eigen::Index num_bands() const { return values.rows(); }
  Eigen::Index num_frames() const { return values.cols(); }
};

/// values = ln(max(mag^2, kLogFloor)). Rejects negative entries.
LpsMatrix LpsFromMagnitude(const Eigen::MatrixXd& magnitude, double bin_hz = 0.0,
                           double frame_s = 0.0);
LpsMatrix LpsFromSpectrogram(const ComplexSpectrogram& spec);

/// sqrt(exp(values)). Rejects non-finite entries.
Eigen::MatrixXd MagnitudeFromLps(const LpsMatrix& lps);

/// Drops the Nyquist row: 257 x T -> 256 x T.
LpsMatrix CropNyquistRow(const LpsMatrix& lps);

/// Re-creates the Nyquist row as a copy of row 256: 256 x T -> 257 x T.
LpsMatrix RestoreNyquistRow(const LpsMatrix& lps);

/// Extends a one-sided magnitude (DC..Nyquist, n/2+1 rows) to all n bins by
/// even symmetry about DC: row n-k equals row k for 1 <= k < n/2.
Eigen::MatrixXd MirrorNegativeFrequencies(const Eigen::MatrixXd& one_sided);

/// Polar-to-Cartesian assembly of estimated magnitude and (noisy) phase
/// followed by overlap-add synthesis. Both matrices are one-sided.
AudioClip Reconstruct(const Eigen::MatrixXd& magnitude, const Eigen::MatrixXd& phase,
                      const StftParams& params, int sample_rate);

}  // namespace chroma_se::dsp
