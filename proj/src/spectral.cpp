// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "chroma_se/spectral.hpp"

#include <cmath>
#include <string>

#include "chroma_se/error.hpp"

namespace chroma_se::dsp {

LpsMatrix LpsFromMagnitude(const Eigen::MatrixXd& magnitude, double bin_hz,
                           double frame_s) {
  Require((magnitude.array() >= 0.0).all(), ErrorCode::kInvalidArgument,
          "lps: magnitude has negative entries");
  LpsMatrix lps;
  lps.bin_hz = bin_hz;
  lps.frame_s = frame_s;
  lps.values = magnitude.array().square().max(kLogFloor).log().matrix();
  return lps;
}

LpsMatrix LpsFromSpectrogram(const ComplexSpectrogram& spec) {
  const double bin_hz =
      static_cast<double>(spec.sample_rate) / spec.params.frame_len;
  const double frame_s =
      static_cast<double>(spec.params.hop) / std::max(spec.sample_rate, 1);
  return LpsFromMagnitude(spec.magnitude, bin_hz, frame_s);
}

Eigen::MatrixXd MagnitudeFromLps(const LpsMatrix& lps) {
  Require(lps.values.allFinite(), ErrorCode::kInvalidArgument,
          "lps: non-finite values");
  return lps.values.array().exp().sqrt().matrix();
}

LpsMatrix CropNyquistRow(const LpsMatrix& lps) {
  Require(lps.num_bands() == 257, ErrorCode::kShapeMismatch,
          "crop_nyquist_row: expected 257 rows, got " +
              std::to_string(lps.num_bands()));
  LpsMatrix out = lps;
  out.values = lps.values.topRows(256);
  return out;
}

LpsMatrix RestoreNyquistRow(const LpsMatrix& lps) {
  Require(lps.num_bands() == 256, ErrorCode::kShapeMismatch,
          "restore_nyquist_row: expected 256 rows, got " +
              std::to_string(lps.num_bands()));
  LpsMatrix out = lps;
  out.values.resize(257, lps.num_frames());
  out.values.topRows(256) = lps.values;
  out.values.row(256) = lps.values.row(255);
  return out;
}

Eigen::MatrixXd MirrorNegativeFrequencies(const Eigen::MatrixXd& one_sided) {
  const Eigen::Index half_plus_one = one_sided.rows();
  Require(half_plus_one >= 2, ErrorCode::kShapeMismatch,
          "mirror: need at least DC and Nyquist rows");
  const Eigen::Index n = 2 * (half_plus_one - 1);
  Eigen::MatrixXd full(n, one_sided.cols());
  full.topRows(half_plus_one) = one_sided;
  for (Eigen::Index k = half_plus_one; k < n; ++k) full.row(k) = one_sided.row(n - k);
  return full;
}

AudioClip Reconstruct(const Eigen::MatrixXd& magnitude, const Eigen::MatrixXd& phase,
                      const StftParams& params, int sample_rate) {
  Require(magnitude.rows() == phase.rows() && magnitude.cols() == phase.cols(),
          ErrorCode::kShapeMismatch, "reconstruct: magnitude/phase shape mismatch");
  ComplexSpectrogram spec;
  spec.magnitude = magnitude;
  spec.phase = phase;
  spec.params = params;
  spec.sample_rate = sample_rate;
  return Istft(spec);
}

}  // namespace chroma_se::dsp
