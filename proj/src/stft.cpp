// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "chroma_se/stft.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "chroma_se/error.hpp"
#include "chroma_se/fft.hpp"
#include "chroma_se/spectral.hpp"

namespace chroma_se::dsp {

void StftParams::Validate() const {
  Require(frame_len > 0 && frame_len % 2 == 0, ErrorCode::kInvalidArgument,
          "stft: frame_len must be positive and even");
  Require(hop > 0 && hop <= frame_len, ErrorCode::kInvalidArgument,
          "stft: need 0 < hop <= frame_len");
}

std::size_t StftParams::NumFrames(std::size_t num_samples) const {
  const auto len = static_cast<std::size_t>(frame_len);
  if (num_samples < len) return 0;
  return (num_samples - len) / static_cast<std::size_t>(hop) + 1;
}

std::size_t StftParams::SynthesisLength(std::size_t num_frames) const {
  if (num_frames == 0) return 0;
  return (num_frames - 1) * static_cast<std::size_t>(hop) +
         static_cast<std::size_t>(frame_len);
}

std::vector<double> HannWindow(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  return w;
}

ComplexSpectrogram Stft(const AudioClip& clip, const StftParams& params) {
  params.Validate();
  const std::size_t frames = params.NumFrames(clip.samples.size());
  Require(frames > 0, ErrorCode::kInvalidArgument,
          "stft: clip of " + std::to_string(clip.samples.size()) +
              " samples is shorter than one frame");
  const auto window = HannWindow(params.frame_len);
  const auto bins = params.num_bins();

  ComplexSpectrogram spec;
  spec.params = params;
  spec.sample_rate = clip.sample_rate;
  spec.magnitude.resize(bins, static_cast<Eigen::Index>(frames));
  spec.phase.resize(bins, static_cast<Eigen::Index>(frames));

  std::vector<double> frame(static_cast<std::size_t>(params.frame_len));
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * static_cast<std::size_t>(params.hop);
    for (std::size_t i = 0; i < frame.size(); ++i) {
      frame[i] = clip.samples[start + i] * window[i];
    }
    const auto bins_c = Rfft(frame);
    for (int k = 0; k < bins; ++k) {
      const auto col = static_cast<Eigen::Index>(t);
      spec.magnitude(k, col) = std::abs(bins_c[static_cast<std::size_t>(k)]);
      spec.phase(k, col) = std::arg(bins_c[static_cast<std::size_t>(k)]);
    }
  }
  return spec;
}

AudioClip Istft(const ComplexSpectrogram& spec) {
  spec.params.Validate();
  const int n = spec.params.frame_len;
  const int bins = spec.params.num_bins();
  Require(spec.magnitude.rows() == spec.phase.rows() &&
              spec.magnitude.cols() == spec.phase.cols(),
          ErrorCode::kShapeMismatch, "istft: magnitude/phase shape mismatch");
  Require(spec.magnitude.rows() == bins, ErrorCode::kShapeMismatch,
          "istft: expected " + std::to_string(bins) + " one-sided bins, got " +
              std::to_string(spec.magnitude.rows()));

  const auto frames = static_cast<std::size_t>(spec.magnitude.cols());
  const auto window = HannWindow(n);
  const Eigen::MatrixXd full_mag = MirrorNegativeFrequencies(spec.magnitude);

  AudioClip out;
  out.sample_rate = spec.sample_rate;
  out.samples.assign(spec.params.SynthesisLength(frames), 0.0);
  std::vector<double> norm(out.samples.size(), 0.0);

  std::vector<std::complex<double>> full(static_cast<std::size_t>(n));
  for (std::size_t t = 0; t < frames; ++t) {
    const auto col = static_cast<Eigen::Index>(t);
    for (int k = 0; k < n; ++k) {
      // Negative-frequency bins carry the conjugate phase of their mirror.
      const double ph = k < bins ? spec.phase(k, col) : -spec.phase(n - k, col);
      full[static_cast<std::size_t>(k)] = std::polar(full_mag(k, col), ph);
    }
    const auto frame = InverseDftReal(full);
    const std::size_t start = t * static_cast<std::size_t>(spec.params.hop);
    for (std::size_t i = 0; i < frame.size(); ++i) {
      out.samples[start + i] += frame[i] * window[i];
      norm[start + i] += window[i] * window[i];
    }
  }
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] = norm[i] > 1e-10 ? out.samples[i] / norm[i] : 0.0;
  }
  return out;
}

}  // namespace chroma_se::dsp
