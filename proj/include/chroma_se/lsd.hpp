// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstddef>

namespace chroma_se {

/// Log-spectral distance between two frames x bands arrays stored frame
/// after frame (band index fastest): mean over frames of the RMS difference
/// across bands. Both the training loss and the evaluation metric call this.
inline double LsdCore(const double* a, const double* b, std::size_t frames, std::size_t bands) {
  double total = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    const double* pa = a + t * bands;
    const double* pb = b + t * bands;
    double acc = 0.0;
    for (std::size_t f = 0; f < bands; ++f) {
      const double d = pa[f] - pb[f];
      acc += d * d;
    }
    total += std::sqrt(acc / static_cast<double>(bands));
  }
  return total / static_cast<double>(frames);
}

/// Epsilon inside the per-frame square root of the LSD gradient.
inline constexpr double kLsdGradEpsilon = 1e-12;

/// Adds scale * d LsdCore / d a into grad (same layout as a).
inline void LsdCoreGradient(const double* a, const double* b, std::size_t frames,
                            std::size_t bands, double scale, double* grad) {
  const double inv_bands = 1.0 / static_cast<double>(bands);
  const double inv_frames = 1.0 / static_cast<double>(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* pa = a + t * bands;
    const double* pb = b + t * bands;
    double acc = 0.0;
    for (std::size_t f = 0; f < bands; ++f) {
      const double d = pa[f] - pb[f];
      acc += d * d;
    }
    const double rms = std::sqrt(acc * inv_bands + kLsdGradEpsilon);
    const double k = scale * inv_frames * inv_bands / rms;
    double* pg = grad + t * bands;
    for (std::size_t f = 0; f < bands; ++f) pg[f] += k * (pa[f] - pb[f]);
  }
}

}  // namespace chroma_se
