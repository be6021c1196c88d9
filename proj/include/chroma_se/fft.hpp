// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <span>
#include <vector>

namespace chroma_se::dsp {

/// One-sided DFT of a real frame: n/2 + 1 bins, unnormalized.
std::vector<std::complex<double>> Rfft(std::span<const double> frame);

/// Full-length inverse DFT of a complex spectrum, scaled by 1/n; returns the
/// real part. The caller supplies all n bins (Hermitian for real signals).
std::vector<double> InverseDftReal(std::span<const std::complex<double>> spectrum);

/// Full-length forward DFT of a real frame (all n bins).
std::vector<std::complex<double>> FullDft(std::span<const double> frame);

}  // namespace chroma_se::dsp
