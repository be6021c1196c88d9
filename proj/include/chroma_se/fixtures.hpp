// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "chroma_se/audio.hpp"

namespace chroma_se::fixtures {

/// Speech-like test signal: voiced syllables (glottal pulse train through
/// three formant resonators, drifting pitch), fricative noise bursts, pauses
/// between words, and a -60 dB background floor. Peak about 0.5.
dsp::AudioClip SyntheticSpeech(double seconds, int sample_rate, std::uint64_t seed);

dsp::AudioClip Tone(double freq_hz, double seconds, int sample_rate, double amplitude = 0.5);

enum class NoiseKind {
  kWhite,
  kBrown,     ///< integrated white noise, low-frequency heavy
  kBabble,    ///< sum of several unrelated synthetic talkers
  kHum,       ///< 50 Hz harmonics plus a little white noise
};

NoiseKind ParseNoiseKind(const std::string& name);

dsp::AudioClip Noise(NoiseKind kind, double seconds, int sample_rate, std::uint64_t seed);

/// clean + g * noise with g chosen so 10 log10(E_clean / E_scaled_noise)
/// equals snr_db. Noise is tiled or truncated to the clean length.
dsp::AudioClip MixAtSnr(const dsp::AudioClip& clean, const dsp::AudioClip& noise, double snr_db);

struct CorpusSpec {
  int files_per_split_train = 2;
  int files_per_split_test = 1;
  double seconds_per_file = 10.0;
  int sample_rate = 16000;
  std::vector<NoiseKind> noises = {NoiseKind::kWhite, NoiseKind::kBabble, NoiseKind::kBrown};
  std::vector<double> snrs_db = {0.0, 5.0, 10.0};
  std::uint64_t seed = 1;
};

/// Writes <dir>/{train,test}/{clean,noisy}/pNNN_MMM.wav (matching names).
void WriteCorpus(const std::filesystem::path& dir, const CorpusSpec& spec);

}  // namespace chroma_se::fixtures
