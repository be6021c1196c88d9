// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "chroma_se/fixtures.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "chroma_se/error.hpp"
#include "chroma_se/random.hpp"

namespace chroma_se::fixtures {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Two-pole resonator with unit gain at its centre frequency.
class Resonator {
 public:
  Resonator(double freq, double bandwidth, int rate) { Set(freq, bandwidth, rate); }
  void Set(double freq, double bandwidth, int rate) {
    const double r = std::exp(-std::numbers::pi * bandwidth / rate);
    a1_ = 2.0 * r * std::cos(kTwoPi * freq / rate);
    a2_ = -r * r;
    gain_ = 1.0 - r;
  }
  double Step(double x) {
    const double y = gain_ * x + a1_ * y1_ + a2_ * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double a1_ = 0, a2_ = 0, gain_ = 1, y1_ = 0, y2_ = 0;
};

struct Vowel {
  double f1, f2, f3;
};
constexpr std::array<Vowel, 6> kVowels = {{
    {730, 1090, 2440}, {270, 2290, 3010}, {300, 870, 2240},
    {530, 1840, 2480}, {570, 840, 2410},  {660, 1720, 2410},
}};

double Envelope(std::size_t i, std::size_t n, std::size_t ramp) {
  ramp = std::min(ramp, n / 2);
  if (ramp == 0) return 1.0;
  if (i < ramp) return 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / ramp);
  if (i >= n - ramp) return 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(n - 1 - i) / ramp);
  return 1.0;
}

void Normalize(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m > 0.0) {
    for (double& v : x) v *= peak / m;
  }
}

// Voiced syllable; pitch glides from f0a to f0b.
void AddVowel(std::vector<double>& out, std::size_t start, std::size_t len, const Vowel& v,
              double f0a, double f0b, double amp, int rate, Rng& rng) {
  Resonator r1(v.f1, 80, rate), r2(v.f2, 100, rate), r3(v.f3, 140, rate);
  double phase = 0.0;
  const std::size_t ramp = static_cast<std::size_t>(0.02 * rate);
  for (std::size_t i = 0; i < len && start + i < out.size(); ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(len);
    const double f0 = (f0a + (f0b - f0a) * t) * (1.0 + 0.01 * rng.Normal());
    phase += f0 / rate;
    double excitation = 0.0;
    if (phase >= 1.0) {
      phase -= 1.0;
      excitation = 1.0;
    }
    excitation += 0.02 * rng.Normal();
    const double y = 1.0 * r1.Step(excitation) + 0.6 * r2.Step(excitation) + 0.3 * r3.Step(excitation);
    out[start + i] += amp * Envelope(i, len, ramp) * y;
  }
}

void AddFricative(std::vector<double>& out, std::size_t start, std::size_t len, double centre,
                  double amp, int rate, Rng& rng) {
  Resonator r(std::min(centre, 0.45 * rate), 1500, rate);
  const std::size_t ramp = static_cast<std::size_t>(0.01 * rate);
  for (std::size_t i = 0; i < len && start + i < out.size(); ++i) {
    out[start + i] += amp * Envelope(i, len, ramp) * r.Step(rng.Normal());
  }
}

std::vector<double> SpeechSamples(std::size_t n, int rate, Rng& rng) {
  std::vector<double> x(n, 0.0);
  const double base_f0 = rng.Uniform(95.0, 210.0);
  std::size_t pos = static_cast<std::size_t>(rng.Uniform(0.05, 0.25) * rate);
  while (pos < n) {
    const int syllables = 1 + static_cast<int>(rng.Below(4));
    for (int s = 0; s < syllables && pos < n; ++s) {
      if (rng.Uniform() < 0.4) {
        const auto flen = static_cast<std::size_t>(rng.Uniform(0.04, 0.12) * rate);
        AddFricative(x, pos, flen, rng.Uniform(2500.0, 6000.0), rng.Uniform(0.05, 0.15), rate, rng);
        pos += flen;
      }
      const auto vlen = static_cast<std::size_t>(rng.Uniform(0.10, 0.28) * rate);
      const Vowel& v = kVowels[rng.Below(kVowels.size())];
      const double f0a = base_f0 * rng.Uniform(0.85, 1.2);
      const double f0b = base_f0 * rng.Uniform(0.8, 1.1);
      AddVowel(x, pos, vlen, v, f0a, f0b, rng.Uniform(0.5, 1.0), rate, rng);
      pos += vlen + static_cast<std::size_t>(rng.Uniform(0.0, 0.04) * rate);
    }
    pos += static_cast<std::size_t>(rng.Uniform(0.08, 0.4) * rate);
  }
  return x;
}

}  // namespace

dsp::AudioClip SyntheticSpeech(double seconds, int sample_rate, std::uint64_t seed) {
  Require(seconds > 0.0 && sample_rate > 0, ErrorCode::kInvalidArgument,
          "synthetic_speech: duration and rate must be positive");
  Rng rng(seed);
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  std::vector<double> x = SpeechSamples(n, sample_rate, rng);
  Normalize(x, 0.5);
  for (double& v : x) v += 0.0005 * rng.Normal();
  return {std::move(x), sample_rate};
}

dsp::AudioClip Tone(double freq_hz, double seconds, int sample_rate, double amplitude) {
  Require(seconds > 0.0 && sample_rate > 0, ErrorCode::kInvalidArgument,
          "tone: duration and rate must be positive");
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = amplitude * std::sin(kTwoPi * freq_hz * static_cast<double>(i) / sample_rate);
  }
  return {std::move(x), sample_rate};
}

NoiseKind ParseNoiseKind(const std::string& name) {
  if (name == "white") return NoiseKind::kWhite;
  if (name == "brown") return NoiseKind::kBrown;
  if (name == "babble") return NoiseKind::kBabble;
  if (name == "hum") return NoiseKind::kHum;
  Fail(ErrorCode::kNotFound, "unknown noise kind '" + name + "' (white, brown, babble, hum)");
}

dsp::AudioClip Noise(NoiseKind kind, double seconds, int sample_rate, std::uint64_t seed) {
  Require(seconds > 0.0 && sample_rate > 0, ErrorCode::kInvalidArgument,
          "noise: duration and rate must be positive");
  Rng rng(seed);
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  std::vector<double> x(n, 0.0);
  switch (kind) {
    case NoiseKind::kWhite:
      for (double& v : x) v = rng.Normal();
      break;
    case NoiseKind::kBrown: {
      double acc = 0.0;
      for (double& v : x) {
        acc = 0.995 * acc + rng.Normal();
        v = acc;
      }
      break;
    }
    case NoiseKind::kBabble:
      for (int talker = 0; talker < 6; ++talker) {
        Rng sub(MixSeed(seed, static_cast<std::uint64_t>(talker)));
        const std::vector<double> s = SpeechSamples(n, sample_rate, sub);
        for (std::size_t i = 0; i < n; ++i) x[i] += s[i];
      }
      break;
    case NoiseKind::kHum:
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        for (int h = 1; h <= 6; ++h) x[i] += std::sin(kTwoPi * 50.0 * h * t + h) / h;
        x[i] += 0.05 * rng.Normal();
      }
      break;
  }
  Normalize(x, 0.5);
  return {std::move(x), sample_rate};
}

dsp::AudioClip MixAtSnr(const dsp::AudioClip& clean, const dsp::AudioClip& noise, double snr_db) {
  Require(clean.sample_rate == noise.sample_rate, ErrorCode::kInvalidArgument,
          "mix: sample rates differ");
  Require(!noise.samples.empty(), ErrorCode::kInvalidArgument, "mix: empty noise");
  const std::size_t n = clean.size();
  std::vector<double> tiled(n);
  for (std::size_t i = 0; i < n; ++i) tiled[i] = noise.samples[i % noise.size()];
  double ec = 0.0, en = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ec += clean.samples[i] * clean.samples[i];
    en += tiled[i] * tiled[i];
  }
  Require(ec > 0.0 && en > 0.0, ErrorCode::kInvalidArgument, "mix: zero-energy input");
  const double g = std::sqrt(ec / (en * std::pow(10.0, snr_db / 10.0)));
  dsp::AudioClip out = clean;
  for (std::size_t i = 0; i < n; ++i) out.samples[i] += g * tiled[i];
  return out;
}

void WriteCorpus(const std::filesystem::path& dir, const CorpusSpec& spec) {
  Require(!spec.noises.empty() && !spec.snrs_db.empty(), ErrorCode::kInvalidArgument,
          "corpus: need at least one noise kind and one SNR");
  std::uint64_t counter = 0;
  for (const char* split : {"train", "test"}) {
    const int files = std::string(split) == "train" ? spec.files_per_split_train : spec.files_per_split_test;
    std::filesystem::create_directories(dir / split / "clean");
    std::filesystem::create_directories(dir / split / "noisy");
    for (int i = 0; i < files; ++i, ++counter) {
      const std::uint64_t seed = MixSeed(spec.seed, counter);
      dsp::AudioClip clean = SyntheticSpeech(spec.seconds_per_file, spec.sample_rate, seed);
      const NoiseKind kind = spec.noises[counter % spec.noises.size()];
      const double snr = spec.snrs_db[counter % spec.snrs_db.size()];
      const dsp::AudioClip noise = Noise(kind, spec.seconds_per_file, spec.sample_rate, seed ^ 0x5eedULL);
      dsp::AudioClip noisy = MixAtSnr(clean, noise, snr);
      // Keep the mixture inside full scale; the pair is scaled together.
      double peak = 0.0;
      for (double v : noisy.samples) peak = std::max(peak, std::abs(v));
      if (peak > 0.99) {
        for (double& v : noisy.samples) v *= 0.99 / peak;
        for (double& v : clean.samples) v *= 0.99 / peak;
      }
      char name[32];
      std::snprintf(name, sizeof name, "p%03d_%03d.wav", 200 + static_cast<int>(counter), i + 1);
      dsp::WriteWav(clean, dir / split / "clean" / name);
      dsp::WriteWav(noisy, dir / split / "noisy" / name);
    }
  }
}

}  // namespace chroma_se::fixtures
