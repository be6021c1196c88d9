// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "chroma_se/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>

#include "chroma_se/error.hpp"

namespace chroma_se::dsp {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t LoadU16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t LoadU32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void StoreU16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void StoreU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::int16_t ToPcm16(double x) {
  const double scaled = std::round(x * 32768.0);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

}  // namespace

void AudioClip::Validate() const {
  Require(sample_rate > 0, ErrorCode::kInvalidArgument,
          "audio clip: sample_rate must be positive");
  for (double s : samples) {
    Require(std::isfinite(s), ErrorCode::kInvalidArgument,
            "audio clip: non-finite sample");
  }
}

AudioClip ReadWav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kNotFound, "wav: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = "wav: " + path.string() + ": ";
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    Fail(ErrorCode::kMalformed, where + "missing RIFF/WAVE header");
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = LoadU32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16 || body + len > bytes.size()) {
        Fail(ErrorCode::kMalformed, where + "truncated fmt chunk");
      }
      format = LoadU16(bytes.data() + body);
      channels = LoadU16(bytes.data() + body + 2);
      rate = LoadU32(bytes.data() + body + 4);
      bits = LoadU16(bytes.data() + body + 14);
      if (format == kFormatExtensible) {
        if (len < 40) Fail(ErrorCode::kMalformed, where + "short extensible fmt");
        format = LoadU16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      // Some writers leave the size field at 0 or 0xFFFFFFFF when streaming.
      data_len = std::min<std::size_t>(len, bytes.size() - body);
      break;
    }
    pos = body + len + (len & 1u);
  }
  if (!have_fmt) Fail(ErrorCode::kMalformed, where + "no fmt chunk");
  if (data == nullptr) Fail(ErrorCode::kMalformed, where + "no data chunk");
  if (channels == 0 || rate == 0) {
    Fail(ErrorCode::kMalformed, where + "zero channels or sample rate");
  }

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) {
    Fail(ErrorCode::kUnsupported,
         where + "unsupported encoding (format " + std::to_string(format) +
             ", " + std::to_string(bits) + " bits); need 16-bit PCM or 32-bit float");
  }

  const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
  const std::size_t n = data_len / frame_bytes;
  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* p = data + i * frame_bytes;
    if (pcm16) {
      clip.samples[i] = static_cast<std::int16_t>(LoadU16(p)) / 32768.0;
    } else {
      const std::uint32_t u = LoadU32(p);
      float f;
      std::memcpy(&f, &u, sizeof f);
      clip.samples[i] = f;
    }
  }
  return clip;
}

WavWriteReport WriteWav(const AudioClip& clip, const std::filesystem::path& path) {
  Require(!clip.samples.empty(), ErrorCode::kInvalidArgument,
          "wav: refusing to write an empty clip");
  clip.Validate();

  WavWriteReport report;
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  std::string out;
  out.reserve(44 + 2 * static_cast<std::size_t>(n));
  out += "RIFF";
  StoreU32(out, 36 + 2 * n);
  out += "WAVEfmt ";
  StoreU32(out, 16);
  StoreU16(out, kFormatPcm);
  StoreU16(out, 1);
  StoreU32(out, static_cast<std::uint32_t>(clip.sample_rate));
  StoreU32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  StoreU16(out, 2);
  StoreU16(out, 16);
  out += "data";
  StoreU32(out, 2 * n);
  for (double s : clip.samples) {
    if (std::abs(s) > 1.0) ++report.clipped;
    StoreU16(out, static_cast<std::uint16_t>(ToPcm16(s)));
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) Fail(ErrorCode::kIo, "wav: cannot write " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) Fail(ErrorCode::kIo, "wav: write failed for " + path.string());
  return report;
}

AudioClip QuantizeTo16Bit(const AudioClip& clip) {
  AudioClip out = clip;
  for (double& s : out.samples) s = ToPcm16(s) / 32768.0;
  return out;
}

namespace {

double KaiserWindow(std::size_t n, std::size_t length, double beta) {
  const double ratio = 2.0 * static_cast<double>(n) / static_cast<double>(length - 1) - 1.0;
  return std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - ratio * ratio))) /
         std::cyl_bessel_i(0.0, beta);
}

double Sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

// Kaiser-windowed ideal low-pass at the tighter of the two Nyquist limits,
// normalized to unit DC gain per polyphase branch.
std::vector<double> DesignAntiAliasFilter(int up, int down) {
  constexpr double kRejectionDb = 60.0;
  const double cutoff = 1.0 / (2.0 * std::max(up, down));
  const double roll_off = cutoff / 10.0;
  const auto half = static_cast<std::size_t>(
      std::ceil((kRejectionDb - 8.0) / (28.714 * roll_off)));
  const double beta = 0.1102 * (kRejectionDb - 8.7);

  const std::size_t len = 2 * half + 1;
  std::vector<double> h(len);
  for (std::size_t i = 0; i < len; ++i) {
    const double t = static_cast<double>(i) - static_cast<double>(half);
    h[i] = 2.0 * up * cutoff * Sinc(2.0 * cutoff * t) * KaiserWindow(i, len, beta);
  }
  const double sum = std::accumulate(h.begin(), h.end(), 0.0);
  for (double& v : h) v *= up / sum;
  return h;
}

}  // namespace

std::vector<double> ResamplePoly(std::span<const double> x, int up, int down) {
  Require(up > 0 && down > 0, ErrorCode::kInvalidArgument,
          "resample: factors must be positive");
  const int g = std::gcd(up, down);
  up /= g;
  down /= g;
  if (up == 1 && down == 1) return {x.begin(), x.end()};

  const std::vector<double> h = DesignAntiAliasFilter(up, down);
  const auto half = static_cast<long long>((h.size() - 1) / 2);
  const auto taps = static_cast<long long>(h.size());
  const auto n_in = static_cast<long long>(x.size());
  const long long n_out = (n_in * up + down - 1) / down;

  std::vector<double> y(static_cast<std::size_t>(n_out), 0.0);
  for (long long n = 0; n < n_out; ++n) {
    // Output n sits at position n*down on the upsampled grid; input k sits at
    // k*up. Tap index = half + n*down - k*up must lie in [0, taps).
    const long long centre = half + n * down;
    long long k_lo = centre - (taps - 1);
    k_lo = k_lo <= 0 ? 0 : (k_lo + up - 1) / up;
    const long long k_hi = std::min(n_in - 1, centre / up);
    double acc = 0.0;
    for (long long k = k_lo; k <= k_hi; ++k) {
      acc += x[static_cast<std::size_t>(k)] * h[static_cast<std::size_t>(centre - k * up)];
    }
    y[static_cast<std::size_t>(n)] = acc;
  }
  return y;
}

AudioClip Resample(const AudioClip& clip, int target_hz) {
  Require(target_hz > 0, ErrorCode::kInvalidArgument,
          "resample: target rate must be positive");
  Require(clip.sample_rate > 0, ErrorCode::kInvalidArgument,
          "resample: source rate must be positive");
  AudioClip out;
  out.sample_rate = target_hz;
  out.samples = ResamplePoly(clip.samples, target_hz, clip.sample_rate);
  return out;
}

AudioClip Concat(std::span<const AudioClip> clips) {
  Require(!clips.empty(), ErrorCode::kInvalidArgument, "concat: no clips");
  AudioClip out;
  out.sample_rate = clips.front().sample_rate;
  std::size_t total = 0;
  for (const auto& c : clips) {
    Require(c.sample_rate == out.sample_rate, ErrorCode::kInvalidArgument,
            "concat: mixed sample rates (" + std::to_string(out.sample_rate) +
                " vs " + std::to_string(c.sample_rate) + ")");
    total += c.samples.size();
  }
  out.samples.reserve(total);
  for (const auto& c : clips) {
    out.samples.insert(out.samples.end(), c.samples.begin(), c.samples.end());
  }
  return out;
}

Segmentation Segment(const AudioClip& clip, std::size_t seg_len, TailPolicy policy) {
  Require(seg_len > 0, ErrorCode::kInvalidArgument, "segment: seg_len must be > 0");
  Segmentation result;
  const std::size_t full = clip.samples.size() / seg_len;
  result.remainder = clip.samples.size() - full * seg_len;
  for (std::size_t s = 0; s < full; ++s) {
    AudioClip seg;
    seg.sample_rate = clip.sample_rate;
    const auto first = clip.samples.begin() + static_cast<std::ptrdiff_t>(s * seg_len);
    seg.samples.assign(first, first + static_cast<std::ptrdiff_t>(seg_len));
    result.segments.push_back(std::move(seg));
  }
  if (policy == TailPolicy::kZeroPad && result.remainder > 0) {
    AudioClip seg;
    seg.sample_rate = clip.sample_rate;
    seg.samples.assign(clip.samples.end() - static_cast<std::ptrdiff_t>(result.remainder),
                       clip.samples.end());
    seg.samples.resize(seg_len, 0.0);
    result.segments.push_back(std::move(seg));
  }
  return result;
}

}  // namespace chroma_se::dsp
