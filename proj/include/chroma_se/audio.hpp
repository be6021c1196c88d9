// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace chroma_se::dsp {

/// Mono time-domain signal. Samples are nominally in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }

  /// Throws kInvalidArgument when the rate is not positive or any sample is
  /// NaN/Inf.
  void Validate() const;
};

/// Reads a RIFF/WAVE file. Accepts 16-bit integer PCM and 32-bit IEEE float
/// (including WAVE_FORMAT_EXTENSIBLE wrappers); keeps the first channel.
/// Errors: kNotFound (missing file), kMalformed (bad RIFF structure),
/// kUnsupported (other encodings).
AudioClip ReadWav(const std::filesystem::path& path);

struct WavWriteReport {
  std::size_t clipped = 0;  ///< samples with |x| > 1 that were hard-clipped
};

/// Writes 16-bit little-endian PCM. Samples are scaled by 32768 and clamped
/// to the int16 range. Empty clips are rejected before the file is opened.
WavWriteReport WriteWav(const AudioClip& clip,
                        const std::filesystem::path& path);

/// Quantizes samples exactly as WriteWav/ReadWav would (round to the 1/32768
/// grid, clamp to int16).
AudioClip QuantizeTo16Bit(const AudioClip& clip);

/// Band-limited rational resampling (polyphase, Kaiser-windowed sinc with
/// 60 dB stopband rejection). Output length is ceil(N * up / down); the
/// filter delay is compensated so the output is time-aligned with the input.
AudioClip Resample(const AudioClip& clip, int target_hz);

/// Lower-level form of Resample for raw sample vectors.
std::vector<double> ResamplePoly(std::span<const double> x, int up, int down);

AudioClip Concat(std::span<const AudioClip> clips);

enum class TailPolicy { kDrop, kZeroPad };

struct Segmentation {
  std::vector<AudioClip> segments;
  std::size_t remainder = 0;  ///< samples after the last full segment
};

/// 4.12 s at 16 kHz gives exactly 256 STFT frames with 512/256 framing.
inline constexpr std::size_t kDefaultSegmentLength = 65920;

/// Cuts the clip into floor(N/seg_len) non-overlapping segments. With
/// kZeroPad a non-empty remainder becomes one extra zero-padded segment.
Segmentation Segment(const AudioClip& clip,
                     std::size_t seg_len = kDefaultSegmentLength,
                     TailPolicy policy = TailPolicy::kDrop);

}  // namespace chroma_se::dsp
