// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chroma_se/audio.hpp"
#include "chroma_se/spectral.hpp"
#include "chroma_se/stft.hpp"

namespace chroma_se::metrics {

/// Short-time objective intelligibility of `processed` against `clean`.
/// Inputs are trimmed to the shorter length and resampled to 10 kHz;
/// frames more than 40 dB below the loudest clean frame are removed; 15
/// one-third-octave bands from 150 Hz; 30-frame (384 ms) envelope segments.
/// Throws kInvalidArgument when fewer than 30 frames survive, or fs < 10 kHz.
double Stoi(const dsp::AudioClip& clean, const dsp::AudioClip& processed);

/// Frame-averaged RMS distance between two LPS matrices of equal shape.
double LsdMetric(const dsp::LpsMatrix& reference, const dsp::LpsMatrix& estimate);

/// Reported in place of +infinity in tables.
inline constexpr double kSnrCapDb = 99.0;
inline constexpr double kSegSnrFloorDb = -10.0;
inline constexpr double kSegSnrCeilDb = 35.0;

/// 10 log10(sum ref^2 / sum (ref - est)^2), +infinity for est == ref.
/// Trims to the shorter length; throws on an all-zero reference.
double Snr(const dsp::AudioClip& reference, const dsp::AudioClip& estimate);
double CapSnr(double snr_db);

/// Mean over non-overlapping frames of the per-frame SNR clamped to
/// [-10, 35] dB. A frame with zero error counts as 35 dB, one with zero
/// reference energy and non-zero error as -10 dB. Trailing partial frame
/// ignored.
double SegSnr(const dsp::AudioClip& reference, const dsp::AudioClip& estimate, int frame = 256);

struct MetricReport {
  std::string clip_id;
  double stoi_raw = 0.0;
  double stoi = 0.0;  ///< clamped to [0, 1]
  double lsd = 0.0;
  double snr = 0.0;   ///< may be +infinity
  double seg_snr = 0.0;
  std::optional<double> pesq;
};

/// All metrics of one clip. LSD uses the full one-sided LPS of both signals.
MetricReport Evaluate(const std::string& clip_id, const dsp::AudioClip& clean,
                      const dsp::AudioClip& processed, const dsp::StftParams& params = {});

struct ExternalScores {
  std::map<std::string, double> pesq;
  std::vector<std::string> warnings;
};

inline constexpr double kPesqMin = -0.5;
inline constexpr double kPesqMax = 4.5;

/// CSV with header `clip_id,pesq`. Malformed or out-of-range rows make the
/// whole import fail with every offending line number listed. A repeated
/// clip_id keeps the last value and adds a warning.
ExternalScores ImportExternalScores(const std::filesystem::path& csv);
/// Attaches scores to matching reports; returns ids without a score.
std::vector<std::string> AttachPesq(std::span<MetricReport> reports, const ExternalScores& scores);

struct Aggregate {
  std::size_t clips = 0;
  double stoi = 0.0, lsd = 0.0, snr = 0.0, seg_snr = 0.0;
  std::optional<double> pesq;  ///< only when every clip has one
};
/// Means over clips, SNR capped first.
Aggregate Mean(std::span<const MetricReport> reports);

struct GainTable {
  std::size_t clips = 0;
  double d_stoi = 0.0, d_lsd = 0.0, d_snr = 0.0, d_seg_snr = 0.0;
  std::optional<double> d_pesq;
};

/// processed minus unprocessed means. Clip-id sets must match exactly.
GainTable GainReport(std::span<const MetricReport> unprocessed,
                     std::span<const MetricReport> processed);

void WriteReportsCsv(std::span<const MetricReport> reports, const std::filesystem::path& path);
std::string FormatAggregate(const std::string& label, const Aggregate& agg);
std::string FormatGainTable(const std::string& label, const GainTable& gain);

}  // namespace chroma_se::metrics
