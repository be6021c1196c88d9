// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chroma_se/audio.hpp"
#include "chroma_se/colormap.hpp"
#include "chroma_se/metrics.hpp"
#include "chroma_se/regnet.hpp"
#include "chroma_se/stft.hpp"
#include "chroma_se/trainer.hpp"
#include "chroma_se/unet.hpp"

namespace chroma_se::pipeline {

/// 64-bit FNV-1a of the file contents, as 16 hex digits.
std::string HashFile(const std::filesystem::path& path);

struct SegmentEntry {
  std::string id;     ///< e.g. seg_00003
  std::string split;  ///< train | test
  std::string clean;  ///< paths relative to the manifest directory
  std::string noisy;
};

/// Experiment state shared by all commands. Stored as JSON next to the
/// artifacts; every save bumps `revision` and appends to `history`.
struct ExperimentManifest {
  std::filesystem::path root;  ///< directory holding manifest.json (not stored)
  int revision = 0;
  std::vector<std::string> history;
  std::string corpus_dir;
  int sample_rate = 16000;
  std::size_t segment_length = dsp::kDefaultSegmentLength;
  dsp::StftParams stft;
  double log_floor = 1e-10;
  std::optional<codec::DisplayRange> range;
  std::string colormap = "parula";
  std::uint64_t seed = 0;
  std::map<std::string, std::size_t> remainders;  ///< split -> dropped tail samples
  std::vector<SegmentEntry> segments;
  std::map<std::string, std::string> inventory;  ///< relative path -> content hash
  std::map<std::string, std::string> artifacts;  ///< role -> relative path

  std::filesystem::path Path(const std::string& relative) const { return root / relative; }
  std::vector<SegmentEntry> Split(const std::string& split) const;
  /// Records the file's current hash.
  void Track(const std::string& relative);
  const codec::DisplayRange& RequireRange() const;
};

inline constexpr const char* kManifestName = "manifest.json";

void SaveManifest(ExperimentManifest& m, const std::string& event);
ExperimentManifest LoadManifest(const std::filesystem::path& path_or_dir);
/// Re-hashes every inventory entry; throws kState listing missing or
/// modified files.
void VerifyInventory(const ExperimentManifest& m);

enum class TailPolicy { kDrop, kZeroPad, kPassThrough };
TailPolicy ParseTailPolicy(const std::string& name);
const char* ToString(TailPolicy policy);

using Log = std::function<void(const std::string&)>;

struct PrepareOptions {
  int sample_rate = 16000;
  std::size_t segment_length = dsp::kDefaultSegmentLength;
  dsp::StftParams stft;
  TailPolicy tail = TailPolicy::kDrop;  ///< kDrop or kZeroPad
  std::string colormap = "parula";
  std::uint64_t seed = 0;
  double holdout = 0.2;  ///< test share when the corpus has no split folders
};

/// Accepted layouts under corpus_dir:
///   train/{clean,noisy} and test/{clean,noisy};
///   clean_train*/noisy_train* and clean_test*/noisy_test* folders;
///   a single clean/ and noisy/ pair, split by sorted file name.
/// Every clean file needs a noisy file of the same name and vice versa.
ExperimentManifest CmdPrepare(const std::filesystem::path& corpus_dir,
                              const std::filesystem::path& out_dir, const PrepareOptions& opt,
                              const Log& log = {});

std::string ImageDir(const std::string& colormap, const std::string& split, const std::string& kind);

/// Writes one 256 x 256 PNG per segment for clean and noisy audio, and the
/// noisy phase of each segment.
void CmdSpectrograms(ExperimentManifest& m, const std::string& colormap, const Log& log = {});

/// "gray*" selects the gray table with a single-input regnet.
struct ColormapChoice {
  std::string table;
  bool single_input = false;
  std::string label;
};
ColormapChoice ParseColormapChoice(const std::string& name);

struct RegnetCommandResult {
  regnet::RegnetModel model;
  regnet::RegnetReport report;
  std::size_t rows = 0;
};

/// Trains on the first n_images clean training segments encoded under the
/// colormap, with their true LPS values as targets.
RegnetCommandResult TrainRegnetOnSegments(const ExperimentManifest& m, const ColormapChoice& cmap,
                                          int n_images, const regnet::RegnetTrainConfig& cfg);

RegnetCommandResult CmdTrainRegnet(ExperimentManifest& m, const std::string& colormap, int n_images,
                                   const regnet::RegnetTrainConfig& cfg, const Log& log = {});

/// Everything needed to take one segment through the image-domain chain.
struct CodecContext {
  const codec::ColormapTable* table = nullptr;
  codec::DisplayRange range;
  const regnet::RegnetModel* regnet = nullptr;
  const unet::UNetModel* denoiser = nullptr;  ///< null: identity in place of the network
  dsp::StftParams stft;
};

/// STFT (keeping phase) -> LPS -> crop -> encode -> [standardize -> network
/// -> destandardize -> clamp] -> regnet decode -> restore Nyquist row ->
/// magnitude -> reconstruct with the segment's own phase. Samples whose
/// overlap-add window weight is below the interior minimum (the segment
/// edges) and samples no frame covers are copied from the input, so the
/// output has the input's length.
dsp::AudioClip EnhanceSegment(const dsp::AudioClip& segment, const CodecContext& ctx);

struct BenchOptions {
  int regnet_images = 2;
  regnet::RegnetTrainConfig regnet;
  int max_test_segments = 0;  ///< 0: all
};

struct BenchRow {
  std::string colormap;
  double stoi = 0.0;
  double lsd = 0.0;
  double snr = 0.0;
  std::optional<double> pesq;
  double regnet_test_mse = 0.0;
  int duplicates = 0;
};

/// Colormap selection without the denoiser: per colormap a regnet on clean
/// training pixels, then every clean test segment goes through
/// EnhanceSegment and is scored against itself.
std::vector<BenchRow> CmdColormapBench(const ExperimentManifest& m,
                                       const std::vector<std::string>& colormaps,
                                       const BenchOptions& opt, const Log& log = {});
void WriteBenchCsv(const std::vector<BenchRow>& rows, const std::filesystem::path& path);

struct DenoiserOptions {
  unet::UNetConfig config = unet::UNetConfig::Desk(256, 16);
  unet::TrainRunConfig run;
  std::uint64_t init_seed = 0;
  std::optional<std::filesystem::path> resume;
};

/// Pairs each standardized noisy training image with its clean image under
/// the noisy image's statistics; trains and writes checkpoint and loss CSV.
unet::TrainState CmdTrainDenoiser(ExperimentManifest& m, const std::string& colormap,
                                  const DenoiserOptions& opt, const Log& log = {});

struct EnhanceOptions {
  TailPolicy tail = TailPolicy::kPassThrough;  ///< kPassThrough or kDrop
  bool bypass_denoiser = false;
};

struct EnhanceResult {
  dsp::AudioClip audio;
  std::size_t segments = 0;
  std::size_t tail = 0;
};

EnhanceResult Enhance(const dsp::AudioClip& noisy, const ExperimentManifest& m,
                      const regnet::RegnetModel& reg, const unet::UNetModel* denoiser,
                      const std::string& colormap, const EnhanceOptions& opt);

EnhanceResult CmdEnhance(const std::filesystem::path& noisy_wav, const std::filesystem::path& regnet_file,
                         const std::optional<std::filesystem::path>& checkpoint,
                         const ExperimentManifest& m, const std::filesystem::path& out_wav,
                         const EnhanceOptions& opt, const Log& log = {});

struct EvaluateOptions {
  std::optional<std::filesystem::path> unprocessed_dir;
  std::optional<std::filesystem::path> external_pesq;
  bool concatenated = false;  ///< score the concatenation instead of per clip
};

struct EvaluateResult {
  std::vector<metrics::MetricReport> processed;
  std::vector<metrics::MetricReport> unprocessed;
  metrics::Aggregate processed_mean;
  std::optional<metrics::Aggregate> unprocessed_mean;
  std::optional<metrics::GainTable> gain;
  std::vector<std::string> warnings;
};

EvaluateResult CmdEvaluate(const std::filesystem::path& clean_dir,
                           const std::filesystem::path& processed_dir, const EvaluateOptions& opt,
                           const Log& log = {});

}  // namespace chroma_se::pipeline
