// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "chroma_se/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "chroma_se/error.hpp"
#include "chroma_se/image.hpp"
#include "chroma_se/spectral.hpp"

namespace chroma_se::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void Say(const Log& log, const std::string& msg) {
  if (log) log(msg);
}

std::string SegmentName(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "seg_%05zu", i);
  return buf;
}

std::vector<fs::path> ListWavs(const fs::path& dir) {
  std::vector<fs::path> out;
  Require(fs::is_directory(dir), ErrorCode::kNotFound, "not a directory: " + dir.string());
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Names present in one list but not the other, for both directions.
std::string UnpairedNames(const std::vector<fs::path>& a, const std::vector<fs::path>& b,
                          const std::string& a_label, const std::string& b_label) {
  std::set<std::string> na, nb;
  for (const auto& p : a) na.insert(p.filename().string());
  for (const auto& p : b) nb.insert(p.filename().string());
  std::string missing;
  for (const auto& n : na) {
    if (!nb.count(n)) missing += "\n  " + n + " is in " + a_label + " but not in " + b_label;
  }
  for (const auto& n : nb) {
    if (!na.count(n)) missing += "\n  " + n + " is in " + b_label + " but not in " + a_label;
  }
  return missing;
}

void RequireSameNames(const std::vector<fs::path>& a, const std::vector<fs::path>& b,
                      const std::string& a_label, const std::string& b_label) {
  const std::string missing = UnpairedNames(a, b, a_label, b_label);
  Require(missing.empty(), ErrorCode::kInvalidArgument, "unpaired files:" + missing);
}

struct SplitFiles {
  std::vector<fs::path> clean;
  std::vector<fs::path> noisy;
};

std::vector<fs::path> GatherWavs(const fs::path& root, const std::string& prefix) {
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && e.path().filename().string().rfind(prefix, 0) == 0) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<fs::path> out;
  for (const auto& d : dirs) {
    auto w = ListWavs(d);
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

std::map<std::string, SplitFiles> DiscoverCorpus(const fs::path& root, double holdout, std::string* layout) {
  Require(fs::is_directory(root), ErrorCode::kNotFound, "corpus directory not found: " + root.string());
  std::map<std::string, SplitFiles> splits;
  if (fs::is_directory(root / "train" / "clean")) {
    *layout = "split folders";
    for (const char* s : {"train", "test"}) {
      if (!fs::is_directory(root / s / "clean") && !fs::is_directory(root / s / "noisy")) continue;
      splits[s] = {ListWavs(root / s / "clean"), ListWavs(root / s / "noisy")};
    }
  } else if (!GatherWavs(root, "clean_train").empty()) {
    *layout = "clean_/noisy_ folders";
    for (const char* s : {"train", "test"}) {
      splits[s] = {GatherWavs(root, std::string("clean_") + s), GatherWavs(root, std::string("noisy_") + s)};
    }
  } else if (fs::is_directory(root / "clean") && fs::is_directory(root / "noisy")) {
    *layout = "single clean/noisy pair";
    auto clean = ListWavs(root / "clean");
    auto noisy = ListWavs(root / "noisy");
    RequireSameNames(clean, noisy, "clean", "noisy");
    const std::size_t n = clean.size();
    std::size_t n_test = 0;
    if (n >= 2 && holdout > 0.0) {
      n_test = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(holdout * n)), 1, n - 1);
    }
    const auto cut = static_cast<std::ptrdiff_t>(n - n_test);
    splits["train"] = {{clean.begin(), clean.begin() + cut}, {noisy.begin(), noisy.begin() + cut}};
    splits["test"] = {{clean.begin() + cut, clean.end()}, {noisy.begin() + cut, noisy.end()}};
  } else {
    Fail(ErrorCode::kNotFound,
         "no corpus layout found under " + root.string() +
             " (expected train/{clean,noisy}, clean_train*/noisy_train* folders, or clean/ + noisy/)");
  }
  std::string missing;
  for (auto& [name, files] : splits) {
    missing += UnpairedNames(files.clean, files.noisy, name + " clean", name + " noisy");
  }
  Require(missing.empty(), ErrorCode::kInvalidArgument, "unpaired files:" + missing);
  Require(splits.count("train") && !splits["train"].clean.empty(), ErrorCode::kInvalidArgument,
          "corpus has no training files: " + root.string());
  return splits;
}

dsp::AudioClip ReadAt(const fs::path& path, int rate) {
  dsp::AudioClip clip = dsp::ReadWav(path);
  if (clip.sample_rate != rate) clip = dsp::Resample(clip, rate);
  return clip;
}

dsp::LpsMatrix CroppedLps(const dsp::AudioClip& clip, const dsp::StftParams& stft) {
  return dsp::CropNyquistRow(dsp::LpsFromSpectrogram(dsp::Stft(clip, stft)));
}

std::string RegnetFile(const ColormapChoice& c) {
  return "models/regnet_" + (c.single_input ? c.table + "_single" : c.table) + ".txt";
}

void WritePhase(const Eigen::MatrixXd& phase, const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  Require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out.write("CSEPHASE", 8);
  const std::uint32_t dims[2] = {static_cast<std::uint32_t>(phase.rows()),
                                 static_cast<std::uint32_t>(phase.cols())};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  out.write(reinterpret_cast<const char*>(phase.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(phase.size())));
  Require(static_cast<bool>(out), ErrorCode::kIo, "short write: " + path.string());
}

json RangeJson(const std::optional<codec::DisplayRange>& r) {
  if (!r) return nullptr;
  return {{"lo", r->lo}, {"hi", r->hi}};
}

}  // namespace

std::string HashFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorCode::kIo, "cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = static_cast<std::size_t>(in.gcount());
    for (std::size_t i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

std::vector<SegmentEntry> ExperimentManifest::Split(const std::string& split) const {
  std::vector<SegmentEntry> out;
  for (const auto& s : segments) {
    if (s.split == split) out.push_back(s);
  }
  return out;
}

void ExperimentManifest::Track(const std::string& relative) { inventory[relative] = HashFile(Path(relative)); }

const codec::DisplayRange& ExperimentManifest::RequireRange() const {
  Require(range.has_value(), ErrorCode::kState, "manifest has no display range; run prepare first");
  return *range;
}

void SaveManifest(ExperimentManifest& m, const std::string& event) {
  m.revision += 1;
  m.history.push_back(std::to_string(m.revision) + ": " + event);
  json j;
  j["format"] = "chroma-se-manifest";
  j["version"] = 1;
  j["revision"] = m.revision;
  j["history"] = m.history;
  j["corpus_dir"] = m.corpus_dir;
  j["sample_rate"] = m.sample_rate;
  j["segment_length"] = m.segment_length;
  j["stft"] = {{"frame_len", m.stft.frame_len}, {"hop", m.stft.hop}, {"window", "hann"}};
  j["log_floor"] = m.log_floor;
  j["display_range"] = RangeJson(m.range);
  j["colormap"] = m.colormap;
  j["seed"] = m.seed;
  j["remainders"] = m.remainders;
  json segs = json::array();
  for (const auto& s : m.segments) {
    segs.push_back({{"id", s.id}, {"split", s.split}, {"clean", s.clean}, {"noisy", s.noisy}});
  }
  j["segments"] = segs;
  j["inventory"] = m.inventory;
  j["artifacts"] = m.artifacts;
  fs::create_directories(m.root);
  const fs::path path = m.root / kManifestName;
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    Require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + tmp.string());
    out << j.dump(2) << "\n";
    Require(static_cast<bool>(out), ErrorCode::kIo, "short write: " + tmp.string());
  }
  fs::rename(tmp, path);
}

ExperimentManifest LoadManifest(const fs::path& path_or_dir) {
  const fs::path path = fs::is_directory(path_or_dir) ? path_or_dir / kManifestName : path_or_dir;
  std::ifstream in(path);
  Require(static_cast<bool>(in), ErrorCode::kNotFound, "manifest not found: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    Fail(ErrorCode::kMalformed, "manifest " + path.string() + ": " + e.what());
  }
  ExperimentManifest m;
  m.root = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  try {
    Require(j.value("format", "") == "chroma-se-manifest", ErrorCode::kMalformed,
            "not a chroma-se manifest: " + path.string());
    Require(j.at("version").get<int>() == 1, ErrorCode::kVersionMismatch,
            "unsupported manifest version in " + path.string());
    m.revision = j.at("revision").get<int>();
    m.history = j.at("history").get<std::vector<std::string>>();
    m.corpus_dir = j.at("corpus_dir").get<std::string>();
    m.sample_rate = j.at("sample_rate").get<int>();
    m.segment_length = j.at("segment_length").get<std::size_t>();
    m.stft.frame_len = j.at("stft").at("frame_len").get<int>();
    m.stft.hop = j.at("stft").at("hop").get<int>();
    m.log_floor = j.at("log_floor").get<double>();
    if (!j.at("display_range").is_null()) {
      m.range = codec::DisplayRange{j["display_range"].at("lo").get<double>(),
                                    j["display_range"].at("hi").get<double>()};
    }
    m.colormap = j.at("colormap").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.remainders = j.at("remainders").get<std::map<std::string, std::size_t>>();
    for (const auto& s : j.at("segments")) {
      m.segments.push_back({s.at("id").get<std::string>(), s.at("split").get<std::string>(),
                            s.at("clean").get<std::string>(), s.at("noisy").get<std::string>()});
    }
    m.inventory = j.at("inventory").get<std::map<std::string, std::string>>();
    m.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    Fail(ErrorCode::kMalformed, "manifest " + path.string() + ": " + e.what());
  }
  return m;
}

void VerifyInventory(const ExperimentManifest& m) {
  std::string problems;
  for (const auto& [rel, hash] : m.inventory) {
    const fs::path p = m.Path(rel);
    if (!fs::exists(p)) {
      problems += "\n  missing: " + rel;
    } else if (HashFile(p) != hash) {
      problems += "\n  modified: " + rel;
    }
  }
  Require(problems.empty(), ErrorCode::kState, "manifest inventory out of date:" + problems);
}

TailPolicy ParseTailPolicy(const std::string& name) {
  if (name == "drop") return TailPolicy::kDrop;
  if (name == "zero-pad" || name == "zeropad" || name == "pad") return TailPolicy::kZeroPad;
  if (name == "pass-through" || name == "passthrough") return TailPolicy::kPassThrough;
  Fail(ErrorCode::kInvalidArgument, "unknown tail policy '" + name + "' (drop, zero-pad, pass-through)");
}

const char* ToString(TailPolicy policy) {
  switch (policy) {
    case TailPolicy::kDrop: return "drop";
    case TailPolicy::kZeroPad: return "zero-pad";
    case TailPolicy::kPassThrough: return "pass-through";
  }
  return "?";
}

ExperimentManifest CmdPrepare(const fs::path& corpus_dir, const fs::path& out_dir, const PrepareOptions& opt,
                              const Log& log) {
  opt.stft.Validate();
  Require(opt.sample_rate > 0, ErrorCode::kInvalidArgument, "prepare: sample rate must be positive");
  Require(opt.segment_length >= static_cast<std::size_t>(opt.stft.frame_len), ErrorCode::kInvalidArgument,
          "prepare: segment shorter than one frame");
  Require(opt.tail != TailPolicy::kPassThrough, ErrorCode::kInvalidArgument,
          "prepare: tail policy must be drop or zero-pad");
  Require(opt.holdout >= 0.0 && opt.holdout < 1.0, ErrorCode::kInvalidArgument,
          "prepare: holdout must be in [0, 1)");
  codec::Colormap(opt.colormap);

  std::string layout;
  auto splits = DiscoverCorpus(corpus_dir, opt.holdout, &layout);
  Say(log, "corpus layout: " + layout);

  ExperimentManifest m;
  if (fs::exists(out_dir / kManifestName)) {
    const ExperimentManifest old = LoadManifest(out_dir);
    m.revision = old.revision;
    m.history = old.history;
  }
  m.root = out_dir;
  m.corpus_dir = fs::absolute(corpus_dir).lexically_normal().string();
  m.sample_rate = opt.sample_rate;
  m.segment_length = opt.segment_length;
  m.stft = opt.stft;
  m.log_floor = dsp::kLogFloor;
  m.colormap = codec::Colormap(opt.colormap).name;
  m.seed = opt.seed;
  fs::remove_all(out_dir / "segments");

  std::vector<double> range_values;
  const auto policy = opt.tail == TailPolicy::kZeroPad ? dsp::TailPolicy::kZeroPad : dsp::TailPolicy::kDrop;
  for (auto& [split, files] : splits) {
    std::vector<dsp::AudioClip> clean, noisy;
    for (std::size_t i = 0; i < files.clean.size(); ++i) {
      dsp::AudioClip c = ReadAt(files.clean[i], opt.sample_rate);
      dsp::AudioClip n = ReadAt(files.noisy[i], opt.sample_rate);
      if (c.size() != n.size()) {
        Say(log, "warning: " + files.clean[i].filename().string() + " clean/noisy lengths differ (" +
                     std::to_string(c.size()) + " vs " + std::to_string(n.size()) + "), trimming");
        const std::size_t len = std::min(c.size(), n.size());
        c.samples.resize(len);
        n.samples.resize(len);
      }
      clean.push_back(std::move(c));
      noisy.push_back(std::move(n));
    }
    if (clean.empty()) {
      m.remainders[split] = 0;
      continue;
    }
    const dsp::AudioClip all_clean = dsp::Concat(clean);
    const dsp::AudioClip all_noisy = dsp::Concat(noisy);
    const auto seg_c = dsp::Segment(all_clean, opt.segment_length, policy);
    const auto seg_n = dsp::Segment(all_noisy, opt.segment_length, policy);
    m.remainders[split] = policy == dsp::TailPolicy::kDrop ? seg_c.remainder : 0;
    if (split == "train") {
      Require(!seg_c.segments.empty(), ErrorCode::kInvalidArgument,
              "training audio (" + std::to_string(all_clean.size()) + " samples) is shorter than one segment of " +
                  std::to_string(opt.segment_length) + " samples");
    }
    for (std::size_t s = 0; s < seg_c.segments.size(); ++s) {
      SegmentEntry e;
      e.id = SegmentName(s);
      e.split = split;
      e.clean = "segments/" + split + "/clean/" + e.id + ".wav";
      e.noisy = "segments/" + split + "/noisy/" + e.id + ".wav";
      fs::create_directories(m.Path(e.clean).parent_path());
      fs::create_directories(m.Path(e.noisy).parent_path());
      dsp::WriteWav(seg_c.segments[s], m.Path(e.clean));
      dsp::WriteWav(seg_n.segments[s], m.Path(e.noisy));
      m.Track(e.clean);
      m.Track(e.noisy);
      if (split == "train") {
        const dsp::LpsMatrix lps = CroppedLps(dsp::QuantizeTo16Bit(seg_c.segments[s]), m.stft);
        range_values.insert(range_values.end(), lps.values.data(), lps.values.data() + lps.values.size());
      }
      m.segments.push_back(std::move(e));
    }
    Say(log, split + ": " + std::to_string(files.clean.size()) + " files, " + std::to_string(seg_c.segments.size()) +
                 " segments, " + std::to_string(m.remainders[split]) + " tail samples dropped");
  }
  m.range = codec::RangeFromPercentiles(range_values, 0.1, 99.9, std::log(m.log_floor));
  char buf[96];
  std::snprintf(buf, sizeof buf, "display range [%.4f, %.4f]", m.range->lo, m.range->hi);
  Say(log, buf);
  SaveManifest(m, "prepare " + m.corpus_dir);
  return m;
}

std::string ImageDir(const std::string& colormap, const std::string& split, const std::string& kind) {
  return "images/" + colormap + "/" + split + "/" + kind;
}

void CmdSpectrograms(ExperimentManifest& m, const std::string& colormap, const Log& log) {
  const codec::ColormapTable& table = codec::Colormap(colormap);
  const codec::DisplayRange& range = m.RequireRange();
  VerifyInventory(m);
  std::size_t written = 0;
  for (const auto& s : m.segments) {
    for (const char* kind : {"clean", "noisy"}) {
      const std::string wav = std::string(kind) == "clean" ? s.clean : s.noisy;
      const dsp::AudioClip clip = dsp::ReadWav(m.Path(wav));
      const dsp::ComplexSpectrogram spec = dsp::Stft(clip, m.stft);
      const dsp::LpsMatrix lps = dsp::CropNyquistRow(dsp::LpsFromSpectrogram(spec));
      Require(lps.num_bands() == codec::kImageSize && lps.num_frames() == codec::kImageSize,
              ErrorCode::kShapeMismatch, "segment " + wav + " does not give a 256 x 256 spectrogram");
      const std::string rel = ImageDir(table.name, s.split, kind) + "/" + s.id + ".png";
      fs::create_directories(m.Path(rel).parent_path());
      codec::SaveImage(codec::EncodeLps(lps, table, range), m.Path(rel));
      m.Track(rel);
      if (std::string(kind) == "noisy") {
        const std::string prel = "phase/" + s.split + "/" + s.id + ".bin";
        WritePhase(spec.phase, m.Path(prel));
        m.Track(prel);
      }
      ++written;
    }
  }
  m.colormap = table.name;
  m.artifacts["images/" + table.name] = "images/" + table.name;
  Say(log, std::to_string(written) + " images written under images/" + table.name);
  SaveManifest(m, "spectrograms " + table.name);
}

ColormapChoice ParseColormapChoice(const std::string& name) {
  ColormapChoice c;
  std::string base = name;
  if (!base.empty() && base.back() == '*') {
    base.pop_back();
    c.single_input = true;
  }
  c.table = codec::Colormap(base).name;
  Require(!c.single_input || c.table == "gray", ErrorCode::kInvalidArgument,
          "single-input regnet only exists for gray ('gray*'), got '" + name + "'");
  c.label = c.single_input ? c.table + "*" : c.table;
  return c;
}

RegnetCommandResult TrainRegnetOnSegments(const ExperimentManifest& m, const ColormapChoice& cmap, int n_images,
                                          const regnet::RegnetTrainConfig& cfg) {
  Require(n_images > 0, ErrorCode::kInvalidArgument, "train-regnet: need at least one image");
  const auto train = m.Split("train");
  Require(static_cast<std::size_t>(n_images) <= train.size(), ErrorCode::kInvalidArgument,
          "train-regnet: asked for " + std::to_string(n_images) + " images but only " +
              std::to_string(train.size()) + " training segments exist");
  const codec::ColormapTable& table = codec::Colormap(cmap.table);
  const codec::DisplayRange& range = m.RequireRange();
  std::vector<std::pair<codec::ColorImage, dsp::LpsMatrix>> pairs;
  for (int i = 0; i < n_images; ++i) {
    const auto& s = train[static_cast<std::size_t>(i)];
    const dsp::LpsMatrix lps = CroppedLps(dsp::ReadWav(m.Path(s.clean)), m.stft);
    const std::string png = ImageDir(table.name, "train", "clean") + "/" + s.id + ".png";
    codec::ColorImage img = fs::exists(m.Path(png)) ? codec::LoadImage(m.Path(png), true)
                                                     : codec::EncodeLps(lps, table, range);
    Require(img.colormap.empty() || img.colormap == table.name, ErrorCode::kState,
            png + " was encoded with " + img.colormap + ", not " + table.name);
    pairs.emplace_back(std::move(img), lps);
  }
  const codec::PixelDataset data = codec::BuildPixelDataset(pairs);
  regnet::RegnetModel init =
      regnet::RegnetInit(cfg.seed, cmap.single_input ? regnet::kGraySizes : regnet::kDefaultSizes);
  init.colormap = cmap.label;
  regnet::RegnetTrainResult r = regnet::Train(std::move(init), data, cfg);
  r.model.colormap = cmap.label;
  return {std::move(r.model), std::move(r.report), static_cast<std::size_t>(data.size())};
}

RegnetCommandResult CmdTrainRegnet(ExperimentManifest& m, const std::string& colormap, int n_images,
                                   const regnet::RegnetTrainConfig& cfg, const Log& log) {
  const ColormapChoice cmap = ParseColormapChoice(colormap);
  VerifyInventory(m);
  RegnetCommandResult r = TrainRegnetOnSegments(m, cmap, n_images, cfg);
  const std::string rel = RegnetFile(cmap);
  fs::create_directories(m.Path(rel).parent_path());
  regnet::Save(r.model, m.Path(rel));
  m.Track(rel);
  const std::string report_rel = rel.substr(0, rel.size() - 4) + "_report.json";
  json rep;
  rep["colormap"] = cmap.label;
  rep["rows"] = r.rows;
  rep["train_rows"] = r.report.train_rows;
  rep["test_rows"] = r.report.test_rows;
  rep["train_mse"] = r.report.train_mse;
  rep["test_mse"] = r.report.test_mse;
  rep["train_curve"] = r.report.train_curve;
  rep["test_curve"] = r.report.test_curve;
  rep["optimizer"] = r.report.optimizer;
  rep["epochs"] = cfg.epochs;
  rep["seed"] = cfg.seed;
  {
    std::ofstream out(m.Path(report_rel));
    Require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + report_rel);
    out << rep.dump(2) << "\n";
  }
  m.Track(report_rel);
  m.artifacts["regnet/" + cmap.label] = rel;
  char buf[160];
  std::snprintf(buf, sizeof buf, "regnet %s: %zu rows, train MSE %.5f, test MSE %.5f", cmap.label.c_str(), r.rows,
                r.report.train_mse, r.report.test_mse);
  Say(log, buf);
  SaveManifest(m, "train-regnet " + cmap.label);
  return r;
}

dsp::AudioClip EnhanceSegment(const dsp::AudioClip& segment, const CodecContext& ctx) {
  Require(ctx.table && ctx.regnet, ErrorCode::kInvalidArgument, "enhance: colormap and regnet are required");
  const dsp::ComplexSpectrogram spec = dsp::Stft(segment, ctx.stft);
  const dsp::LpsMatrix lps = dsp::CropNyquistRow(dsp::LpsFromSpectrogram(spec));
  codec::ColorImage img = codec::EncodeLps(lps, *ctx.table, ctx.range);
  if (ctx.denoiser) {
    const codec::StandardizedImage st = codec::Standardize(img);
    const Tensor out = unet::Forward(*ctx.denoiser, st.field, unet::Mode::kEval, 0, nullptr);
    img = codec::Destandardize(out, st.stats, ctx.table->name, ctx.range);
    for (double& v : img.rgb) v = std::clamp(v, 0.0, 1.0);
  }
  dsp::LpsMatrix est = regnet::Decode(*ctx.regnet, img);
  est.bin_hz = lps.bin_hz;
  est.frame_s = lps.frame_s;
  const Eigen::MatrixXd mag = dsp::MagnitudeFromLps(dsp::RestoreNyquistRow(est));
  const dsp::AudioClip y = dsp::Reconstruct(mag, spec.phase, ctx.stft, segment.sample_rate);
  // Overlap-add weight per sample; near the segment edges only one tapered
  // frame contributes and dividing by it would amplify magnitude errors.
  const std::vector<double> w = dsp::HannWindow(ctx.stft.frame_len);
  std::vector<double> weight(y.size(), 0.0);
  for (std::size_t start = 0; start + w.size() <= y.size(); start += static_cast<std::size_t>(ctx.stft.hop)) {
    for (std::size_t i = 0; i < w.size(); ++i) weight[start + i] += w[i] * w[i];
  }
  double interior = 0.0;
  bool seen = false;
  for (std::size_t i = w.size(); i + w.size() < y.size(); ++i) {
    interior = seen ? std::min(interior, weight[i]) : weight[i];
    seen = true;
  }
  dsp::AudioClip out = segment;
  for (std::size_t i = 0; i < std::min(y.size(), out.size()); ++i) {
    if (!seen || weight[i] >= interior - 1e-12) out.samples[i] = y.samples[i];
  }
  return out;
}

std::vector<BenchRow> CmdColormapBench(const ExperimentManifest& m, const std::vector<std::string>& colormaps,
                                       const BenchOptions& opt, const Log& log) {
  Require(!colormaps.empty(), ErrorCode::kInvalidArgument, "colormap-bench: no colormaps given");
  auto test = m.Split("test");
  Require(!test.empty(), ErrorCode::kInvalidArgument, "colormap-bench: manifest has no test segments");
  if (opt.max_test_segments > 0 && test.size() > static_cast<std::size_t>(opt.max_test_segments)) {
    test.resize(static_cast<std::size_t>(opt.max_test_segments));
  }
  std::vector<dsp::AudioClip> clean;
  for (const auto& s : test) clean.push_back(dsp::ReadWav(m.Path(s.clean)));
  std::vector<BenchRow> rows;
  for (const auto& name : colormaps) {
    const ColormapChoice cmap = ParseColormapChoice(name);
    const RegnetCommandResult reg = TrainRegnetOnSegments(m, cmap, opt.regnet_images, opt.regnet);
    CodecContext ctx{&codec::Colormap(cmap.table), m.RequireRange(), &reg.model, nullptr, m.stft};
    BenchRow row;
    row.colormap = cmap.label;
    row.regnet_test_mse = reg.report.test_mse;
    row.duplicates = codec::DuplicateEntries(*ctx.table);
    for (const auto& c : clean) {
      const dsp::AudioClip out = EnhanceSegment(c, ctx);
      row.stoi += std::clamp(metrics::Stoi(c, out), 0.0, 1.0);
      row.lsd += metrics::LsdMetric(dsp::LpsFromSpectrogram(dsp::Stft(c, m.stft)),
                                    dsp::LpsFromSpectrogram(dsp::Stft(out, m.stft)));
      row.snr += metrics::CapSnr(metrics::Snr(c, out));
    }
    const double n = static_cast<double>(clean.size());
    row.stoi /= n;
    row.lsd /= n;
    row.snr /= n;
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-10s STOI %.4f  LSD %.4f  SNR %.2f dB  regnet MSE %.4f  duplicates %d",
                  row.colormap.c_str(), row.stoi, row.lsd, row.snr, row.regnet_test_mse, row.duplicates);
    Say(log, buf);
    rows.push_back(row);
  }
  return rows;
}

void WriteBenchCsv(const std::vector<BenchRow>& rows, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  Require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << "colormap,stoi,lsd,snr_db,pesq,regnet_test_mse,duplicates\n";
  char buf[256];
  for (const auto& r : rows) {
    std::string pesq = r.pesq ? std::to_string(*r.pesq) : "";
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.4f,%s,%.6f,%d\n", r.colormap.c_str(), r.stoi, r.lsd, r.snr,
                  pesq.c_str(), r.regnet_test_mse, r.duplicates);
    out << buf;
  }
}

unet::TrainState CmdTrainDenoiser(ExperimentManifest& m, const std::string& colormap, const DenoiserOptions& opt,
                                  const Log& log) {
  const codec::ColormapTable& table = codec::Colormap(colormap);
  opt.config.Validate();
  opt.run.Validate();
  Require(opt.config.input_time == codec::kImageSize && opt.config.input_freq == codec::kImageSize &&
              opt.config.in_channels == 3 && opt.config.out_channels == 3,
          ErrorCode::kInvalidArgument, "train-denoiser: network must map 3 x 256 x 256 to 3 x 256 x 256");
  VerifyInventory(m);
  const auto train = m.Split("train");
  Require(!train.empty(), ErrorCode::kInvalidArgument, "train-denoiser: no training segments");
  std::vector<unet::TrainingPair> data;
  std::size_t degenerate = 0;
  for (const auto& s : train) {
    const std::string nrel = ImageDir(table.name, "train", "noisy") + "/" + s.id + ".png";
    const std::string crel = ImageDir(table.name, "train", "clean") + "/" + s.id + ".png";
    Require(fs::exists(m.Path(nrel)) && fs::exists(m.Path(crel)), ErrorCode::kNotFound,
            "missing " + table.name + " images for " + s.id + "; run spectrograms --colormap " + table.name);
    const codec::ColorImage noisy = codec::LoadImage(m.Path(nrel), true);
    const codec::ColorImage clean = codec::LoadImage(m.Path(crel), true);
    const codec::StandardizedImage st = codec::Standardize(noisy);
    if (st.stats.any_degenerate()) ++degenerate;
    data.push_back({st.field, codec::ApplyStandardization(clean, st.stats)});
  }
  if (degenerate > 0) Say(log, "warning: " + std::to_string(degenerate) + " noisy images have a constant channel");

  unet::TrainRunConfig run = opt.run;
  if (run.checkpoint_interval > 0 && run.checkpoint_dir.empty()) {
    run.checkpoint_dir = m.Path("models/checkpoints_" + table.name);
  }
  unet::TrainState state;
  if (opt.resume) {
    state = unet::LoadCheckpoint(*opt.resume, opt.config);
    Require(state.colormap.empty() || state.colormap == table.name, ErrorCode::kState,
            "checkpoint was trained on " + state.colormap + " images, not " + table.name);
    state.optimizer.learning_rate = run.learning_rate;
    Say(log, "resuming at step " + std::to_string(state.step));
  } else {
    state = unet::InitTrainState(unet::Build(opt.config, opt.init_seed), run);
  }
  state.colormap = table.name;
  Say(log, "denoiser: " + std::to_string(unet::CountParams(state.model).total) + " parameters, " +
               std::to_string(data.size()) + " training pairs, steps " + std::to_string(state.step + 1) + ".." +
               std::to_string(run.steps));
  const std::int64_t report_every = std::max<std::int64_t>(1, run.steps / 20);
  const auto curve = unet::TrainDenoiser(state, data, run, [&](const unet::LossPoint& p) {
    if (p.step % report_every == 0) {
      char buf[80];
      std::snprintf(buf, sizeof buf, "step %lld loss %.5f", static_cast<long long>(p.step), p.loss);
      Say(log, buf);
    }
  });

  const std::string ckpt = "models/denoiser_" + table.name + ".ckpt";
  const std::string loss = "models/denoiser_" + table.name + "_loss.csv";
  fs::create_directories(m.Path(ckpt).parent_path());
  unet::SaveCheckpoint(state, m.Path(ckpt));
  unet::WriteLossCsv(curve, m.Path(loss));
  m.Track(ckpt);
  m.Track(loss);
  m.artifacts["denoiser/" + table.name] = ckpt;
  SaveManifest(m, "train-denoiser " + table.name + " to step " + std::to_string(state.step));
  return state;
}

EnhanceResult Enhance(const dsp::AudioClip& noisy, const ExperimentManifest& m, const regnet::RegnetModel& reg,
                      const unet::UNetModel* denoiser, const std::string& colormap, const EnhanceOptions& opt) {
  const codec::ColormapTable& table = codec::Colormap(colormap);
  Require(ParseColormapChoice(reg.colormap.empty() ? table.name : reg.colormap).table == table.name,
          ErrorCode::kState, "regnet was trained for " + reg.colormap + ", not " + table.name);
  dsp::AudioClip in = noisy.sample_rate == m.sample_rate ? noisy : dsp::Resample(noisy, m.sample_rate);
  const std::size_t L = m.segment_length;
  const std::size_t full = in.size() / L;
  const std::size_t rem = in.size() - full * L;
  Require(full > 0 || opt.tail == TailPolicy::kZeroPad, ErrorCode::kInvalidArgument,
          "enhance: input has " + std::to_string(in.size()) + " samples, less than one segment of " +
              std::to_string(L) + " (use --tail-policy zero-pad)");
  CodecContext ctx{&table, m.RequireRange(), &reg, opt.bypass_denoiser ? nullptr : denoiser, m.stft};
  const auto seg = dsp::Segment(in, L, opt.tail == TailPolicy::kZeroPad ? dsp::TailPolicy::kZeroPad
                                                                        : dsp::TailPolicy::kDrop);
  EnhanceResult r;
  r.audio.sample_rate = m.sample_rate;
  r.tail = rem;
  for (std::size_t s = 0; s < seg.segments.size(); ++s) {
    const dsp::AudioClip y = EnhanceSegment(seg.segments[s], ctx);
    const std::size_t keep = s < full ? L : rem;
    r.audio.samples.insert(r.audio.samples.end(), y.samples.begin(),
                           y.samples.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  r.segments = seg.segments.size();
  if (opt.tail == TailPolicy::kPassThrough && rem > 0) {
    r.audio.samples.insert(r.audio.samples.end(), in.samples.end() - static_cast<std::ptrdiff_t>(rem),
                           in.samples.end());
  }
  return r;
}

EnhanceResult CmdEnhance(const fs::path& noisy_wav, const fs::path& regnet_file,
                         const std::optional<fs::path>& checkpoint, const ExperimentManifest& m,
                         const fs::path& out_wav, const EnhanceOptions& opt, const Log& log) {
  const regnet::RegnetModel reg = regnet::Load(regnet_file);
  const std::string colormap = ParseColormapChoice(reg.colormap.empty() ? m.colormap : reg.colormap).table;
  Require(colormap == codec::Colormap(m.colormap).name, ErrorCode::kState,
          "regnet colormap " + colormap + " does not match manifest colormap " + m.colormap);
  std::optional<unet::TrainState> state;
  if (checkpoint && !opt.bypass_denoiser) {
    state = unet::LoadCheckpoint(*checkpoint);
    Require(state->colormap.empty() || state->colormap == colormap, ErrorCode::kState,
            "checkpoint colormap " + state->colormap + " does not match " + colormap);
  }
  const dsp::AudioClip noisy = dsp::ReadWav(noisy_wav);
  if (noisy.sample_rate != m.sample_rate) {
    Say(log, "resampling input from " + std::to_string(noisy.sample_rate) + " Hz to " +
                 std::to_string(m.sample_rate) + " Hz");
  }
  EnhanceResult r = Enhance(noisy, m, reg, state ? &state->model : nullptr, colormap, opt);
  if (out_wav.has_parent_path()) fs::create_directories(out_wav.parent_path());
  const auto w = dsp::WriteWav(r.audio, out_wav);
  Say(log, noisy_wav.filename().string() + ": " + std::to_string(r.segments) + " segments, tail " +
               std::to_string(r.tail) + " samples (" + ToString(opt.tail) + ")" +
               (state ? "" : ", denoiser bypassed"));
  if (w.clipped > 0) Say(log, "warning: " + std::to_string(w.clipped) + " samples clipped in " + out_wav.string());
  return r;
}

EvaluateResult CmdEvaluate(const fs::path& clean_dir, const fs::path& processed_dir, const EvaluateOptions& opt,
                           const Log& log) {
  const auto clean_files = ListWavs(clean_dir);
  const auto proc_files = ListWavs(processed_dir);
  Require(!clean_files.empty(), ErrorCode::kInvalidArgument, "evaluate: no WAV files in " + clean_dir.string());
  RequireSameNames(clean_files, proc_files, clean_dir.string(), processed_dir.string());
  std::vector<fs::path> unproc_files;
  if (opt.unprocessed_dir) {
    unproc_files = ListWavs(*opt.unprocessed_dir);
    RequireSameNames(clean_files, unproc_files, clean_dir.string(), opt.unprocessed_dir->string());
  }
  auto load_set = [](const std::vector<fs::path>& files) {
    std::vector<dsp::AudioClip> out;
    for (const auto& f : files) out.push_back(dsp::ReadWav(f));
    return out;
  };
  const auto clean = load_set(clean_files);
  auto score = [&](const std::vector<fs::path>& files) {
    const auto clips = load_set(files);
    std::vector<metrics::MetricReport> reports;
    for (std::size_t i = 0; i < clips.size(); ++i) {
      Require(clips[i].sample_rate == clean[i].sample_rate, ErrorCode::kInvalidArgument,
              "evaluate: " + files[i].filename().string() + " sample rate differs from the clean file");
    }
    if (opt.concatenated) {
      reports.push_back(metrics::Evaluate("concatenated", dsp::Concat(clean), dsp::Concat(clips)));
    } else {
      for (std::size_t i = 0; i < clips.size(); ++i) {
        reports.push_back(metrics::Evaluate(files[i].stem().string(), clean[i], clips[i]));
      }
    }
    return reports;
  };

  EvaluateResult r;
  r.processed = score(proc_files);
  if (opt.unprocessed_dir) r.unprocessed = score(unproc_files);
  if (opt.external_pesq) {
    const metrics::ExternalScores ext = metrics::ImportExternalScores(*opt.external_pesq);
    r.warnings = ext.warnings;
    for (const auto& id : metrics::AttachPesq(r.processed, ext)) r.warnings.push_back("no PESQ for " + id);
    if (!r.unprocessed.empty()) {
      // Unprocessed scores are keyed "unprocessed/<clip_id>".
      metrics::ExternalScores sub;
      for (const auto& [k, v] : ext.pesq) {
        if (k.rfind("unprocessed/", 0) == 0) sub.pesq[k.substr(12)] = v;
      }
      if (!sub.pesq.empty()) {
        for (const auto& id : metrics::AttachPesq(r.unprocessed, sub)) {
          r.warnings.push_back("no PESQ for unprocessed/" + id);
        }
      }
    }
  }
  r.processed_mean = metrics::Mean(r.processed);
  if (!r.unprocessed.empty()) {
    r.unprocessed_mean = metrics::Mean(r.unprocessed);
    r.gain = metrics::GainReport(r.unprocessed, r.processed);
  }
  for (const auto& w : r.warnings) Say(log, "warning: " + w);
  return r;
}

}  // namespace chroma_se::pipeline
