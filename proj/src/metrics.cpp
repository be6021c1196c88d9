// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "chroma_se/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "chroma_se/error.hpp"
#include "chroma_se/fft.hpp"
#include "chroma_se/lsd.hpp"

namespace chroma_se::metrics {

namespace {

constexpr int kStoiRate = 10000;
constexpr int kStoiFrame = 256;
constexpr int kStoiHop = 128;
constexpr int kStoiFft = 512;
constexpr int kStoiBands = 15;
constexpr double kStoiMinFreq = 150.0;
constexpr int kStoiSegment = 30;
constexpr double kStoiBeta = -15.0;
constexpr double kStoiDynRange = 40.0;
constexpr double kEps = std::numeric_limits<double>::epsilon();

// Symmetric Hann of length n + 2 with both zero end points dropped.
std::vector<double> InnerHann(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (i + 1) / (n + 1));
  }
  return w;
}

// Frame starts 0, hop, ... strictly below len - frame.
std::size_t CountFrames(std::size_t len, int frame, int hop) {
  if (len <= static_cast<std::size_t>(frame)) return 0;
  return (len - static_cast<std::size_t>(frame) - 1) / static_cast<std::size_t>(hop) + 1;
}

void RemoveSilentFrames(std::vector<double>& x, std::vector<double>& y) {
  const std::vector<double> w = InnerHann(kStoiFrame);
  const std::size_t frames = CountFrames(x.size(), kStoiFrame, kStoiHop);
  std::vector<double> energy(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (int k = 0; k < kStoiFrame; ++k) {
      const double v = w[static_cast<std::size_t>(k)] * x[i * kStoiHop + static_cast<std::size_t>(k)];
      acc += v * v;
    }
    energy[i] = 20.0 * std::log10(std::sqrt(acc) + kEps);
  }
  std::vector<std::size_t> kept;
  if (frames > 0) {
    const double peak = *std::max_element(energy.begin(), energy.end());
    for (std::size_t i = 0; i < frames; ++i) {
      if (peak - kStoiDynRange - energy[i] < 0.0) kept.push_back(i);
    }
  }
  Require(!kept.empty(), ErrorCode::kInvalidArgument, "stoi: no speech frames in the clean signal");
  const std::size_t out_len = (kept.size() - 1) * kStoiHop + kStoiFrame;
  std::vector<double> xo(out_len, 0.0), yo(out_len, 0.0);
  for (std::size_t j = 0; j < kept.size(); ++j) {
    const std::size_t src = kept[j] * kStoiHop;
    const std::size_t dst = j * kStoiHop;
    for (int k = 0; k < kStoiFrame; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      xo[dst + ku] += w[ku] * x[src + ku];
      yo[dst + ku] += w[ku] * y[src + ku];
    }
  }
  x = std::move(xo);
  y = std::move(yo);
}

// Power spectra, one row of kStoiFft/2 + 1 bins per frame.
std::vector<std::vector<double>> PowerFrames(const std::vector<double>& x) {
  const std::vector<double> w = InnerHann(kStoiFrame);
  const std::size_t frames = CountFrames(x.size(), kStoiFrame, kStoiHop);
  std::vector<std::vector<double>> out(frames);
  std::vector<double> buf(kStoiFft);
  for (std::size_t i = 0; i < frames; ++i) {
    std::fill(buf.begin(), buf.end(), 0.0);
    for (int k = 0; k < kStoiFrame; ++k) {
      buf[static_cast<std::size_t>(k)] = w[static_cast<std::size_t>(k)] * x[i * kStoiHop + static_cast<std::size_t>(k)];
    }
    const auto spec = dsp::Rfft(buf);
    out[i].resize(spec.size());
    for (std::size_t b = 0; b < spec.size(); ++b) out[i][b] = std::norm(spec[b]);
  }
  return out;
}

// [lo, hi) bin ranges of the one-third-octave bands.
std::vector<std::pair<int, int>> ThirdOctaveBands() {
  const int bins = kStoiFft / 2 + 1;
  auto nearest = [&](double freq) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < bins; ++i) {
      const double f = static_cast<double>(kStoiRate) * i / kStoiFft;
      const double d = (f - freq) * (f - freq);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  };
  std::vector<std::pair<int, int>> bands;
  for (int k = 0; k < kStoiBands; ++k) {
    const double lo = kStoiMinFreq * std::pow(2.0, (2.0 * k - 1.0) / 6.0);
    const double hi = kStoiMinFreq * std::pow(2.0, (2.0 * k + 1.0) / 6.0);
    bands.emplace_back(nearest(lo), nearest(hi));
  }
  return bands;
}

// Band envelopes: [band][frame].
std::vector<std::vector<double>> BandEnvelopes(const std::vector<std::vector<double>>& power) {
  static const std::vector<std::pair<int, int>> bands = ThirdOctaveBands();
  std::vector<std::vector<double>> env(bands.size(), std::vector<double>(power.size()));
  for (std::size_t j = 0; j < bands.size(); ++j) {
    for (std::size_t m = 0; m < power.size(); ++m) {
      double acc = 0.0;
      for (int b = bands[j].first; b < bands[j].second; ++b) acc += power[m][static_cast<std::size_t>(b)];
      env[j][m] = std::sqrt(acc);
    }
  }
  return env;
}

double Norm(const double* v, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += v[i] * v[i];
  return std::sqrt(acc);
}

void Trim(const dsp::AudioClip& a, const dsp::AudioClip& b, std::vector<double>& x,
          std::vector<double>& y) {
  const std::size_t n = std::min(a.samples.size(), b.samples.size());
  x.assign(a.samples.begin(), a.samples.begin() + static_cast<std::ptrdiff_t>(n));
  y.assign(b.samples.begin(), b.samples.begin() + static_cast<std::ptrdiff_t>(n));
}

std::string Fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double Stoi(const dsp::AudioClip& clean, const dsp::AudioClip& processed) {
  Require(clean.sample_rate == processed.sample_rate, ErrorCode::kInvalidArgument,
          "stoi: sample rates differ");
  Require(clean.sample_rate >= kStoiRate, ErrorCode::kInvalidArgument,
          "stoi: sample rate must be at least 10 kHz");
  std::vector<double> x, y;
  Trim(clean, processed, x, y);
  if (clean.sample_rate != kStoiRate) {
    x = dsp::ResamplePoly(x, kStoiRate, clean.sample_rate);
    y = dsp::ResamplePoly(y, kStoiRate, clean.sample_rate);
  }
  RemoveSilentFrames(x, y);
  const auto xp = PowerFrames(x);
  const auto yp = PowerFrames(y);
  Require(xp.size() >= static_cast<std::size_t>(kStoiSegment), ErrorCode::kInvalidArgument,
          "stoi: only " + std::to_string(xp.size()) + " frames after silence removal, need " +
              std::to_string(kStoiSegment));
  const auto xe = BandEnvelopes(xp);
  const auto ye = BandEnvelopes(yp);

  const double clip = std::pow(10.0, -kStoiBeta / 20.0);
  const std::size_t segments = xp.size() - kStoiSegment + 1;
  double total = 0.0;
  double xs[kStoiSegment], ys[kStoiSegment];
  for (std::size_t s = 0; s < segments; ++s) {
    for (std::size_t j = 0; j < xe.size(); ++j) {
      for (int k = 0; k < kStoiSegment; ++k) {
        xs[k] = xe[j][s + static_cast<std::size_t>(k)];
        ys[k] = ye[j][s + static_cast<std::size_t>(k)];
      }
      const double alpha = Norm(xs, kStoiSegment) / (Norm(ys, kStoiSegment) + kEps);
      for (int k = 0; k < kStoiSegment; ++k) ys[k] = std::min(ys[k] * alpha, xs[k] * (1.0 + clip));
      double mx = 0.0, my = 0.0;
      for (int k = 0; k < kStoiSegment; ++k) {
        mx += xs[k];
        my += ys[k];
      }
      mx /= kStoiSegment;
      my /= kStoiSegment;
      for (int k = 0; k < kStoiSegment; ++k) {
        xs[k] -= mx;
        ys[k] -= my;
      }
      const double nx = Norm(xs, kStoiSegment) + kEps;
      const double ny = Norm(ys, kStoiSegment) + kEps;
      double corr = 0.0;
      for (int k = 0; k < kStoiSegment; ++k) corr += (ys[k] / ny) * (xs[k] / nx);
      total += corr;
    }
  }
  return total / (static_cast<double>(segments) * static_cast<double>(xe.size()));
}

double LsdMetric(const dsp::LpsMatrix& reference, const dsp::LpsMatrix& estimate) {
  Require(reference.values.rows() == estimate.values.rows() &&
              reference.values.cols() == estimate.values.cols(),
          ErrorCode::kShapeMismatch, "lsd: shape mismatch");
  Require(reference.values.size() > 0, ErrorCode::kInvalidArgument, "lsd: empty matrices");
  return LsdCore(reference.values.data(), estimate.values.data(),
                 static_cast<std::size_t>(reference.num_frames()),
                 static_cast<std::size_t>(reference.num_bands()));
}

double Snr(const dsp::AudioClip& reference, const dsp::AudioClip& estimate) {
  std::vector<double> r, e;
  Trim(reference, estimate, r, e);
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    sig += r[i] * r[i];
    err += (r[i] - e[i]) * (r[i] - e[i]);
  }
  Require(sig > 0.0, ErrorCode::kInvalidArgument, "snr: reference has zero energy");
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(sig / err);
}

double CapSnr(double snr_db) { return std::min(snr_db, kSnrCapDb); }

double SegSnr(const dsp::AudioClip& reference, const dsp::AudioClip& estimate, int frame) {
  Require(frame > 0, ErrorCode::kInvalidArgument, "seg_snr: frame must be positive");
  std::vector<double> r, e;
  Trim(reference, estimate, r, e);
  const std::size_t frames = r.size() / static_cast<std::size_t>(frame);
  Require(frames > 0, ErrorCode::kInvalidArgument, "seg_snr: signal shorter than one frame");
  double sig_total = 0.0;
  for (double v : r) sig_total += v * v;
  Require(sig_total > 0.0, ErrorCode::kInvalidArgument, "seg_snr: reference has zero energy");
  double total = 0.0;
  for (std::size_t f = 0; f < frames; ++f) {
    double sig = 0.0, err = 0.0;
    for (int k = 0; k < frame; ++k) {
      const std::size_t i = f * static_cast<std::size_t>(frame) + static_cast<std::size_t>(k);
      sig += r[i] * r[i];
      err += (r[i] - e[i]) * (r[i] - e[i]);
    }
    double db;
    if (err == 0.0) {
      db = kSegSnrCeilDb;
    } else if (sig == 0.0) {
      db = kSegSnrFloorDb;
    } else {
      db = std::clamp(10.0 * std::log10(sig / err), kSegSnrFloorDb, kSegSnrCeilDb);
    }
    total += db;
  }
  return total / static_cast<double>(frames);
}

MetricReport Evaluate(const std::string& clip_id, const dsp::AudioClip& clean,
                      const dsp::AudioClip& processed, const dsp::StftParams& params) {
  Require(clean.sample_rate == processed.sample_rate, ErrorCode::kInvalidArgument,
          "evaluate: sample rates differ for " + clip_id);
  MetricReport r;
  r.clip_id = clip_id;
  r.stoi_raw = Stoi(clean, processed);
  r.stoi = std::clamp(r.stoi_raw, 0.0, 1.0);
  const std::size_t n = std::min(clean.size(), processed.size());
  dsp::AudioClip a{{clean.samples.begin(), clean.samples.begin() + static_cast<std::ptrdiff_t>(n)}, clean.sample_rate};
  dsp::AudioClip b{{processed.samples.begin(), processed.samples.begin() + static_cast<std::ptrdiff_t>(n)}, clean.sample_rate};
  r.lsd = LsdMetric(dsp::LpsFromSpectrogram(dsp::Stft(a, params)),
                    dsp::LpsFromSpectrogram(dsp::Stft(b, params)));
  r.snr = Snr(a, b);
  r.seg_snr = SegSnr(a, b);
  return r;
}

ExternalScores ImportExternalScores(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) Fail(ErrorCode::kNotFound, "external scores: cannot open " + csv.string());
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  ExternalScores out;
  std::vector<std::string> problems;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto comma = line.find(',');
    const std::string id = comma == std::string::npos ? trim(line) : trim(line.substr(0, comma));
    const std::string val = comma == std::string::npos ? std::string() : trim(line.substr(comma + 1));
    if (!header) {
      if (id != "clip_id" || val != "pesq") {
        Fail(ErrorCode::kMalformed, "external scores: " + csv.string() +
                                        " line " + std::to_string(line_no) +
                                        ": expected header 'clip_id,pesq'");
      }
      header = true;
      continue;
    }
    if (comma == std::string::npos || id.empty() || val.find(',') != std::string::npos) {
      problems.push_back("line " + std::to_string(line_no) + ": expected 'clip_id,pesq'");
      continue;
    }
    char* end = nullptr;
    const double v = std::strtod(val.c_str(), &end);
    if (val.empty() || *end != '\0' || !std::isfinite(v)) {
      problems.push_back("line " + std::to_string(line_no) + ": '" + val + "' is not a number");
      continue;
    }
    if (v < kPesqMin || v > kPesqMax) {
      problems.push_back("line " + std::to_string(line_no) + ": pesq " + val +
                         " outside [-0.5, 4.5]");
      continue;
    }
    if (out.pesq.contains(id)) {
      out.warnings.push_back("line " + std::to_string(line_no) + ": duplicate clip_id '" + id +
                             "', keeping the later value");
    }
    out.pesq[id] = v;
  }
  if (!header) Fail(ErrorCode::kMalformed, "external scores: " + csv.string() + " is empty");
  if (!problems.empty()) {
    std::string msg = "external scores: " + csv.string() + " rejected:";
    for (const std::string& p : problems) msg += "\n  " + p;
    Fail(ErrorCode::kMalformed, msg);
  }
  return out;
}

std::vector<std::string> AttachPesq(std::span<MetricReport> reports, const ExternalScores& scores) {
  std::vector<std::string> missing;
  for (MetricReport& r : reports) {
    const auto it = scores.pesq.find(r.clip_id);
    if (it == scores.pesq.end()) {
      missing.push_back(r.clip_id);
    } else {
      r.pesq = it->second;
    }
  }
  return missing;
}

Aggregate Mean(std::span<const MetricReport> reports) {
  Aggregate a;
  a.clips = reports.size();
  if (reports.empty()) return a;
  bool all_pesq = true;
  double pesq = 0.0;
  for (const MetricReport& r : reports) {
    a.stoi += r.stoi;
    a.lsd += r.lsd;
    a.snr += CapSnr(r.snr);
    a.seg_snr += r.seg_snr;
    if (r.pesq) {
      pesq += *r.pesq;
    } else {
      all_pesq = false;
    }
  }
  const auto n = static_cast<double>(reports.size());
  a.stoi /= n;
  a.lsd /= n;
  a.snr /= n;
  a.seg_snr /= n;
  if (all_pesq) a.pesq = pesq / n;
  return a;
}

GainTable GainReport(std::span<const MetricReport> unprocessed,
                     std::span<const MetricReport> processed) {
  std::set<std::string> a, b;
  for (const auto& r : unprocessed) a.insert(r.clip_id);
  for (const auto& r : processed) b.insert(r.clip_id);
  if (a != b || a.size() != unprocessed.size() || b.size() != processed.size()) {
    std::string msg = "gain_report: clip ids differ or repeat";
    for (const auto& id : a) {
      if (!b.contains(id)) msg += "\n  only unprocessed: " + id;
    }
    for (const auto& id : b) {
      if (!a.contains(id)) msg += "\n  only processed: " + id;
    }
    Fail(ErrorCode::kInvalidArgument, msg);
  }
  const Aggregate u = Mean(unprocessed);
  const Aggregate p = Mean(processed);
  GainTable g;
  g.clips = u.clips;
  g.d_stoi = p.stoi - u.stoi;
  g.d_lsd = p.lsd - u.lsd;
  g.d_snr = p.snr - u.snr;
  g.d_seg_snr = p.seg_snr - u.seg_snr;
  if (u.pesq && p.pesq) g.d_pesq = *p.pesq - *u.pesq;
  return g;
}

void WriteReportsCsv(std::span<const MetricReport> reports, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) Fail(ErrorCode::kIo, "metrics csv: cannot open " + path.string());
  out << "clip_id,stoi,stoi_raw,lsd,snr_db,seg_snr_db,pesq\n";
  for (const MetricReport& r : reports) {
    out << r.clip_id << ',' << Fmt(r.stoi) << ',' << Fmt(r.stoi_raw) << ',' << Fmt(r.lsd) << ','
        << Fmt(CapSnr(r.snr)) << ',' << Fmt(r.seg_snr) << ',' << (r.pesq ? Fmt(*r.pesq) : "") << '\n';
  }
  if (!out) Fail(ErrorCode::kIo, "metrics csv: write failed for " + path.string());
}

std::string FormatAggregate(const std::string& label, const Aggregate& agg) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-14s clips=%zu  STOI %.4f  LSD %.4f  SNR %.2f dB  segSNR %.2f dB  PESQ %s",
                label.c_str(), agg.clips, agg.stoi, agg.lsd, agg.snr, agg.seg_snr,
                agg.pesq ? Fmt(*agg.pesq).substr(0, 6).c_str() : "n/a");
  return buf;
}

std::string FormatGainTable(const std::string& label, const GainTable& gain) {
  std::ostringstream os;
  char buf[256];
  os << "model,clips,d_pesq,d_stoi,d_lsd,d_snr_db,d_seg_snr_db\n";
  std::snprintf(buf, sizeof buf, "%s,%zu,%s,%.4f,%.4f,%.2f,%.2f\n", label.c_str(), gain.clips,
                gain.d_pesq ? Fmt(*gain.d_pesq).c_str() : "", gain.d_stoi, gain.d_lsd, gain.d_snr,
                gain.d_seg_snr);
  os << buf;
  return os.str();
}

}  // namespace chroma_se::metrics
