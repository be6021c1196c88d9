// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include "chroma_se/audio.hpp"
#include "chroma_se/error.hpp"
#include "chroma_se/fft.hpp"
#include "chroma_se/random.hpp"
#include "chroma_se/spectral.hpp"
#include "chroma_se/stft.hpp"

namespace chroma_se::dsp {
namespace {

namespace fs = std::filesystem;

fs::path TempDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("chroma_se_dsp_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

AudioClip RandomClip(std::size_t n, std::uint64_t seed, double amp = 0.5, int rate = 16000) {
  Rng rng(seed);
  AudioClip c;
  c.sample_rate = rate;
  c.samples.resize(n);
  for (double& v : c.samples) v = rng.Uniform(-amp, amp);
  return c;
}

double SnrDb(std::span<const double> ref, std::span<const double> est) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    num += ref[i] * ref[i];
    den += (ref[i] - est[i]) * (ref[i] - est[i]);
  }
  return den == 0.0 ? 1e9 : 10.0 * std::log10(num / den);
}

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kState;
}

void WriteBytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void Put32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
void Put16(std::vector<unsigned char>& b, std::uint16_t v) {
  b.push_back(static_cast<unsigned char>(v));
  b.push_back(static_cast<unsigned char>(v >> 8));
}

// Minimal RIFF writer for formats WriteWav does not emit.
std::vector<unsigned char> MakeWav(std::uint16_t format, std::uint16_t channels, std::uint16_t bits, int rate,
                                   const std::vector<unsigned char>& data) {
  std::vector<unsigned char> b = {'R', 'I', 'F', 'F'};
  Put32(b, static_cast<std::uint32_t>(36 + data.size()));
  for (char c : std::string("WAVEfmt ")) b.push_back(static_cast<unsigned char>(c));
  Put32(b, 16);
  Put16(b, format);
  Put16(b, channels);
  Put32(b, static_cast<std::uint32_t>(rate));
  Put32(b, static_cast<std::uint32_t>(rate * channels * bits / 8));
  Put16(b, static_cast<std::uint16_t>(channels * bits / 8));
  Put16(b, bits);
  for (char c : std::string("data")) b.push_back(static_cast<unsigned char>(c));
  Put32(b, static_cast<std::uint32_t>(data.size()));
  b.insert(b.end(), data.begin(), data.end());
  return b;
}

TEST(Wav, SilenceReadsAsZeros) {
  const fs::path dir = TempDir("silence");
  AudioClip c;
  c.sample_rate = 16000;
  c.samples.assign(16000, 0.0);
  WriteWav(c, dir / "s.wav");
  const AudioClip r = ReadWav(dir / "s.wav");
  EXPECT_EQ(r.sample_rate, 16000);
  ASSERT_EQ(r.size(), 16000u);
  for (double v : r.samples) EXPECT_EQ(v, 0.0);
}

TEST(Wav, FullScaleSample) {
  const fs::path dir = TempDir("fullscale");
  std::vector<unsigned char> data;
  Put16(data, 32767);
  WriteBytes(dir / "f.wav", MakeWav(1, 1, 16, 16000, data));
  const AudioClip r = ReadWav(dir / "f.wav");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_DOUBLE_EQ(r.samples[0], 32767.0 / 32768.0);
}

TEST(Wav, RoundTripWithinOneLsb) {
  const fs::path dir = TempDir("roundtrip");
  const AudioClip c = RandomClip(5000, 3, 0.9);
  WriteWav(c, dir / "r.wav");
  const AudioClip r = ReadWav(dir / "r.wav");
  ASSERT_EQ(r.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_LE(std::abs(r.samples[i] - c.samples[i]), 1.0 / 32768.0);
  const AudioClip q = QuantizeTo16Bit(c);
  EXPECT_EQ(q.samples, r.samples);
}

TEST(Wav, ClippingIsCounted) {
  const fs::path dir = TempDir("clip");
  AudioClip c;
  c.sample_rate = 16000;
  c.samples = {0.0, 2.0, -0.5};
  const WavWriteReport rep = WriteWav(c, dir / "c.wav");
  EXPECT_EQ(rep.clipped, 1u);
  const AudioClip r = ReadWav(dir / "c.wav");
  EXPECT_DOUBLE_EQ(r.samples[1], 32767.0 / 32768.0);
}

TEST(Wav, EmptyClipRejectedWithoutFile) {
  const fs::path dir = TempDir("empty");
  AudioClip c;
  c.sample_rate = 16000;
  EXPECT_THROW(WriteWav(c, dir / "e.wav"), Error);
  EXPECT_FALSE(fs::exists(dir / "e.wav"));
}

TEST(Wav, DistinctErrors) {
  const fs::path dir = TempDir("errors");
  EXPECT_EQ(CodeOf([&] { ReadWav(dir / "missing.wav"); }), ErrorCode::kNotFound);
  WriteBytes(dir / "junk.wav", {'J', 'U', 'N', 'K', 0, 0, 0, 0});
  EXPECT_EQ(CodeOf([&] { ReadWav(dir / "junk.wav"); }), ErrorCode::kMalformed);
  std::vector<unsigned char> data(12, 0);
  WriteBytes(dir / "pcm24.wav", MakeWav(1, 1, 24, 16000, data));
  EXPECT_EQ(CodeOf([&] { ReadWav(dir / "pcm24.wav"); }), ErrorCode::kUnsupported);
}

TEST(Wav, FloatAndStereoInput) {
  const fs::path dir = TempDir("float");
  std::vector<unsigned char> data;
  for (float v : {0.25f, -0.75f, 0.5f, 0.125f}) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    Put32(data, bits);
  }
  WriteBytes(dir / "f.wav", MakeWav(3, 2, 32, 8000, data));
  const AudioClip r = ReadWav(dir / "f.wav");
  EXPECT_EQ(r.sample_rate, 8000);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_DOUBLE_EQ(r.samples[0], 0.25);
  EXPECT_DOUBLE_EQ(r.samples[1], 0.5);
}

TEST(Resample, RateRatioLength) {
  const AudioClip c = RandomClip(48000, 4, 0.5, 48000);
  const AudioClip r = Resample(c, 16000);
  EXPECT_EQ(r.sample_rate, 16000);
  EXPECT_EQ(r.size(), 16000u);
}

TEST(Resample, SameRateIsIdentity) {
  const AudioClip c = RandomClip(1000, 5);
  EXPECT_EQ(Resample(c, 16000).samples, c.samples);
}

TEST(Resample, TonePeakStays) {
  AudioClip c;
  c.sample_rate = 48000;
  for (int i = 0; i < 48000; ++i) c.samples.push_back(std::sin(2 * std::numbers::pi * 1000.0 * i / 48000.0));
  const AudioClip r = Resample(c, 16000);
  // 16000-point DFT magnitude peak: 1 Hz resolution.
  const auto spec = Rfft(r.samples);
  std::size_t best = 0;
  for (std::size_t k = 1; k < spec.size(); ++k) {
    if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
  }
  EXPECT_EQ(best, 1000u);
}

TEST(Resample, ZeroTargetRejected) {
  EXPECT_THROW(Resample(RandomClip(10, 1), 0), Error);
}

TEST(Concat, LengthsAndSlices) {
  const AudioClip a = RandomClip(100, 6), b = RandomClip(200, 7);
  const std::vector<AudioClip> both = {a, b};
  const AudioClip c = Concat(both);
  ASSERT_EQ(c.size(), 300u);
  EXPECT_TRUE(std::equal(a.samples.begin(), a.samples.end(), c.samples.begin()));
  EXPECT_TRUE(std::equal(b.samples.begin(), b.samples.end(), c.samples.begin() + 100));
  const std::vector<AudioClip> one = {a};
  EXPECT_EQ(Concat(one).samples, a.samples);
}

TEST(Concat, Errors) {
  EXPECT_THROW(Concat(std::vector<AudioClip>{}), Error);
  AudioClip b = RandomClip(10, 1);
  b.sample_rate = 8000;
  const std::vector<AudioClip> mixed = {RandomClip(10, 2), b};
  EXPECT_THROW(Concat(mixed), Error);
}

TEST(Segment, CountsAndRemainder) {
  EXPECT_EQ(Segment(RandomClip(131840, 1)).segments.size(), 2u);
  const Segmentation s = Segment(RandomClip(65919, 1));
  EXPECT_EQ(s.segments.size(), 0u);
  EXPECT_EQ(s.remainder, 65919u);
  const Segmentation p = Segment(RandomClip(65930, 1), kDefaultSegmentLength, TailPolicy::kZeroPad);
  ASSERT_EQ(p.segments.size(), 2u);
  EXPECT_EQ(p.segments[1].size(), kDefaultSegmentLength);
  EXPECT_EQ(p.segments[1].samples[10], 0.0);
  EXPECT_THROW(Segment(RandomClip(10, 1), 0), Error);
}

TEST(Segment, SegmentGives256Frames) {
  const StftParams p;
  EXPECT_EQ(p.NumFrames(kDefaultSegmentLength), 256u);
  const ComplexSpectrogram s = Stft(RandomClip(kDefaultSegmentLength, 2));
  EXPECT_EQ(s.num_frames(), 256);
  EXPECT_EQ(s.num_bins(), 257);
}

TEST(Stft, ZeroClipZeroMagnitude) {
  AudioClip c;
  c.sample_rate = 16000;
  c.samples.assign(2048, 0.0);
  const ComplexSpectrogram s = Stft(c);
  EXPECT_EQ(s.magnitude.maxCoeff(), 0.0);
}

TEST(Stft, TonePeakBin) {
  AudioClip c;
  c.sample_rate = 16000;
  for (int i = 0; i < 4096; ++i) c.samples.push_back(std::sin(2 * std::numbers::pi * 1000.0 * i / 16000.0));
  const ComplexSpectrogram s = Stft(c);
  for (Eigen::Index t = 0; t < s.num_frames(); ++t) {
    Eigen::Index row;
    s.magnitude.col(t).maxCoeff(&row);
    EXPECT_EQ(row, 32);
  }
}

TEST(Stft, FrameCountFormula) {
  Rng rng(11);
  const StftParams p;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 512 + rng.Below(5000);
    EXPECT_EQ(p.NumFrames(n), (n - 512) / 256 + 1);
    if (i < 5) {
      EXPECT_EQ(static_cast<std::size_t>(Stft(RandomClip(n, i)).num_frames()), (n - 512) / 256 + 1);
    }
  }
}

TEST(Stft, ShortClipRejected) {
  EXPECT_THROW(Stft(RandomClip(511, 1)), Error);
}

TEST(Stft, Parseval) {
  const AudioClip c = RandomClip(512, 12);
  const auto w = HannWindow(512);
  std::vector<double> frame(512);
  double e_time = 0.0;
  for (int i = 0; i < 512; ++i) {
    frame[static_cast<std::size_t>(i)] = c.samples[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];
    e_time += frame[static_cast<std::size_t>(i)] * frame[static_cast<std::size_t>(i)];
  }
  const auto full = FullDft(frame);
  double e_freq = 0.0;
  for (const auto& z : full) e_freq += std::norm(z);
  EXPECT_NEAR(e_time, e_freq / 512.0, 1e-9 * e_time);
}

TEST(Istft, RoundTripInterior) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const AudioClip c = RandomClip(8192, 100 + seed);
    const AudioClip r = Istft(Stft(c));
    ASSERT_EQ(r.size(), 8192u);
    const std::span<const double> a(c.samples.data() + 512, 8192 - 1024);
    const std::span<const double> b(r.samples.data() + 512, 8192 - 1024);
    EXPECT_GE(SnrDb(a, b), 60.0);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6 * 0.5);
  }
}

TEST(Istft, ZeroAndLinearity) {
  ComplexSpectrogram s = Stft(RandomClip(4096, 13));
  ComplexSpectrogram z = s;
  z.magnitude.setZero();
  for (double v : Istft(z).samples) EXPECT_EQ(v, 0.0);
  const AudioClip once = Istft(s);
  s.magnitude *= 2.0;
  const AudioClip twice = Istft(s);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_NEAR(twice.samples[i], 2.0 * once.samples[i], 1e-12);
  EXPECT_EQ(once.size(), s.params.SynthesisLength(static_cast<std::size_t>(s.num_frames())));
}

TEST(Istft, ShapeMismatch) {
  ComplexSpectrogram s = Stft(RandomClip(4096, 13));
  s.phase.conservativeResize(256, Eigen::NoChange);
  EXPECT_THROW(Istft(s), Error);
}

TEST(Lps, ClosedForms) {
  Eigen::MatrixXd m(1, 3);
  m << 1.0, std::exp(1.0), 0.0;
  const LpsMatrix l = LpsFromMagnitude(m);
  EXPECT_DOUBLE_EQ(l.values(0, 0), 0.0);
  EXPECT_NEAR(l.values(0, 1), 2.0, 1e-15);
  EXPECT_NEAR(l.values(0, 2), std::log(1e-10), 1e-12);
  EXPECT_NEAR(l.values(0, 2), -23.026, 1e-3);
  LpsMatrix back;
  back.values = Eigen::MatrixXd(1, 2);
  back.values << 0.0, 2.0;
  const Eigen::MatrixXd mag = MagnitudeFromLps(back);
  EXPECT_DOUBLE_EQ(mag(0, 0), 1.0);
  EXPECT_NEAR(mag(0, 1), std::exp(1.0), 1e-15);
}

TEST(Lps, InversePairRelativeError) {
  Rng rng(14);
  Eigen::MatrixXd m(64, 64);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::pow(10.0, rng.Uniform(-4.0, 3.0));
  const Eigen::MatrixXd back = MagnitudeFromLps(LpsFromMagnitude(m));
  EXPECT_LE(((back - m).array().abs() / m.array()).maxCoeff(), 1e-9);
}

TEST(Lps, Rejections) {
  Eigen::MatrixXd neg(1, 1);
  neg << -1.0;
  EXPECT_THROW(LpsFromMagnitude(neg), Error);
  LpsMatrix bad;
  bad.values = Eigen::MatrixXd::Constant(1, 1, std::numeric_limits<double>::quiet_NaN());
  EXPECT_THROW(MagnitudeFromLps(bad), Error);
}

TEST(NyquistRow, CropAndRestore) {
  Rng rng(15);
  LpsMatrix x;
  x.values = Eigen::MatrixXd(257, 8);
  for (Eigen::Index i = 0; i < x.values.size(); ++i) x.values.data()[i] = rng.Normal();
  const LpsMatrix c = CropNyquistRow(x);
  ASSERT_EQ(c.num_bands(), 256);
  EXPECT_EQ(c.values, x.values.topRows(256));
  EXPECT_THROW(CropNyquistRow(c), Error);
  const LpsMatrix r = RestoreNyquistRow(c);
  ASSERT_EQ(r.num_bands(), 257);
  EXPECT_EQ(r.values.row(256), r.values.row(255));
  EXPECT_EQ(r.values.topRows(256), x.values.topRows(256));
  EXPECT_THROW(RestoreNyquistRow(x), Error);
  LpsMatrix z;
  z.values = Eigen::MatrixXd::Zero(256, 4);
  EXPECT_EQ(RestoreNyquistRow(z).values, Eigen::MatrixXd::Zero(257, 4));
}

TEST(Mirror, MatchesFullFft) {
  const AudioClip c = RandomClip(2048, 16);
  const ComplexSpectrogram s = Stft(c);
  const Eigen::MatrixXd full = MirrorNegativeFrequencies(s.magnitude);
  ASSERT_EQ(full.rows(), 512);
  const auto w = HannWindow(512);
  for (Eigen::Index t = 0; t < s.num_frames(); ++t) {
    std::vector<double> frame(512);
    for (std::size_t i = 0; i < 512; ++i) frame[i] = c.samples[static_cast<std::size_t>(t) * 256 + i] * w[i];
    const auto dft = FullDft(frame);
    for (int k = 0; k < 512; ++k) EXPECT_NEAR(full(k, t), std::abs(dft[static_cast<std::size_t>(k)]), 1e-9);
  }
  for (int k = 1; k < 256; ++k) EXPECT_EQ(full.row(k), full.row(512 - k));
  EXPECT_EQ(MirrorNegativeFrequencies(Eigen::MatrixXd::Constant(257, 3, 2.0)),
            Eigen::MatrixXd::Constant(512, 3, 2.0));
  EXPECT_THROW(MirrorNegativeFrequencies(Eigen::MatrixXd::Zero(1, 3)), Error);
}

TEST(Reconstruct, OwnPhaseIdentity) {
  const AudioClip c = RandomClip(kDefaultSegmentLength, 17);
  const ComplexSpectrogram s = Stft(c);
  const Eigen::MatrixXd mag = MagnitudeFromLps(LpsFromSpectrogram(s));
  const AudioClip r = Reconstruct(mag, s.phase, s.params, c.sample_rate);
  const std::size_t n = r.size() - 1024;
  EXPECT_GE(SnrDb({c.samples.data() + 512, n}, {r.samples.data() + 512, n}), 60.0);
  const AudioClip z = Reconstruct(Eigen::MatrixXd::Zero(mag.rows(), mag.cols()), s.phase, s.params, 16000);
  for (double v : z.samples) EXPECT_EQ(v, 0.0);
  const AudioClip d = Reconstruct(2.0 * mag, s.phase, s.params, 16000);
  for (std::size_t i = 0; i < r.size(); i += 97) EXPECT_NEAR(d.samples[i], 2.0 * r.samples[i], 1e-12);
  EXPECT_THROW(Reconstruct(mag, s.phase.topRows(256), s.params, 16000), Error);
}

}  // namespace
}  // namespace chroma_se::dsp
