// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <limits>

#include "chroma_se/colormap.hpp"
#include "chroma_se/error.hpp"
#include "chroma_se/image.hpp"
#include "chroma_se/random.hpp"
#include "chroma_se/spectral.hpp"

namespace chroma_se::codec {
namespace {

namespace fs = std::filesystem;

const DisplayRange kRange{-23.0, 5.0};

dsp::LpsMatrix RandomLps(std::uint64_t seed, double lo = -25.0, double hi = 7.0) {
  Rng rng(seed);
  dsp::LpsMatrix m;
  m.values.resize(kImageSize, kImageSize);
  for (Eigen::Index i = 0; i < m.values.size(); ++i) m.values.data()[i] = rng.Uniform(lo, hi);
  return m;
}

int NearestEntry(const ColormapTable& t, double r, double g, double b) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kColormapSize; ++k) {
    const double d = std::pow(t.component(k, 0) - r, 2) + std::pow(t.component(k, 1) - g, 2) +
                     std::pow(t.component(k, 2) - b, 2);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

// Fraction of pixels whose nearest table entry is the encoded index.
double RecoveryRate(const ColormapTable& t, std::uint64_t seed) {
  const dsp::LpsMatrix lps = RandomLps(seed);
  const ColorImage img = EncodeLps(lps, t, kRange);
  int hits = 0;
  for (int f = 0; f < kImageSize; ++f) {
    for (int col = 0; col < kImageSize; ++col) {
      const int row = kImageSize - 1 - f;
      hits += NearestEntry(t, img.at(row, col, 0), img.at(row, col, 1), img.at(row, col, 2)) ==
              QuantizeIndex(lps.values(f, col), kRange);
    }
  }
  return hits / static_cast<double>(kImageSize * kImageSize);
}

TEST(Colormap, RegistryShape) {
  const auto& names = ColormapNames();
  // 17 distinct tables; the 18th bench row is the single-channel gray regnet
  EXPECT_EQ(names.size(), 17u);
  EXPECT_NE(std::find(names.begin(), names.end(), "gray"), names.end());
  std::set<std::string> unique(names.begin(), names.end());
  EXPECT_EQ(unique.size(), names.size());
  for (const auto& n : names) {
    const ColormapTable& t = Colormap(n);
    EXPECT_EQ(t.name, n);
    for (int k = 0; k < kColormapSize; ++k) {
      for (int ch = 0; ch < 3; ++ch) {
        EXPECT_GE(t.component(k, ch), 0.0);
        EXPECT_LE(t.component(k, ch), 1.0);
      }
    }
  }
}

TEST(Colormap, GrayRamp) {
  const ColormapTable& g = Colormap("gray");
  for (int k = 0; k < kColormapSize; ++k) {
    EXPECT_EQ(g.entries[static_cast<std::size_t>(k)], (Rgb8{static_cast<std::uint8_t>(k), static_cast<std::uint8_t>(k),
                                                             static_cast<std::uint8_t>(k)}));
  }
}

TEST(Colormap, UnknownNameListsValidOnes) {
  try {
    Colormap("magma");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotFound);
    EXPECT_NE(std::string(e.what()).find("parula"), std::string::npos);
  }
  EXPECT_EQ(Colormap("Color-cube").name, "colorcube");
}

TEST(Colormap, DuplicateCensus) {
  for (const char* n : {"gray", "parula", "jet", "hot"}) EXPECT_EQ(DuplicateEntries(Colormap(n)), 0) << n;
  for (const char* n : {"prism", "flag", "lines"}) EXPECT_GT(DuplicateEntries(Colormap(n)), 100) << n;
}

TEST(Quantize, EndpointsAndHalf) {
  EXPECT_EQ(QuantizeIndex(kRange.lo, kRange), 0);
  EXPECT_EQ(QuantizeIndex(kRange.hi, kRange), 255);
  const DisplayRange unit{0.0, 255.0};
  EXPECT_EQ(QuantizeIndex(127.5, unit), 128);
  EXPECT_EQ(QuantizeIndex(0.5 * (kRange.lo + kRange.hi), kRange), 128);
  EXPECT_EQ(QuantizeIndex(-1e9, kRange), 0);
  EXPECT_EQ(QuantizeIndex(1e9, kRange), 255);
}

TEST(Quantize, MonotoneAndIdempotent) {
  Rng rng(3);
  std::vector<double> v(2000);
  for (double& x : v) x = rng.Uniform(-30.0, 10.0);
  std::sort(v.begin(), v.end());
  int prev = 0;
  for (double x : v) {
    const int q = QuantizeIndex(x, kRange);
    EXPECT_GE(q, prev);
    prev = q;
    EXPECT_EQ(QuantizeIndex(DequantizeIndex(q, kRange), kRange), q);
  }
}

TEST(Range, PercentilesAndFloor) {
  std::vector<double> v;
  for (int i = 0; i <= 1000; ++i) v.push_back(i * 0.01);
  const DisplayRange r = RangeFromPercentiles(v, 0.1, 99.9, -23.0);
  EXPECT_DOUBLE_EQ(r.lo, -23.0);
  EXPECT_NEAR(r.hi, 9.99, 1e-12);
  const DisplayRange r2 = RangeFromPercentiles(v, 0.1, 99.9, 100.0);
  EXPECT_NEAR(r2.lo, 0.01, 1e-12);
  EXPECT_THROW(RangeFromPercentiles(std::vector<double>{}, 0.1, 99.9, 0.0), Error);
}

TEST(Encode, ConstantAtLoIsEntryZero) {
  const ColormapTable& t = Colormap("parula");
  dsp::LpsMatrix m;
  m.values = Eigen::MatrixXd::Constant(kImageSize, kImageSize, kRange.lo);
  const ColorImage img = EncodeLps(m, t, kRange);
  for (int r = 0; r < kImageSize; r += 17) {
    for (int c = 0; c < kImageSize; c += 13) {
      for (int ch = 0; ch < 3; ++ch) EXPECT_EQ(img.at(r, c, ch), t.component(0, ch));
    }
  }
}

TEST(Encode, GrayChannelAverageIsQuantizedLevel) {
  const dsp::LpsMatrix lps = RandomLps(4);
  const ColorImage img = EncodeLps(lps, Colormap("gray"), kRange);
  for (int f = 0; f < kImageSize; ++f) {
    for (int t = 0; t < kImageSize; ++t) {
      const int row = kImageSize - 1 - f;
      const double avg = (img.at(row, t, 0) + img.at(row, t, 1) + img.at(row, t, 2)) / 3.0;
      EXPECT_NEAR(avg, QuantizeIndex(lps.values(f, t), kRange) / 255.0, 1e-15);
    }
  }
}

TEST(Encode, OrientationLowBandAtBottom) {
  dsp::LpsMatrix m;
  m.values = Eigen::MatrixXd::Constant(kImageSize, kImageSize, kRange.lo);
  m.values(0, 7) = kRange.hi;
  const ColorImage img = EncodeLps(m, Colormap("gray"), kRange);
  EXPECT_EQ(img.at(kImageSize - 1, 7, 0), 1.0);
  EXPECT_EQ(img.at(0, 7, 0), 0.0);
}

TEST(Encode, NearestEntryRecovery) {
  for (const char* n : {"gray", "parula", "jet", "hot"}) EXPECT_EQ(RecoveryRate(Colormap(n), 5), 1.0) << n;
  EXPECT_LT(RecoveryRate(Colormap("prism"), 5), 1.0);
}

TEST(Encode, WrongShape) {
  dsp::LpsMatrix m;
  m.values = Eigen::MatrixXd::Zero(257, 256);
  EXPECT_THROW(EncodeLps(m, Colormap("gray"), kRange), Error);
}

TEST(Png, RoundTripPixelsAndMetadata) {
  const fs::path dir = fs::temp_directory_path() / "chroma_se_png";
  fs::create_directories(dir);
  const ColorImage img = EncodeLps(RandomLps(6), Colormap("jet"), kRange);
  SaveImage(img, dir / "a.png");
  const ColorImage back = LoadImage(dir / "a.png", true);
  EXPECT_EQ(back.rgb, img.rgb);
  EXPECT_EQ(back.colormap, "jet");
  EXPECT_EQ(back.range, kRange);
  SaveImage(back, dir / "b.png");
  std::ifstream a(dir / "a.png", std::ios::binary), b(dir / "b.png", std::ios::binary);
  EXPECT_TRUE(std::equal(std::istreambuf_iterator<char>(a), {}, std::istreambuf_iterator<char>(b)));
}

TEST(Png, TruncatedAndWrongSize) {
  const fs::path dir = fs::temp_directory_path() / "chroma_se_png_bad";
  fs::create_directories(dir);
  SaveImage(EncodeLps(RandomLps(7), Colormap("gray"), kRange), dir / "full.png");
  {
    std::ifstream in(dir / "full.png", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    std::ofstream out(dir / "cut.png", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  EXPECT_THROW(LoadImage(dir / "cut.png"), Error);
  ColorImage small(8, 8);
  SaveImage(small, dir / "small.png");
  EXPECT_NO_THROW(LoadImage(dir / "small.png"));
  try {
    LoadImage(dir / "small.png", true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

TEST(Standardize, UniformImageFlagged) {
  ColorImage img(16, 16);
  for (double& v : img.rgb) v = 0.3;
  const StandardizedImage s = Standardize(img);
  EXPECT_TRUE(s.stats.any_degenerate());
  for (double v : s.field.values()) EXPECT_EQ(v, 0.0);
}

TEST(Standardize, MomentsAndRoundTrip) {
  Rng rng(8);
  ColorImage img(32, 24);
  for (double& v : img.rgb) v = rng.Uniform();
  const StandardizedImage s = Standardize(img);
  EXPECT_FALSE(s.stats.any_degenerate());
  for (int ch = 0; ch < 3; ++ch) {
    double m = 0.0, v = 0.0;
    for (double x : s.field.channel(ch)) m += x;
    m /= static_cast<double>(s.field.plane());
    for (double x : s.field.channel(ch)) v += (x - m) * (x - m);
    v /= static_cast<double>(s.field.plane());
    EXPECT_NEAR(m, 0.0, 1e-9);
    EXPECT_NEAR(v, 1.0, 1e-9);
  }
  const ColorImage back = Destandardize(s.field, s.stats, "", {});
  for (std::size_t i = 0; i < img.rgb.size(); ++i) EXPECT_NEAR(back.rgb[i], img.rgb[i], 1e-12);
}

TEST(Standardize, TargetSharesInputStats) {
  Rng rng(9);
  ColorImage a(8, 8), b(8, 8);
  for (double& v : a.rgb) v = rng.Uniform();
  for (double& v : b.rgb) v = rng.Uniform();
  const StandardizedImage s = Standardize(a);
  const Tensor t = ApplyStandardization(b, s.stats);
  const Tensor raw = ImageToTensor(b);
  for (int ch = 0; ch < 3; ++ch) {
    for (std::size_t i = 0; i < raw.plane(); ++i) {
      EXPECT_NEAR(t.channel(ch)[i], (raw.channel(ch)[i] - s.stats.mean[static_cast<std::size_t>(ch)]) /
                                        s.stats.stddev[static_cast<std::size_t>(ch)],
                  1e-15);
    }
  }
}

TEST(Tensor, ImageLayout) {
  ColorImage img(4, 6);
  img.at(3, 5, 1) = 0.7;  // bottom row, last column
  const Tensor t = ImageToTensor(img);
  EXPECT_EQ(t.channels(), 3);
  EXPECT_EQ(t.time(), 6);
  EXPECT_EQ(t.freq(), 4);
  EXPECT_EQ(t.at(1, 5, 0), 0.7);
  EXPECT_EQ(TensorToImage(t, "", {}).rgb, img.rgb);
}

TEST(PixelDataset, RowCountsAndOrder) {
  const dsp::LpsMatrix lps = RandomLps(10);
  const ColorImage img = EncodeLps(lps, Colormap("parula"), kRange);
  std::vector<std::pair<ColorImage, dsp::LpsMatrix>> one = {{img, lps}};
  const PixelDataset d = BuildPixelDataset(one);
  EXPECT_EQ(d.size(), 65536);
  // frames outer, bands inner
  EXPECT_EQ(d.targets(1), lps.values(1, 0));
  EXPECT_EQ(d.targets(256), lps.values(0, 1));
  EXPECT_EQ(d.predictors(1, 0), img.at(kImageSize - 2, 0, 0));
  EXPECT_FALSE(d.predictors.hasNaN());
  std::vector<std::pair<ColorImage, dsp::LpsMatrix>> ten(10, {img, lps});
  EXPECT_EQ(BuildPixelDataset(ten).size(), 655360);
  EXPECT_EQ(BuildPixelDataset({}).size(), 0);
  dsp::LpsMatrix bad;
  bad.values = Eigen::MatrixXd::Zero(10, 10);
  std::vector<std::pair<ColorImage, dsp::LpsMatrix>> mismatch = {{img, bad}};
  EXPECT_THROW(BuildPixelDataset(mismatch), Error);
}

}  // namespace
}  // namespace chroma_se::codec
