// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "chroma_se/colormap.hpp"
#include "chroma_se/error.hpp"
#include "chroma_se/image.hpp"
#include "chroma_se/random.hpp"
#include "chroma_se/regnet.hpp"

namespace chroma_se::regnet {
namespace {

namespace fs = std::filesystem;

Eigen::MatrixXd RandomRows(Eigen::Index n, Eigen::Index k, Rng& rng) {
  Eigen::MatrixXd m(n, k);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.Uniform();
  return m;
}

RegnetModel WithStats(RegnetModel m) {
  m.stats.mean.assign(static_cast<std::size_t>(m.num_inputs()), 0.5);
  m.stats.stddev.assign(static_cast<std::size_t>(m.num_inputs()), 0.3);
  return m;
}

// Random non-zero biases so every parameter gets a generic gradient.
RegnetModel Perturbed(std::uint64_t seed) {
  RegnetModel m = WithStats(RegnetInit(seed));
  Rng rng(seed + 99);
  for (auto& b : m.biases) {
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.Uniform(-0.5, 0.5);
  }
  return m;
}

TEST(Regnet, ParameterCounts) {
  const RegnetModel m = RegnetInit(1);
  EXPECT_EQ(m.WeightCount(), 240u);
  EXPECT_EQ(m.ParameterCount(), 271u);
  EXPECT_EQ(FlattenParameters(m).size(), 271u);
  const RegnetModel g = RegnetInit(1, kGraySizes);
  EXPECT_EQ(g.num_inputs(), 1);
  EXPECT_EQ(g.WeightCount(), 220u);
}

TEST(Regnet, InitDeterministic) {
  EXPECT_EQ(FlattenParameters(RegnetInit(5)), FlattenParameters(RegnetInit(5)));
  EXPECT_NE(FlattenParameters(RegnetInit(5)), FlattenParameters(RegnetInit(6)));
  for (const auto& b : RegnetInit(5).biases) EXPECT_EQ(b.norm(), 0.0);
  EXPECT_FALSE(RegnetInit(5).stats.is_set());
}

TEST(Regnet, ZeroWeightsGiveOutputBias) {
  RegnetModel m = WithStats(RegnetInit(2));
  for (auto& w : m.weights) w.setZero();
  m.biases.back()(0) = -7.25;
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    const double x[3] = {rng.Uniform(), rng.Uniform(), rng.Uniform()};
    EXPECT_EQ(Forward(m, x), -7.25);
  }
}

TEST(Regnet, SinglePathHandArithmetic) {
  RegnetModel m = RegnetInit(2);
  for (auto& w : m.weights) w.setZero();
  for (auto& b : m.biases) b.setZero();
  m.weights[0](0, 1) = 0.8;
  m.biases[0](0) = 0.1;
  m.weights[1](0, 0) = 1.3;
  m.weights[2](0, 0) = -0.6;
  m.biases[2](0) = 0.2;
  m.weights[3](0, 0) = 4.0;
  m.biases[3](0) = 1.5;
  m.stats.mean = {0.0, 0.4, 0.0};
  m.stats.stddev = {1.0, 0.5, 1.0};
  const double x[3] = {0.9, 0.7, 0.1};
  const double xt = (0.7 - 0.4) / 0.5;
  const double h1 = std::tanh(0.8 * xt + 0.1);
  const double h2 = std::tanh(1.3 * h1);
  const double h3 = std::tanh(-0.6 * h2 + 0.2);
  EXPECT_NEAR(Forward(m, x), 4.0 * h3 + 1.5, 1e-15);
}

TEST(Regnet, OutputBoundedBySaturation) {
  const RegnetModel m = Perturbed(4);
  const double bound = m.weights.back().cwiseAbs().sum() + std::abs(m.biases.back()(0));
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double x[3] = {rng.Uniform(-50, 50), rng.Uniform(-50, 50), rng.Uniform(-50, 50)};
    EXPECT_LE(std::abs(Forward(m, x, StatsMode::kBypass)), bound);
  }
}

TEST(Regnet, UnsetStatsRejected) {
  const RegnetModel m = RegnetInit(1);
  const double x[3] = {0.1, 0.2, 0.3};
  EXPECT_THROW(Forward(m, x), Error);
  EXPECT_NO_THROW(Forward(m, x, StatsMode::kBypass));
}

TEST(Regnet, GradientMatchesFiniteDifferences) {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    Rng rng(100 + trial);
    RegnetModel m = Perturbed(trial);
    const Eigen::MatrixXd x = RandomRows(16, 3, rng);
    Eigen::VectorXd y(16);
    for (Eigen::Index i = 0; i < 16; ++i) y(i) = rng.Uniform(-3.0, 3.0);
    const std::vector<double> g = FlattenGradient(Gradient(m, x, y));
    std::vector<double> p = FlattenParameters(m);
    ASSERT_EQ(g.size(), 271u);
    auto loss = [&](const std::vector<double>& q) {
      RegnetModel mm = m;
      SetParameters(mm, q);
      return (ForwardBatch(mm, x) - y).squaredNorm() / 16.0;
    };
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double h = 1e-5 * std::max(1.0, std::abs(p[i]));
      std::vector<double> a = p, b = p;
      a[i] += h;
      b[i] -= h;
      const double fd = (loss(a) - loss(b)) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - g[i]) / std::max(1e-3, std::abs(fd) + std::abs(g[i])));
    }
    EXPECT_LE(worst, 1e-4) << "trial " << trial;
  }
}

TEST(Regnet, GradientZeroAtFit) {
  const RegnetModel m = Perturbed(7);
  Rng rng(8);
  const Eigen::MatrixXd x = RandomRows(10, 3, rng);
  const Eigen::VectorXd y = ForwardBatch(m, x);
  for (double v : FlattenGradient(Gradient(m, x, y))) EXPECT_EQ(v, 0.0);
}

TEST(Regnet, GradientOfDuplicatedBatch) {
  const RegnetModel m = Perturbed(9);
  Rng rng(10);
  const Eigen::MatrixXd x = RandomRows(7, 3, rng);
  Eigen::VectorXd y(7);
  for (Eigen::Index i = 0; i < 7; ++i) y(i) = rng.Normal();
  Eigen::MatrixXd xx(14, 3);
  xx << x, x;
  Eigen::VectorXd yy(14);
  yy << y, y;
  const auto g1 = FlattenGradient(Gradient(m, x, y));
  const auto g2 = FlattenGradient(Gradient(m, xx, yy));
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g1[i], g2[i], 1e-14 * (1 + std::abs(g1[i])));
  EXPECT_THROW(Gradient(m, Eigen::MatrixXd(0, 3), Eigen::VectorXd(0)), Error);
}

codec::PixelDataset Synthetic(Eigen::Index n, std::uint64_t seed, const std::function<double(double)>& f) {
  Rng rng(seed);
  codec::PixelDataset d;
  d.predictors = RandomRows(n, 3, rng);
  d.targets.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) d.targets(i) = f(d.predictors(i, 0));
  return d;
}

TEST(RegnetTrain, ConstantTarget) {
  RegnetTrainConfig cfg;
  cfg.epochs = 300;
  cfg.batch_size = 64;
  cfg.learning_rate = 3e-2;
  cfg.final_learning_rate = 1e-3;
  const auto r = Train(RegnetInit(1), Synthetic(2000, 1, [](double) { return -4.0; }), cfg);
  EXPECT_LE(r.report.test_mse, 1e-6);
}

TEST(RegnetTrain, LinearTarget) {
  RegnetTrainConfig cfg;
  cfg.epochs = 150;
  cfg.batch_size = 64;
  cfg.learning_rate = 1e-2;
  cfg.final_learning_rate = 1e-4;
  const auto r = Train(RegnetInit(2), Synthetic(4000, 2, [](double red) { return 40.0 * red - 23.0; }), cfg);
  EXPECT_LE(r.report.test_mse, 1e-3);
  EXPECT_EQ(r.report.train_curve.size(), 150u);
  EXPECT_EQ(r.report.test_curve.size(), 150u);
  EXPECT_EQ(r.report.train_rows + r.report.test_rows, 4000u);
  EXPECT_FALSE(r.report.optimizer.empty());
}

TEST(RegnetTrain, DeterministicAndSeedSensitive) {
  RegnetTrainConfig cfg;
  cfg.epochs = 3;
  const auto d = Synthetic(1000, 3, [](double r) { return std::sin(6 * r); });
  const auto a = Train(RegnetInit(3), d, cfg);
  const auto b = Train(RegnetInit(3), d, cfg);
  EXPECT_EQ(FlattenParameters(a.model), FlattenParameters(b.model));
  EXPECT_EQ(a.model.stats.mean, b.model.stats.mean);
  cfg.seed = 1;
  const auto c = Train(RegnetInit(3), d, cfg);
  EXPECT_NE(FlattenParameters(a.model), FlattenParameters(c.model));
}

TEST(RegnetTrain, StatsFromTrainingSplitOnly) {
  RegnetTrainConfig cfg;
  cfg.epochs = 1;
  cfg.holdout = 0.3;
  const codec::PixelDataset d = Synthetic(1000, 4, [](double r) { return r; });
  const HoldoutIndices split = HoldoutSplit(1000, cfg.holdout, cfg.seed);
  EXPECT_EQ(split.test.size(), 300u);
  const auto base = Train(RegnetInit(4), d, cfg);
  for (int c = 0; c < 3; ++c) {
    double m = 0.0;
    for (Eigen::Index i : split.train) m += d.predictors(i, c);
    EXPECT_NEAR(base.model.stats.mean[static_cast<std::size_t>(c)], m / 700.0, 1e-12);
  }
  codec::PixelDataset poisoned = d;
  for (Eigen::Index i : split.test) poisoned.predictors.row(i).array() += 100.0;
  EXPECT_EQ(Train(RegnetInit(4), poisoned, cfg).model.stats.mean, base.model.stats.mean);
  codec::PixelDataset moved = d;
  moved.predictors(split.train.front(), 0) += 100.0;
  EXPECT_NE(Train(RegnetInit(4), moved, cfg).model.stats.mean, base.model.stats.mean);
}

TEST(RegnetTrain, Rejections) {
  RegnetTrainConfig cfg;
  EXPECT_THROW(Train(RegnetInit(1), Synthetic(50, 1, [](double) { return 0.0; }), cfg), Error);
  cfg.holdout = 1.0;
  EXPECT_THROW(cfg.Validate(), Error);
  cfg.holdout = 0.2;
  cfg.epochs = 0;
  EXPECT_THROW(cfg.Validate(), Error);
  RegnetTrainConfig blow;
  blow.epochs = 2;
  blow.learning_rate = blow.final_learning_rate = 1e300;
  EXPECT_THROW(Train(RegnetInit(1), Synthetic(500, 1, [](double r) { return 1e200 * r; }), blow), Error);
}

TEST(RegnetDecode, UniformAndTranspose) {
  const RegnetModel m = Perturbed(11);
  codec::ColorImage img(codec::kImageSize, codec::kImageSize);
  for (std::size_t i = 0; i < img.rgb.size(); i += 3) {
    img.rgb[i] = 0.2;
    img.rgb[i + 1] = 0.6;
    img.rgb[i + 2] = 0.9;
  }
  const double x[3] = {0.2, 0.6, 0.9};
  const dsp::LpsMatrix d = Decode(m, img);
  ASSERT_EQ(d.num_bands(), 256);
  EXPECT_TRUE((d.values.array() == Forward(m, x)).all());

  Rng rng(12);
  for (double& v : img.rgb) v = rng.Uniform();
  codec::ColorImage tr(codec::kImageSize, codec::kImageSize);
  const int n = codec::kImageSize;
  // Transpose in (band, frame) space: pixel for (f, t) moves to (t, f).
  for (int f = 0; f < n; ++f) {
    for (int t = 0; t < n; ++t) {
      for (int ch = 0; ch < 3; ++ch) tr.at(n - 1 - t, f, ch) = img.at(n - 1 - f, t, ch);
    }
  }
  EXPECT_EQ(Decode(m, tr).values, Decode(m, img).values.transpose());
  EXPECT_THROW(Decode(RegnetInit(1), img), Error);
}

TEST(RegnetFile, RoundTripBitExact) {
  const fs::path dir = fs::temp_directory_path() / "chroma_se_regnet";
  fs::create_directories(dir);
  RegnetModel m = Perturbed(13);
  m.colormap = "parula";
  Save(m, dir / "m.txt");
  const RegnetModel back = Load(dir / "m.txt");
  EXPECT_EQ(back.colormap, "parula");
  EXPECT_EQ(back.sizes, m.sizes);
  Rng rng(14);
  for (int i = 0; i < 100; ++i) {
    const double x[3] = {rng.Uniform(), rng.Uniform(), rng.Uniform()};
    EXPECT_EQ(Forward(back, x), Forward(m, x));
  }
}

TEST(RegnetFile, VersionAndTruncation) {
  const fs::path dir = fs::temp_directory_path() / "chroma_se_regnet_bad";
  fs::create_directories(dir);
  Save(Perturbed(15), dir / "m.txt");
  std::string text;
  {
    std::ifstream in(dir / "m.txt");
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  {
    std::string v = text;
    v.replace(v.find(" 2\n"), 3, " 9\n");
    std::ofstream(dir / "v.txt") << v;
  }
  try {
    Load(dir / "v.txt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kVersionMismatch);
  }
  std::ofstream(dir / "t.txt") << text.substr(0, text.size() / 2);
  EXPECT_THROW(Load(dir / "t.txt"), Error);
}

}  // namespace
}  // namespace chroma_se::regnet
