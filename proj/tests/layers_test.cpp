// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "chroma_se/error.hpp"
#include "chroma_se/layers.hpp"
#include "chroma_se/random.hpp"

namespace chroma_se::nn {
namespace {

Tensor RandomTensor(int c, int t, int f, Rng& rng) {
  Tensor x(c, t, f);
  for (auto& v : x.values()) v = rng.Uniform(-1.0, 1.0);
  return x;
}

std::vector<double> RandomVec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.Uniform(-1.0, 1.0);
  return v;
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Direct loop over the definition.
Tensor NaiveConv(const Tensor& x, const std::vector<double>& k, const ConvGeometry& g) {
  Tensor y(g.out_c, g.out_t, g.out_f);
  for (int o = 0; o < g.out_c; ++o)
    for (int t = 0; t < g.out_t; ++t)
      for (int f = 0; f < g.out_f; ++f) {
        double s = 0.0;
        for (int i = 0; i < g.in_c; ++i)
          for (int a = 0; a < g.kt; ++a)
            for (int b = 0; b < g.kf; ++b) {
              const int it = t * g.st + a - g.pad_t;
              const int jf = f * g.sf + b - g.pad_f;
              if (it < 0 || it >= g.in_t || jf < 0 || jf >= g.in_f) continue;
              s += k[((static_cast<std::size_t>(o) * g.in_c + i) * g.kt + a) * g.kf + b] *
                   x.at(i, it, jf);
            }
        y.at(o, t, f) = s;
      }
  return y;
}

TEST(Geometry, SameAndValidShapes) {
  const auto same = MakeGeometry(3, 8, 5, 7, 1, 2, 256, 256);
  EXPECT_EQ(same.out_t, 256);
  EXPECT_EQ(same.out_f, 128);
  const auto odd = MakeGeometry(1, 1, 3, 3, 2, 2, 5, 5);
  EXPECT_EQ(odd.out_t, 3);
  const auto valid = MakeGeometry(1, 1, 2, 2, 1, 1, 3, 3, Padding::kValid);
  EXPECT_EQ(valid.out_t, 2);
  EXPECT_EQ(valid.out_f, 2);
  EXPECT_EQ(valid.pad_t, 0);
}

TEST(Conv, OnesKernelSumsWindows) {
  Tensor x(1, 3, 3, 1.0);
  const std::vector<double> k(4, 1.0);
  const auto g = MakeGeometry(1, 1, 2, 2, 1, 1, 3, 3, Padding::kValid);
  const Tensor y = Conv2d(x, k, {}, g);
  ASSERT_EQ(y.size(), 4u);
  for (double v : y.values()) EXPECT_DOUBLE_EQ(v, 4.0);
}

TEST(Conv, IdentityKernelWithBias) {
  Rng rng(1);
  const Tensor x = RandomTensor(2, 4, 5, rng);
  const std::vector<double> k = {1, 0, 0, 1};
  const std::vector<double> bias = {0.5, -1.0};
  const auto g = MakeGeometry(2, 2, 1, 1, 1, 1, 4, 5);
  const Tensor y = Conv2d(x, k, bias, g);
  for (int c = 0; c < 2; ++c)
    for (int t = 0; t < 4; ++t)
      for (int f = 0; f < 5; ++f) EXPECT_DOUBLE_EQ(y.at(c, t, f), x.at(c, t, f) + bias[c]);
}

TEST(Conv, ZeroInputGivesBias) {
  const std::vector<double> bias = {0.25, -3.0};
  const auto g = MakeGeometry(3, 2, 3, 5, 2, 2, 6, 6);
  Rng rng(12);
  const auto k = RandomVec(g.kernel_size(), rng);
  const Tensor y = Conv2d(Tensor(3, 6, 6), k, bias, g);
  for (int c = 0; c < 2; ++c)
    for (double v : y.channel(c)) EXPECT_EQ(v, bias[static_cast<std::size_t>(c)]);
  const std::vector<double> tbias = {1.0, 2.0, 3.0};
  const Tensor z = Conv2dTranspose(Tensor(2, g.out_t, g.out_f), k, tbias, g);
  ASSERT_EQ(z.channels(), 3);
  EXPECT_EQ(z.time(), 6);
  for (int c = 0; c < 3; ++c)
    for (double v : z.channel(c)) EXPECT_EQ(v, tbias[static_cast<std::size_t>(c)]);
}

TEST(Conv, TransposeIdentityKernel) {
  Rng rng(13);
  const Tensor y = RandomTensor(1, 4, 4, rng);
  const std::vector<double> k = {1.0};
  const auto g = MakeGeometry(1, 1, 1, 1, 1, 1, 4, 4);
  EXPECT_EQ(Conv2dTranspose(y, k, {}, g), y);
  // stride 2 doubles each axis
  const auto g2 = MakeGeometry(1, 1, 3, 3, 2, 2, 8, 8);
  EXPECT_EQ(Conv2dTranspose(y, std::vector<double>(9, 0.1), {}, g2).time(), 8);
}

TEST(Conv, MatchesNaiveLoopOnStridedShapes) {
  Rng rng(2);
  for (const auto& [kt, kf, st, sf, it, jf] :
       std::vector<std::array<int, 6>>{{5, 7, 1, 2, 9, 16}, {3, 3, 2, 2, 7, 6}, {5, 5, 2, 1, 8, 3}}) {
    const auto g = MakeGeometry(3, 4, kt, kf, st, sf, it, jf);
    const Tensor x = RandomTensor(3, it, jf, rng);
    const auto k = RandomVec(g.kernel_size(), rng);
    const Tensor y = Conv2d(x, k, {}, g);
    const Tensor ref = NaiveConv(x, k, g);
    ASSERT_TRUE(y.SameShape(ref));
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.data()[i], ref.data()[i], 1e-12);
  }
}

TEST(Conv, TransposeIsAdjoint) {
  Rng rng(3);
  for (const auto& [kt, kf, st, sf, it, jf] : std::vector<std::array<int, 6>>{
           {5, 7, 1, 2, 8, 16}, {3, 3, 2, 2, 8, 8}, {3, 3, 2, 2, 7, 5}, {1, 1, 1, 1, 3, 3}}) {
    const auto g = MakeGeometry(2, 3, kt, kf, st, sf, it, jf);
    const Tensor x = RandomTensor(2, it, jf, rng);
    const Tensor y = RandomTensor(3, g.out_t, g.out_f, rng);
    const auto k = RandomVec(g.kernel_size(), rng);
    const double lhs = Dot(Conv2d(x, k, {}, g).span(), y.span());
    const double rhs = Dot(x.span(), Conv2dTranspose(y, k, {}, g).span());
    EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(Conv, BackwardMatchesFiniteDifferences) {
  Rng rng(4);
  const auto g = MakeGeometry(2, 2, 3, 3, 2, 1, 5, 4);
  const Tensor x = RandomTensor(2, 5, 4, rng);
  auto k = RandomVec(g.kernel_size(), rng);
  auto bias = RandomVec(2, rng);
  const Tensor w = RandomTensor(2, g.out_t, g.out_f, rng);
  auto loss = [&](const Tensor& xx, const std::vector<double>& kk, const std::vector<double>& bb) {
    return Dot(Conv2d(xx, kk, bb, g).span(), w.span());
  };
  Tensor dx;
  std::vector<double> dk(k.size(), 0.0), db(2, 0.0);
  Conv2dBackward(x, k, g, w, &dx, dk, db);
  const double h = 1e-6;
  for (std::size_t i = 0; i < k.size(); ++i) {
    auto kp = k, km = k;
    kp[i] += h;
    km[i] -= h;
    EXPECT_NEAR(dk[i], (loss(x, kp, bias) - loss(x, km, bias)) / (2 * h), 1e-7);
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    EXPECT_NEAR(dx.data()[i], (loss(xp, k, bias) - loss(xm, k, bias)) / (2 * h), 1e-7);
  }
  for (int c = 0; c < 2; ++c) {
    double s = 0.0;
    for (double v : w.channel(c)) s += v;
    EXPECT_NEAR(db[c], s, 1e-12);
  }
}

TEST(Conv, TransposeBackwardMatchesFiniteDifferences) {
  Rng rng(5);
  const auto g = MakeGeometry(2, 3, 3, 3, 2, 2, 6, 6);
  const Tensor y = RandomTensor(3, g.out_t, g.out_f, rng);
  auto k = RandomVec(g.kernel_size(), rng);
  const std::vector<double> bias = RandomVec(2, rng);
  const Tensor w = RandomTensor(2, 6, 6, rng);
  auto loss = [&](const Tensor& yy, const std::vector<double>& kk) {
    return Dot(Conv2dTranspose(yy, kk, bias, g).span(), w.span());
  };
  Tensor dy;
  std::vector<double> dk(k.size(), 0.0), db(2, 0.0);
  Conv2dTransposeBackward(y, k, g, w, &dy, dk, db);
  const double h = 1e-6;
  for (std::size_t i = 0; i < k.size(); ++i) {
    auto kp = k, km = k;
    kp[i] += h;
    km[i] -= h;
    EXPECT_NEAR(dk[i], (loss(y, kp) - loss(y, km)) / (2 * h), 1e-7);
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    Tensor yp = y, ym = y;
    yp.data()[i] += h;
    ym.data()[i] -= h;
    EXPECT_NEAR(dy.data()[i], (loss(yp, k) - loss(ym, k)) / (2 * h), 1e-7);
  }
}

TEST(Conv, RejectsWrongInputShape) {
  const auto g = MakeGeometry(1, 1, 3, 3, 1, 1, 4, 4);
  const std::vector<double> k(9, 0.0);
  EXPECT_THROW(Conv2d(Tensor(1, 5, 4), k, {}, g), Error);
  EXPECT_THROW(Conv2d(Tensor(1, 4, 4), std::vector<double>(8, 0.0), {}, g), Error);
}

TEST(BatchNorm, TrainNormalizesEachChannel) {
  Tensor x(2, 1, 4);
  const double vals[] = {1, 2, 3, 4, 10, 10, 10, 10};
  std::copy(std::begin(vals), std::end(vals), x.data());
  const std::vector<double> gamma = {1.0, 2.0}, beta = {0.0, 3.0};
  NormCache cache;
  const Tensor y = BatchNormTrain(x, gamma, beta, 1e-5, &cache);
  EXPECT_DOUBLE_EQ(cache.mean[0], 2.5);
  EXPECT_DOUBLE_EQ(cache.var[0], 1.25);  // population variance
  EXPECT_NEAR(y.at(0, 0, 0), -1.5 / std::sqrt(1.25 + 1e-5), 1e-12);
  EXPECT_NEAR(y.at(0, 0, 3), 1.5 / std::sqrt(1.25 + 1e-5), 1e-12);
  // constant channel: xhat = 0 so the output is beta
  for (int f = 0; f < 4; ++f) EXPECT_NEAR(y.at(1, 0, f), 3.0, 1e-12);
}

TEST(BatchNorm, TrainMomentsAndEvalIdentity) {
  Rng rng(14);
  const Tensor x = RandomTensor(3, 5, 7, rng);
  const std::vector<double> ones(3, 1.0), zeros(3, 0.0);
  const Tensor y = BatchNormTrain(x, ones, zeros, 1e-5, nullptr);
  for (int c = 0; c < 3; ++c) {
    double m = 0.0, v = 0.0;
    for (double e : y.channel(c)) m += e;
    m /= 35.0;
    for (double e : y.channel(c)) v += (e - m) * (e - m);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v / 35.0, 1.0, 1e-3);
  }
  const Tensor id = BatchNormEval(x, ones, zeros, zeros, ones, 1e-12, nullptr);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(id.data()[i], x.data()[i], 1e-11);
}

TEST(BatchNorm, EvalUsesRunningStatistics) {
  Tensor x(1, 1, 2);
  x.at(0, 0, 0) = 3.0;
  x.at(0, 0, 1) = -1.0;
  const std::vector<double> gamma = {2.0}, beta = {0.5}, mean = {1.0}, var = {4.0};
  const Tensor y = BatchNormEval(x, gamma, beta, mean, var, 0.0, nullptr);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0), 2.0 * (3.0 - 1.0) / 2.0 + 0.5);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 1), 2.0 * (-1.0 - 1.0) / 2.0 + 0.5);
}

TEST(BatchNorm, TrainBackwardMatchesFiniteDifferences) {
  Rng rng(6);
  const Tensor x = RandomTensor(2, 3, 3, rng);
  auto gamma = RandomVec(2, rng), beta = RandomVec(2, rng);
  const Tensor w = RandomTensor(2, 3, 3, rng);
  auto loss = [&](const Tensor& xx, const std::vector<double>& gg, const std::vector<double>& bb) {
    return Dot(BatchNormTrain(xx, gg, bb, 1e-5, nullptr).span(), w.span());
  };
  NormCache cache;
  BatchNormTrain(x, gamma, beta, 1e-5, &cache);
  std::vector<double> dg(2, 0.0), dbeta(2, 0.0);
  const Tensor dx = BatchNormTrainBackward(cache, gamma, w, dg, dbeta);
  const double h = 1e-6;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    EXPECT_NEAR(dx.data()[i], (loss(xp, gamma, beta) - loss(xm, gamma, beta)) / (2 * h), 1e-6);
  }
  for (int c = 0; c < 2; ++c) {
    auto gp = gamma, gm = gamma;
    gp[c] += h;
    gm[c] -= h;
    EXPECT_NEAR(dg[c], (loss(x, gp, beta) - loss(x, gm, beta)) / (2 * h), 1e-7);
    auto bp = beta, bm = beta;
    bp[c] += h;
    bm[c] -= h;
    EXPECT_NEAR(dbeta[c], (loss(x, gamma, bp) - loss(x, gamma, bm)) / (2 * h), 1e-7);
  }
}

TEST(BatchNorm, EvalBackwardIsAffine) {
  Rng rng(7);
  const Tensor x = RandomTensor(1, 2, 3, rng);
  const std::vector<double> gamma = {1.5}, beta = {0.2}, mean = {0.1}, var = {0.7};
  NormCache cache;
  BatchNormEval(x, gamma, beta, mean, var, 1e-5, &cache);
  const Tensor dy(1, 2, 3, 1.0);
  std::vector<double> dg(1, 0.0), db(1, 0.0);
  const Tensor dx = BatchNormEvalBackward(cache, gamma, dy, dg, db);
  for (double v : dx.values()) EXPECT_NEAR(v, 1.5 / std::sqrt(0.7 + 1e-5), 1e-12);
  EXPECT_DOUBLE_EQ(db[0], 6.0);
}

TEST(LeakyRelu, SlopeOnNegativeSide) {
  Tensor x(1, 1, 3);
  x.at(0, 0, 0) = -2.0;
  x.at(0, 0, 1) = 0.0;
  x.at(0, 0, 2) = 3.0;
  const Tensor y = LeakyRelu(x, 0.2);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0), -0.4);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 1), 0.0);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 2), 3.0);
  const Tensor d = LeakyReluBackward(x, Tensor(1, 1, 3, 1.0), 0.2);
  EXPECT_DOUBLE_EQ(d.at(0, 0, 0), 0.2);
  EXPECT_DOUBLE_EQ(d.at(0, 0, 2), 1.0);
  EXPECT_EQ(LeakyRelu(x, 0.0).at(0, 0, 0), 0.0);
}

TEST(Dropout, RateZeroIsIdentity) {
  Rng rng(8);
  const Tensor x = RandomTensor(2, 3, 4, rng);
  EXPECT_EQ(Dropout(x, 0.0, true, 11), x);
  EXPECT_EQ(Dropout(x, 0.5, false, 11), x);
}

TEST(Dropout, MaskValuesAndDeterminism) {
  const auto m = DropoutMask(1000, 0.5, 3);
  for (double v : m) EXPECT_TRUE(v == 0.0 || v == 2.0);
  EXPECT_EQ(m, DropoutMask(1000, 0.5, 3));
  EXPECT_NE(m, DropoutMask(1000, 0.5, 4));
}

TEST(Dropout, PreservesMeanInExpectation) {
  Tensor x(1, 1, 4, 1.0);
  double sum = 0.0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) sum += Dropout(x, 0.5, true, static_cast<std::uint64_t>(i)).at(0, 0, 1);
  EXPECT_NEAR(sum / trials, 1.0, 0.02);
}

TEST(Channels, ConcatThenSplitRoundTrips) {
  Rng rng(9);
  const Tensor a = RandomTensor(2, 3, 4, rng), b = RandomTensor(3, 3, 4, rng);
  const Tensor ab = ConcatChannels(a, b);
  EXPECT_EQ(ab.channels(), 5);
  EXPECT_EQ(ab.at(2, 1, 1), b.at(0, 1, 1));
  Tensor da, db;
  SplitChannels(ab, 2, &da, &db);
  EXPECT_EQ(da, a);
  EXPECT_EQ(db, b);
  EXPECT_THROW(ConcatChannels(a, Tensor(1, 2, 4)), Error);
}

}  // namespace
}  // namespace chroma_se::nn
