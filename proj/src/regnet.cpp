// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "chroma_se/regnet.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "chroma_se/error.hpp"
#include "chroma_se/random.hpp"

namespace chroma_se::regnet {

namespace {

constexpr const char* kMagic = "chroma-se-regnet";
constexpr int kVersion = 2;

// Returns the (num_inputs x N) first-layer activations.
Eigen::MatrixXd PrepareInputs(const RegnetModel& model, const Eigen::MatrixXd& inputs,
                              StatsMode mode) {
  Require(inputs.cols() == model.num_inputs(), ErrorCode::kShapeMismatch,
          "regnet: expected " + std::to_string(model.num_inputs()) + " inputs, got " +
              std::to_string(inputs.cols()));
  Eigen::MatrixXd x = inputs.transpose();
  if (mode == StatsMode::kBypass) return x;
  Require(model.stats.is_set(), ErrorCode::kState,
          "regnet: input statistics are not set (model untrained)");
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    x.row(i) = (x.row(i).array() - model.stats.mean[u]) / model.stats.stddev[u];
  }
  return x;
}

struct Activations {
  std::vector<Eigen::MatrixXd> a;  // a[0] = input, a[L] = output
};

Activations Propagate(const RegnetModel& model, Eigen::MatrixXd x) {
  Activations act;
  act.a.reserve(model.num_layers() + 1);
  act.a.push_back(std::move(x));
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    Eigen::MatrixXd z = model.weights[l] * act.a.back();
    z.colwise() += model.biases[l];
    if (l + 1 < model.num_layers()) z = z.array().tanh().matrix();
    act.a.push_back(std::move(z));
  }
  return act;
}

double Mse(const RegnetModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (y.size() == 0) return 0.0;
  const Eigen::VectorXd pred = ForwardBatch(model, x);
  return (pred - y).squaredNorm() / static_cast<double>(y.size());
}

}  // namespace

std::size_t RegnetModel::WeightCount() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  return n;
}

std::size_t RegnetModel::ParameterCount() const {
  std::size_t n = WeightCount();
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

RegnetModel RegnetInit(std::uint64_t seed, const std::vector<int>& sizes) {
  Require(sizes.size() >= 2, ErrorCode::kInvalidArgument, "regnet: need at least two layer sizes");
  for (int s : sizes) Require(s > 0, ErrorCode::kInvalidArgument, "regnet: layer sizes must be positive");
  RegnetModel m;
  m.sizes = sizes;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    Eigen::MatrixXd w(out, in);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.Uniform(-limit, limit);
    }
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  return m;
}

double Forward(const RegnetModel& model, std::span<const double> input, StatsMode mode) {
  Eigen::MatrixXd row(1, static_cast<Eigen::Index>(input.size()));
  for (std::size_t i = 0; i < input.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = input[i];
  return ForwardBatch(model, row, mode)(0);
}

Eigen::VectorXd ForwardBatch(const RegnetModel& model, const Eigen::MatrixXd& inputs,
                             StatsMode mode) {
  Activations act = Propagate(model, PrepareInputs(model, inputs, mode));
  return act.a.back().row(0).transpose();
}

RegnetGradient Gradient(const RegnetModel& model, const Eigen::MatrixXd& inputs,
                        const Eigen::VectorXd& targets, StatsMode mode) {
  Require(inputs.rows() > 0, ErrorCode::kInvalidArgument, "regnet_grad: empty batch");
  Require(inputs.rows() == targets.size(), ErrorCode::kShapeMismatch,
          "regnet_grad: input/target row mismatch");
  const auto batch = static_cast<double>(inputs.rows());
  Activations act = Propagate(model, PrepareInputs(model, inputs, mode));
  const std::size_t layers = model.num_layers();

  RegnetGradient g;
  g.d_weights.resize(layers);
  g.d_biases.resize(layers);
  const Eigen::RowVectorXd err = act.a.back().row(0) - targets.transpose();
  g.loss = err.squaredNorm() / batch;

  Eigen::MatrixXd delta = (2.0 / batch) * err;
  for (std::size_t l = layers; l-- > 0;) {
    g.d_weights[l] = delta * act.a[l].transpose();
    g.d_biases[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = model.weights[l].transpose() * delta;
      delta = back.array() * (1.0 - act.a[l].array().square());
    }
  }
  return g;
}

std::vector<double> FlattenParameters(const RegnetModel& model) {
  std::vector<double> flat;
  flat.reserve(model.ParameterCount());
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    flat.insert(flat.end(), model.weights[l].data(), model.weights[l].data() + model.weights[l].size());
    flat.insert(flat.end(), model.biases[l].data(), model.biases[l].data() + model.biases[l].size());
  }
  return flat;
}

void SetParameters(RegnetModel& model, std::span<const double> flat) {
  Require(flat.size() == model.ParameterCount(), ErrorCode::kShapeMismatch,
          "regnet: parameter vector has the wrong length");
  std::size_t pos = 0;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    for (Eigen::Index i = 0; i < model.weights[l].size(); ++i) model.weights[l].data()[i] = flat[pos++];
    for (Eigen::Index i = 0; i < model.biases[l].size(); ++i) model.biases[l].data()[i] = flat[pos++];
  }
}

std::vector<double> FlattenGradient(const RegnetGradient& grad) {
  std::vector<double> flat;
  for (std::size_t l = 0; l < grad.d_weights.size(); ++l) {
    flat.insert(flat.end(), grad.d_weights[l].data(), grad.d_weights[l].data() + grad.d_weights[l].size());
    flat.insert(flat.end(), grad.d_biases[l].data(), grad.d_biases[l].data() + grad.d_biases[l].size());
  }
  return flat;
}

void RegnetTrainConfig::Validate() const {
  Require(epochs >= 1, ErrorCode::kInvalidArgument, "regnet_train: epochs must be >= 1");
  Require(holdout > 0.0 && holdout < 1.0, ErrorCode::kInvalidArgument,
          "regnet_train: holdout must be in (0, 1)");
  Require(batch_size >= 1, ErrorCode::kInvalidArgument, "regnet_train: batch_size must be >= 1");
  Require(learning_rate > 0.0 && final_learning_rate > 0.0, ErrorCode::kInvalidArgument,
          "regnet_train: learning rates must be positive");
}

Eigen::MatrixXd SelectPredictors(const RegnetModel& model, const Eigen::MatrixXd& rgb) {
  if (model.num_inputs() == rgb.cols()) return rgb;
  Require(model.num_inputs() == 1, ErrorCode::kShapeMismatch,
          "regnet: cannot feed " + std::to_string(rgb.cols()) + " predictors to a " +
              std::to_string(model.num_inputs()) + "-input model");
  return rgb.leftCols(1);
}

HoldoutIndices HoldoutSplit(std::size_t n, double holdout, std::uint64_t seed) {
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng split_rng(MixSeed(seed, 0));
  split_rng.Shuffle(order.begin(), order.end());
  const auto n_test = static_cast<std::size_t>(std::llround(holdout * static_cast<double>(n)));
  Require(n_test > 0 && n_test < n, ErrorCode::kInvalidArgument,
          "regnet_train: hold-out split leaves an empty side");
  HoldoutIndices out;
  out.train.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_test));
  out.test.assign(order.end() - static_cast<std::ptrdiff_t>(n_test), order.end());
  return out;
}

RegnetTrainResult Train(RegnetModel model, const codec::PixelDataset& data,
                        const RegnetTrainConfig& cfg) {
  cfg.Validate();
  const auto n = static_cast<std::size_t>(data.size());
  Require(n >= 100, ErrorCode::kInvalidArgument,
          "regnet_train: dataset has " + std::to_string(n) + " rows, need at least 100");
  const Eigen::MatrixXd predictors = SelectPredictors(model, data.predictors);

  const HoldoutIndices split = HoldoutSplit(n, cfg.holdout, cfg.seed);
  const std::size_t n_train = split.train.size();
  const std::size_t n_test = split.test.size();
  std::vector<Eigen::Index> order = split.train;
  order.insert(order.end(), split.test.begin(), split.test.end());

  Eigen::MatrixXd x_train(static_cast<Eigen::Index>(n_train), predictors.cols());
  Eigen::VectorXd y_train(static_cast<Eigen::Index>(n_train));
  Eigen::MatrixXd x_test(static_cast<Eigen::Index>(n_test), predictors.cols());
  Eigen::VectorXd y_test(static_cast<Eigen::Index>(n_test));
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index src = order[i];
    if (i < n_train) {
      x_train.row(static_cast<Eigen::Index>(i)) = predictors.row(src);
      y_train(static_cast<Eigen::Index>(i)) = data.targets(src);
    } else {
      x_test.row(static_cast<Eigen::Index>(i - n_train)) = predictors.row(src);
      y_test(static_cast<Eigen::Index>(i - n_train)) = data.targets(src);
    }
  }

  // Training split only.
  model.stats.mean.assign(static_cast<std::size_t>(x_train.cols()), 0.0);
  model.stats.stddev.assign(static_cast<std::size_t>(x_train.cols()), 1.0);
  for (Eigen::Index c = 0; c < x_train.cols(); ++c) {
    const double mean = x_train.col(c).mean();
    const double var = (x_train.col(c).array() - mean).square().sum() /
                       std::max<double>(1.0, static_cast<double>(n_train) - 1.0);
    model.stats.mean[static_cast<std::size_t>(c)] = mean;
    model.stats.stddev[static_cast<std::size_t>(c)] = var > 0.0 ? std::sqrt(var) : 1.0;
  }

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::vector<double> params = FlattenParameters(model);
  std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
  long long step = 0;

  RegnetReport report;
  report.train_rows = n_train;
  report.test_rows = n_test;
  {
    std::ostringstream os;
    os << "adam(beta1=" << kBeta1 << ", beta2=" << kBeta2 << ", eps=" << kEps
       << ") lr=" << cfg.learning_rate << "->" << cfg.final_learning_rate
       << " (cosine) batch=" << cfg.batch_size << " epochs=" << cfg.epochs;
    report.optimizer = os.str();
  }

  std::vector<Eigen::Index> idx(n_train);
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  Eigen::MatrixXd xb;
  Eigen::VectorXd yb;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double progress = cfg.epochs > 1 ? static_cast<double>(epoch) / (cfg.epochs - 1) : 1.0;
    const double lr = cfg.final_learning_rate +
                      0.5 * (cfg.learning_rate - cfg.final_learning_rate) *
                          (1.0 + std::cos(std::numbers::pi * progress));
    Rng epoch_rng(MixSeed(cfg.seed, static_cast<std::uint64_t>(epoch) + 1));
    epoch_rng.Shuffle(idx.begin(), idx.end());
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n_train; start += batch) {
      const std::size_t len = std::min(batch, n_train - start);
      xb.resize(static_cast<Eigen::Index>(len), x_train.cols());
      yb.resize(static_cast<Eigen::Index>(len));
      for (std::size_t i = 0; i < len; ++i) {
        xb.row(static_cast<Eigen::Index>(i)) = x_train.row(idx[start + i]);
        yb(static_cast<Eigen::Index>(i)) = y_train(idx[start + i]);
      }
      const RegnetGradient g = Gradient(model, xb, yb);
      if (!std::isfinite(g.loss)) {
        Fail(ErrorCode::kNumerical, "regnet_train: non-finite loss at epoch " +
                                        std::to_string(epoch) + ", batch " + std::to_string(batches));
      }
      loss_sum += g.loss;
      ++batches;
      const std::vector<double> grad = FlattenGradient(g);
      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      for (std::size_t p = 0; p < params.size(); ++p) {
        m[p] = kBeta1 * m[p] + (1.0 - kBeta1) * grad[p];
        v[p] = kBeta2 * v[p] + (1.0 - kBeta2) * grad[p] * grad[p];
        params[p] -= lr * (m[p] / c1) / (std::sqrt(v[p] / c2) + kEps);
      }
      SetParameters(model, params);
    }
    report.train_curve.push_back(loss_sum / static_cast<double>(batches));
    report.test_curve.push_back(Mse(model, x_test, y_test));
  }
  report.train_mse = Mse(model, x_train, y_train);
  report.test_mse = report.test_curve.back();
  return {std::move(model), std::move(report)};
}

dsp::LpsMatrix Decode(const RegnetModel& model, const codec::ColorImage& img) {
  Require(model.stats.is_set(), ErrorCode::kState, "regnet_decode: model is untrained");
  Require(img.height == codec::kImageSize && img.width == codec::kImageSize,
          ErrorCode::kShapeMismatch, "regnet_decode: image must be 256x256");
  const int size = codec::kImageSize;
  Eigen::MatrixXd rgb(static_cast<Eigen::Index>(size) * size, 3);
  Eigen::Index row = 0;
  for (int t = 0; t < size; ++t) {
    for (int f = 0; f < size; ++f) {
      for (int ch = 0; ch < 3; ++ch) rgb(row, ch) = img.at(size - 1 - f, t, ch);
      ++row;
    }
  }
  const Eigen::VectorXd pred = ForwardBatch(model, SelectPredictors(model, rgb));
  dsp::LpsMatrix lps;
  lps.values = Eigen::Map<const Eigen::MatrixXd>(pred.data(), size, size);
  return lps;
}

void Save(const RegnetModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) Fail(ErrorCode::kIo, "regnet_save: cannot open " + path.string());
  out << kMagic << ' ' << kVersion << '\n';
  out << "layers " << model.sizes.size();
  for (int s : model.sizes) out << ' ' << s;
  out << "\ncolormap " << (model.colormap.empty() ? "-" : model.colormap);
  out << '\n' << std::hexfloat;
  out << "stats " << model.stats.mean.size();
  for (double v : model.stats.mean) out << ' ' << v;
  for (double v : model.stats.stddev) out << ' ' << v;
  out << '\n';
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    out << "layer " << l;
    for (Eigen::Index i = 0; i < model.weights[l].size(); ++i) out << ' ' << model.weights[l].data()[i];
    for (Eigen::Index i = 0; i < model.biases[l].size(); ++i) out << ' ' << model.biases[l].data()[i];
    out << '\n';
  }
  out << "end\n";
  if (!out) Fail(ErrorCode::kIo, "regnet_save: write failed for " + path.string());
}

namespace {

double ReadDouble(std::istream& in, const std::string& what) {
  std::string token;
  if (!(in >> token)) Fail(ErrorCode::kMalformed, "regnet_load: truncated file reading " + what);
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') {
    Fail(ErrorCode::kMalformed, "regnet_load: bad number '" + token + "' in " + what);
  }
  return v;
}

void Expect(std::istream& in, const std::string& word) {
  std::string token;
  if (!(in >> token)) Fail(ErrorCode::kMalformed, "regnet_load: truncated file, expected '" + word + "'");
  if (token != word) {
    Fail(ErrorCode::kMalformed, "regnet_load: expected '" + word + "', found '" + token + "'");
  }
}

}  // namespace

RegnetModel Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kNotFound, "regnet_load: cannot open " + path.string());
  std::string magic;
  int version = 0;
  if (!(in >> magic) || magic != kMagic) Fail(ErrorCode::kMalformed, "regnet_load: not a regnet file");
  if (!(in >> version)) Fail(ErrorCode::kMalformed, "regnet_load: missing version");
  if (version != kVersion) {
    Fail(ErrorCode::kVersionMismatch, "regnet_load: file version " + std::to_string(version) +
                                          ", expected " + std::to_string(kVersion));
  }
  Expect(in, "layers");
  std::size_t n_sizes = 0;
  if (!(in >> n_sizes) || n_sizes < 2 || n_sizes > 64) Fail(ErrorCode::kMalformed, "regnet_load: bad layer count");
  std::vector<int> sizes(n_sizes);
  for (int& s : sizes) {
    if (!(in >> s) || s <= 0 || s > 4096) Fail(ErrorCode::kMalformed, "regnet_load: bad layer size");
  }
  RegnetModel m = RegnetInit(0, sizes);
  Expect(in, "colormap");
  if (!(in >> m.colormap)) Fail(ErrorCode::kMalformed, "regnet_load: missing colormap");
  if (m.colormap == "-") m.colormap.clear();
  Expect(in, "stats");
  std::size_t n_stats = 0;
  if (!(in >> n_stats) || (n_stats != 0 && n_stats != static_cast<std::size_t>(sizes.front()))) {
    Fail(ErrorCode::kMalformed, "regnet_load: bad stats count");
  }
  m.stats.mean.resize(n_stats);
  m.stats.stddev.resize(n_stats);
  for (double& v : m.stats.mean) v = ReadDouble(in, "stats");
  for (double& v : m.stats.stddev) v = ReadDouble(in, "stats");
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    Expect(in, "layer");
    std::size_t idx = 0;
    if (!(in >> idx) || idx != l) Fail(ErrorCode::kMalformed, "regnet_load: layer index out of order");
    for (Eigen::Index i = 0; i < m.weights[l].size(); ++i) m.weights[l].data()[i] = ReadDouble(in, "weights");
    for (Eigen::Index i = 0; i < m.biases[l].size(); ++i) m.biases[l].data()[i] = ReadDouble(in, "biases");
  }
  Expect(in, "end");
  return m;
}

}  // namespace chroma_se::regnet
