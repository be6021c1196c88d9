// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "chroma_se/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "chroma_se/error.hpp"
#include "chroma_se/random.hpp"

namespace chroma_se::unet {

namespace {

constexpr char kMagic[8] = {'C', 'S', 'E', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) Fail(ErrorCode::kIo, "checkpoint: cannot open " + path.string());
  }
  template <typename T>
  void Pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void Bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void Doubles(const std::vector<double>& v) {
    Pod<std::uint64_t>(v.size());
    Bytes(v.data(), v.size() * sizeof(double));
  }
  void Finish() {
    out_.flush();
    if (!out_) Fail(ErrorCode::kIo, "checkpoint: write failed for " + path_.string());
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) Fail(ErrorCode::kNotFound, "checkpoint: cannot open " + path.string());
  }
  void Bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) Fail(ErrorCode::kMalformed, "checkpoint: truncated file");
  }
  template <typename T>
  T Pod() {
    T v{};
    Bytes(&v, sizeof(T));
    return v;
  }
  std::vector<double> Doubles(std::size_t expected) {
    const auto n = Pod<std::uint64_t>();
    if (n != expected) {
      Fail(ErrorCode::kShapeMismatch, "checkpoint: array of " + std::to_string(n) +
                                          " values, expected " + std::to_string(expected));
    }
    std::vector<double> v(n);
    Bytes(v.data(), n * sizeof(double));
    return v;
  }
  bool AtEnd() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::ifstream in_;
};

}  // namespace

void AdamStep(AdamState& state, std::span<double> params, std::span<const double> grads) {
  Require(params.size() == grads.size(), ErrorCode::kShapeMismatch, "adam: params/grads size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  Require(state.m.size() == params.size() && state.v.size() == params.size(),
          ErrorCode::kShapeMismatch, "adam: moment size mismatch");
  ++state.t;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    params[i] -= state.learning_rate * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + state.eps);
  }
}

void TrainRunConfig::Validate() const {
  Require(steps >= 0, ErrorCode::kInvalidArgument, "train: steps must be >= 0");
  Require(batch_size >= 1, ErrorCode::kInvalidArgument, "train: batch size must be >= 1");
  Require(learning_rate > 0.0 && beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0,
          ErrorCode::kInvalidArgument, "train: bad optimizer constants");
  Require(checkpoint_interval >= 0, ErrorCode::kInvalidArgument, "train: checkpoint interval must be >= 0");
  Require(checkpoint_interval == 0 || !checkpoint_dir.empty(), ErrorCode::kInvalidArgument,
          "train: checkpoint interval set without a checkpoint directory");
}

std::string TrainRunConfig::ToJson() const {
  nlohmann::ordered_json j;
  j["steps"] = steps;
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  j["learning_rate"] = learning_rate;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["eps"] = eps;
  j["checkpoint_interval"] = checkpoint_interval;
  j["checkpoint_dir"] = checkpoint_dir.string();
  j["loss"] = "lsd";
  return j.dump(2);
}

TrainRunConfig TrainRunConfig::FromJson(const std::string& text) {
  TrainRunConfig cfg;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    cfg.steps = j.value("steps", cfg.steps);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.beta1 = j.value("beta1", cfg.beta1);
    cfg.beta2 = j.value("beta2", cfg.beta2);
    cfg.eps = j.value("eps", cfg.eps);
    cfg.checkpoint_interval = j.value("checkpoint_interval", cfg.checkpoint_interval);
    cfg.checkpoint_dir = j.value("checkpoint_dir", std::string());
    const std::string loss = j.value("loss", std::string("lsd"));
    Require(loss == "lsd", ErrorCode::kUnsupported, "train config: only the lsd loss is supported");
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kMalformed, std::string("train config: ") + e.what());
  }
  cfg.Validate();
  return cfg;
}

TrainState InitTrainState(UNetModel model, const TrainRunConfig& cfg) {
  TrainState s;
  s.model = std::move(model);
  s.optimizer.learning_rate = cfg.learning_rate;
  s.optimizer.beta1 = cfg.beta1;
  s.optimizer.beta2 = cfg.beta2;
  s.optimizer.eps = cfg.eps;
  return s;
}

std::vector<LossPoint> TrainDenoiser(TrainState& state, std::span<const TrainingPair> data,
                                     const TrainRunConfig& cfg,
                                     const std::function<void(const LossPoint&)>& on_step) {
  cfg.Validate();
  std::vector<LossPoint> curve;
  if (state.step >= cfg.steps) return curve;
  Require(!data.empty(), ErrorCode::kInvalidArgument, "train: dataset is empty");
  for (const TrainingPair& p : data) {
    Require(p.input.SameShape(p.target), ErrorCode::kShapeMismatch, "train: input/target shape mismatch");
  }
  if (cfg.checkpoint_interval > 0) std::filesystem::create_directories(cfg.checkpoint_dir);
  std::vector<double> grads(state.model.params.size());
  while (state.step < cfg.steps) {
    const std::int64_t step = state.step + 1;
    Rng rng(MixSeed(cfg.seed, static_cast<std::uint64_t>(step)));
    std::fill(grads.begin(), grads.end(), 0.0);
    double loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const TrainingPair& pair = data[rng.Below(data.size())];
      const std::uint64_t dropout_seed = rng.NextU64();
      LossAndGrad lg = ComputeLossAndGrad(state.model, pair.input, pair.target, Mode::kTrain, dropout_seed);
      if (!std::isfinite(lg.loss)) {
        Fail(ErrorCode::kNumerical, "train: non-finite loss at step " + std::to_string(step));
      }
      loss += lg.loss;
      for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += lg.grads[i];
      UpdateRunningStats(state.model, lg.trace);
    }
    const double inv = 1.0 / cfg.batch_size;
    for (double& g : grads) g *= inv;
    loss *= inv;
    AdamStep(state.optimizer, state.model.params, grads);
    state.step = step;
    const LossPoint point{step, loss};
    curve.push_back(point);
    if (on_step) on_step(point);
    if (cfg.checkpoint_interval > 0 && step % cfg.checkpoint_interval == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%08lld.ckpt", static_cast<long long>(step));
      SaveCheckpoint(state, cfg.checkpoint_dir / name);
    }
  }
  return curve;
}

void SaveCheckpoint(const TrainState& state, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    Writer w(tmp);
    w.Bytes(kMagic, sizeof kMagic);
    w.Pod(kVersion);
    const std::string cfg = state.model.config.ToJson();
    w.Pod<std::uint64_t>(cfg.size());
    w.Bytes(cfg.data(), cfg.size());
    w.Doubles(state.model.params);
    w.Doubles(state.model.running_mean);
    w.Doubles(state.model.running_var);
    const AdamState& o = state.optimizer;
    w.Pod(o.learning_rate);
    w.Pod(o.beta1);
    w.Pod(o.beta2);
    w.Pod(o.eps);
    w.Pod<std::int64_t>(o.t);
    w.Pod<std::uint8_t>(o.m.empty() ? 0 : 1);
    if (!o.m.empty()) {
      w.Doubles(o.m);
      w.Doubles(o.v);
    }
    w.Pod<std::int64_t>(state.step);
    w.Pod<std::uint64_t>(state.colormap.size());
    w.Bytes(state.colormap.data(), state.colormap.size());
    w.Finish();
  }
  std::filesystem::rename(tmp, path);
}

TrainState LoadCheckpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[8];
  r.Bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) {
    Fail(ErrorCode::kMalformed, "checkpoint: " + path.string() + " is not a checkpoint file");
  }
  const auto version = r.Pod<std::uint32_t>();
  if (version != kVersion) {
    Fail(ErrorCode::kVersionMismatch, "checkpoint: file version " + std::to_string(version) +
                                          ", expected " + std::to_string(kVersion));
  }
  const auto cfg_len = r.Pod<std::uint64_t>();
  Require(cfg_len < (1u << 20), ErrorCode::kMalformed, "checkpoint: config block too large");
  std::string cfg_text(cfg_len, '\0');
  r.Bytes(cfg_text.data(), cfg_len);
  TrainState s;
  s.model = Build(UNetConfig::FromJson(cfg_text), 0);
  s.model.params = r.Doubles(s.model.params.size());
  s.model.running_mean = r.Doubles(s.model.running_mean.size());
  s.model.running_var = r.Doubles(s.model.running_var.size());
  AdamState& o = s.optimizer;
  o.learning_rate = r.Pod<double>();
  o.beta1 = r.Pod<double>();
  o.beta2 = r.Pod<double>();
  o.eps = r.Pod<double>();
  o.t = r.Pod<std::int64_t>();
  if (r.Pod<std::uint8_t>() != 0) {
    o.m = r.Doubles(s.model.params.size());
    o.v = r.Doubles(s.model.params.size());
  }
  s.step = r.Pod<std::int64_t>();
  const auto cmap_len = r.Pod<std::uint64_t>();
  Require(cmap_len < 256, ErrorCode::kMalformed, "checkpoint: colormap name too long");
  s.colormap.assign(cmap_len, '\0');
  r.Bytes(s.colormap.data(), cmap_len);
  Require(r.AtEnd(), ErrorCode::kMalformed, "checkpoint: trailing bytes");
  return s;
}

TrainState LoadCheckpoint(const std::filesystem::path& path, const UNetConfig& expected) {
  TrainState s = LoadCheckpoint(path);
  Require(s.model.config == expected, ErrorCode::kShapeMismatch,
          "checkpoint: " + path.string() + " was written for a different network config");
  return s;
}

void WriteLossCsv(std::span<const LossPoint> curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) Fail(ErrorCode::kIo, "loss csv: cannot open " + path.string());
  out << "step,loss\n";
  char buf[64];
  for (const LossPoint& p : curve) {
    std::snprintf(buf, sizeof buf, "%.17g", p.loss);
    out << p.step << ',' << buf << '\n';
  }
  if (!out) Fail(ErrorCode::kIo, "loss csv: write failed for " + path.string());
}

}  // namespace chroma_se::unet
