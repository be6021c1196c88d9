// Copyright 2026 The chroma-se Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "chroma_se/unet.hpp"

#include <bit>
#include <cmath>
#include <json.hpp>

#include "chroma_se/error.hpp"
#include "chroma_se/lsd.hpp"
#include "chroma_se/random.hpp"

namespace chroma_se::unet {

namespace {

const LayerSpec kFullLayers[8] = {
    {64, 1, 2, 5, 7},  {128, 1, 2, 5, 7}, {256, 1, 2, 5, 7}, {512, 1, 2, 5, 5},
    {512, 2, 2, 5, 5}, {512, 2, 2, 3, 3}, {512, 2, 2, 3, 3}, {512, 2, 2, 3, 3},
};

std::span<const double> Slice(const std::vector<double>& v, std::size_t off, std::size_t n) {
  return std::span<const double>(v).subspan(off, n);
}
std::span<double> Slice(std::vector<double>& v, std::size_t off, std::size_t n) {
  return std::span<double>(v).subspan(off, n);
}

std::uint64_t LayerSeed(std::uint64_t seed, const LayerInfo& layer) {
  return MixSeed(seed, static_cast<std::uint64_t>(layer.index) * 2 +
                           (layer.kind == LayerKind::kDecoder ? 1 : 0));
}

void CheckFinite(const Tensor& t, const LayerInfo& layer, const char* stage) {
  if (!t.AllFinite()) {
    Fail(ErrorCode::kNumerical, "unet: non-finite " + std::string(stage) + " at layer " + layer.Name());
  }
}

}  // namespace

UNetConfig UNetConfig::Full(int divisor) {
  Require(divisor >= 1, ErrorCode::kInvalidArgument, "unet: scale_divisor must be >= 1");
  UNetConfig cfg;
  cfg.scale_divisor = divisor;
  for (const LayerSpec& spec : kFullLayers) {
    Require(spec.channels % divisor == 0, ErrorCode::kInvalidArgument,
            "unet: scale_divisor " + std::to_string(divisor) + " does not divide " +
                std::to_string(spec.channels));
    LayerSpec s = spec;
    s.channels /= divisor;
    cfg.encoder.push_back(s);
  }
  return cfg;
}

UNetConfig UNetConfig::Desk(int size, int divisor) {
  Require(size >= 16 && size <= 256 && std::has_single_bit(static_cast<unsigned>(size)),
          ErrorCode::kInvalidArgument,
          "unet: desk input size must be a power of two in [16, 256], got " + std::to_string(size));
  const UNetConfig full = Full(divisor);
  const int n12 = std::countr_zero(static_cast<unsigned>(size)) - 4;
  UNetConfig cfg = full;
  cfg.input_time = size;
  cfg.input_freq = size;
  cfg.encoder.clear();
  for (int i = 0; i < n12; ++i) cfg.encoder.push_back(full.encoder[static_cast<std::size_t>(i)]);
  for (int i = 4; i < 8; ++i) cfg.encoder.push_back(full.encoder[static_cast<std::size_t>(i)]);
  return cfg;
}

void UNetConfig::Validate() const {
  Require(in_channels >= 1 && out_channels >= 1, ErrorCode::kInvalidArgument,
          "unet: channel counts must be positive");
  Require(input_time >= 1 && input_freq >= 1, ErrorCode::kInvalidArgument,
          "unet: input size must be positive");
  Require(scale_divisor >= 1, ErrorCode::kInvalidArgument, "unet: scale_divisor must be >= 1");
  Require(!encoder.empty(), ErrorCode::kInvalidArgument, "unet: encoder is empty");
  Require(dropout_rate >= 0.0 && dropout_rate < 1.0, ErrorCode::kInvalidArgument,
          "unet: dropout rate must be in [0, 1)");
  Require(bn_eps > 0.0 && bn_momentum >= 0.0 && bn_momentum <= 1.0 && init_std >= 0.0,
          ErrorCode::kInvalidArgument, "unet: bad normalization/init constants");
  int t = input_time, f = input_freq;
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    const LayerSpec& s = encoder[i];
    const std::string name = "e" + std::to_string(i + 1);
    Require(s.channels >= 1 && s.kernel_t >= 1 && s.kernel_f >= 1, ErrorCode::kInvalidArgument,
            "unet: " + name + " has a non-positive channel or kernel size");
    Require((s.stride_t == 1 || s.stride_t == 2) && (s.stride_f == 1 || s.stride_f == 2),
            ErrorCode::kInvalidArgument, "unet: " + name + " strides must be 1 or 2");
    Require(t % s.stride_t == 0 && f % s.stride_f == 0, ErrorCode::kInvalidArgument,
            "unet: " + name + " stride does not divide its input " + std::to_string(t) + "x" +
                std::to_string(f));
    t /= s.stride_t;
    f /= s.stride_f;
  }
}

std::string UNetConfig::ToJson() const {
  nlohmann::ordered_json j;
  j["in_channels"] = in_channels;
  j["out_channels"] = out_channels;
  j["input_time"] = input_time;
  j["input_freq"] = input_freq;
  j["scale_divisor"] = scale_divisor;
  j["dropout_layers"] = dropout_layers;
  j["dropout_rate"] = dropout_rate;
  j["leaky_slope"] = leaky_slope;
  j["init_std"] = init_std;
  j["bn_eps"] = bn_eps;
  j["bn_momentum"] = bn_momentum;
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const LayerSpec& s : encoder) {
    layers.push_back({{"channels", s.channels},
                      {"stride", {s.stride_t, s.stride_f}},
                      {"kernel", {s.kernel_t, s.kernel_f}}});
  }
  j["encoder"] = layers;
  return j.dump(2);
}

UNetConfig UNetConfig::FromJson(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kMalformed, std::string("unet config: ") + e.what());
  }
  UNetConfig cfg;
  try {
    cfg.in_channels = j.value("in_channels", cfg.in_channels);
    cfg.out_channels = j.value("out_channels", cfg.out_channels);
    cfg.input_time = j.value("input_time", cfg.input_time);
    cfg.input_freq = j.value("input_freq", cfg.input_freq);
    cfg.scale_divisor = j.value("scale_divisor", cfg.scale_divisor);
    cfg.dropout_layers = j.value("dropout_layers", cfg.dropout_layers);
    cfg.dropout_rate = j.value("dropout_rate", cfg.dropout_rate);
    cfg.leaky_slope = j.value("leaky_slope", cfg.leaky_slope);
    cfg.init_std = j.value("init_std", cfg.init_std);
    cfg.bn_eps = j.value("bn_eps", cfg.bn_eps);
    cfg.bn_momentum = j.value("bn_momentum", cfg.bn_momentum);
    for (const auto& l : j.at("encoder")) {
      LayerSpec s;
      s.channels = l.at("channels").get<int>();
      s.stride_t = l.at("stride").at(0).get<int>();
      s.stride_f = l.at("stride").at(1).get<int>();
      s.kernel_t = l.at("kernel").at(0).get<int>();
      s.kernel_f = l.at("kernel").at(1).get<int>();
      cfg.encoder.push_back(s);
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kMalformed, std::string("unet config: ") + e.what());
  }
  cfg.Validate();
  return cfg;
}

std::string LayerInfo::Name() const {
  return (kind == LayerKind::kEncoder ? "e" : "d") + std::to_string(index);
}

std::vector<LayerInfo> ResolveLayers(const UNetConfig& cfg) {
  cfg.Validate();
  const std::size_t n = cfg.depth();
  std::vector<LayerInfo> layers;
  std::vector<nn::ConvGeometry> enc;
  std::size_t offset = 0, stat = 0;
  auto place = [&](LayerInfo& info, std::size_t bias_size) {
    info.w_offset = offset;
    info.w_size = info.geom.kernel_size();
    offset += info.w_size;
    info.b_offset = offset;
    info.b_size = bias_size;
    offset += bias_size;
    if (info.has_norm) {
      info.norm_size = bias_size;
      info.gamma_offset = offset;
      offset += bias_size;
      info.beta_offset = offset;
      offset += bias_size;
      info.stat_offset = stat;
      stat += bias_size;
    }
  };
  int t = cfg.input_time, f = cfg.input_freq, c = cfg.in_channels;
  for (std::size_t i = 0; i < n; ++i) {
    const LayerSpec& s = cfg.encoder[i];
    LayerInfo info;
    info.kind = LayerKind::kEncoder;
    info.index = static_cast<int>(i) + 1;
    info.geom = nn::MakeGeometry(c, s.channels, s.kernel_t, s.kernel_f, s.stride_t, s.stride_f, t, f);
    place(info, static_cast<std::size_t>(s.channels));
    enc.push_back(info.geom);
    layers.push_back(info);
    t = info.geom.out_t;
    f = info.geom.out_f;
    c = s.channels;
  }
  int in_c = c;
  for (std::size_t j = 1; j <= n; ++j) {
    const nn::ConvGeometry& mirror = enc[n - j];
    const bool last = j == n;
    const int out_c = last ? cfg.out_channels : enc[n - j - 1].out_c;
    LayerInfo info;
    info.kind = LayerKind::kDecoder;
    info.index = static_cast<int>(j);
    info.has_norm = !last;
    info.dropout = !last && static_cast<int>(j) <= cfg.dropout_layers && cfg.dropout_rate > 0.0;
    info.geom = nn::MakeGeometry(out_c, in_c, mirror.kt, mirror.kf, mirror.st, mirror.sf,
                                 mirror.in_t, mirror.in_f);
    place(info, static_cast<std::size_t>(out_c));
    layers.push_back(info);
    // Next decoder input: this output concatenated with the encoder output
    // at the same resolution.
    if (!last) in_c = out_c + enc[n - j - 1].out_c;
  }
  return layers;
}

UNetModel Build(const UNetConfig& cfg, std::uint64_t seed) {
  UNetModel m;
  m.config = cfg;
  m.layers = ResolveLayers(cfg);
  const LayerInfo& tail = m.layers.back();
  m.params.assign(tail.b_offset + tail.b_size, 0.0);
  std::size_t stats = 0;
  for (const LayerInfo& l : m.layers) {
    if (l.has_norm) {
      m.params.resize(std::max(m.params.size(), l.beta_offset + l.norm_size), 0.0);
      stats = std::max(stats, l.stat_offset + l.norm_size);
    }
  }
  m.running_mean.assign(stats, 0.0);
  m.running_var.assign(stats, 1.0);
  Rng rng(seed);
  for (const LayerInfo& l : m.layers) {
    for (std::size_t i = 0; i < l.w_size; ++i) m.params[l.w_offset + i] = rng.Normal(0.0, cfg.init_std);
    for (std::size_t i = 0; i < l.norm_size; ++i) m.params[l.gamma_offset + i] = 1.0;
  }
  return m;
}

std::vector<ShapeEntry> ShapeTrace(const UNetConfig& cfg) {
  std::vector<ShapeEntry> out;
  for (const LayerInfo& l : ResolveLayers(cfg)) {
    if (l.kind == LayerKind::kEncoder) {
      out.push_back({l.Name(), l.geom.out_c, l.geom.out_t, l.geom.out_f});
    } else {
      out.push_back({l.Name(), l.geom.in_c, l.geom.in_t, l.geom.in_f});
    }
  }
  return out;
}

namespace {

ParamCount CountLayers(const std::vector<LayerInfo>& layers) {
  ParamCount pc;
  for (const LayerInfo& l : layers) {
    pc.by_layer.emplace_back(l.Name(), l.ParameterCount());
    pc.total += l.ParameterCount();
  }
  return pc;
}

}  // namespace

ParamCount CountParams(const UNetModel& model) { return CountLayers(model.layers); }
ParamCount CountParams(const UNetConfig& cfg) { return CountLayers(ResolveLayers(cfg)); }

Tensor Forward(const UNetModel& model, const Tensor& x, Mode mode, std::uint64_t dropout_seed,
               ForwardTrace* trace) {
  const UNetConfig& cfg = model.config;
  Require(x.channels() == cfg.in_channels && x.time() == cfg.input_time && x.freq() == cfg.input_freq,
          ErrorCode::kShapeMismatch,
          "unet_forward: input " + x.ShapeString() + " does not match config (" +
              std::to_string(cfg.in_channels) + ", " + std::to_string(cfg.input_time) + ", " +
              std::to_string(cfg.input_freq) + ")");
  const std::size_t n = cfg.depth();
  ForwardTrace local;
  ForwardTrace& tr = trace != nullptr ? *trace : local;
  const bool keep = trace != nullptr;
  tr = ForwardTrace{};
  tr.mode = mode;
  const std::size_t total = model.layers.size();
  if (keep) {
    tr.inputs.resize(total);
    tr.norm.resize(total);
    tr.pre_act.resize(total);
    tr.masks.resize(total);
  }

  auto normalize = [&](const LayerInfo& l, const Tensor& z, nn::NormCache* cache) {
    const auto gamma = Slice(model.params, l.gamma_offset, l.norm_size);
    const auto beta = Slice(model.params, l.beta_offset, l.norm_size);
    if (mode == Mode::kTrain) return nn::BatchNormTrain(z, gamma, beta, cfg.bn_eps, cache);
    return nn::BatchNormEval(z, gamma, beta, Slice(model.running_mean, l.stat_offset, l.norm_size),
                             Slice(model.running_var, l.stat_offset, l.norm_size), cfg.bn_eps, cache);
  };

  std::vector<Tensor> skips;
  skips.reserve(n);
  Tensor h = x;
  for (std::size_t i = 0; i < n; ++i) {
    const LayerInfo& l = model.layers[i];
    Tensor z = nn::Conv2d(h, Slice(model.params, l.w_offset, l.w_size),
                          Slice(model.params, l.b_offset, l.b_size), l.geom);
    nn::NormCache cache;
    Tensor a = normalize(l, z, &cache);
    CheckFinite(a, l, "activation");
    Tensor out = nn::LeakyRelu(a, cfg.leaky_slope);
    if (keep) {
      tr.inputs[i] = std::move(h);
      tr.norm[i] = std::move(cache);
      tr.pre_act[i] = std::move(a);
    }
    skips.push_back(out);
    h = std::move(out);
  }
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t li = n + j - 1;
    const LayerInfo& l = model.layers[li];
    Tensor in = j == 1 ? skips[n - 1] : nn::ConcatChannels(h, skips[n - j]);
    Tensor z = nn::Conv2dTranspose(in, Slice(model.params, l.w_offset, l.w_size),
                                   Slice(model.params, l.b_offset, l.b_size), l.geom);
    if (keep) tr.inputs[li] = std::move(in);
    if (!l.has_norm) {
      CheckFinite(z, l, "output");
      h = std::move(z);
      continue;
    }
    nn::NormCache cache;
    Tensor a = normalize(l, z, &cache);
    std::vector<double> mask;
    if (l.dropout && mode == Mode::kTrain) {
      mask = nn::DropoutMask(a.size(), cfg.dropout_rate, LayerSeed(dropout_seed, l));
      for (std::size_t k = 0; k < a.size(); ++k) a.values()[k] *= mask[k];
    }
    CheckFinite(a, l, "activation");
    Tensor out = nn::LeakyRelu(a, 0.0);
    if (keep) {
      tr.norm[li] = std::move(cache);
      tr.pre_act[li] = std::move(a);
      tr.masks[li] = std::move(mask);
    }
    h = std::move(out);
  }
  if (keep) tr.output = h;
  return h;
}

void Backward(const UNetModel& model, const ForwardTrace& trace, const Tensor& d_output,
              std::vector<double>& grads) {
  const UNetConfig& cfg = model.config;
  const std::size_t n = cfg.depth();
  Require(trace.inputs.size() == model.layers.size(), ErrorCode::kState,
          "unet_backward: trace was not recorded");
  Require(grads.size() == model.params.size(), ErrorCode::kShapeMismatch,
          "unet_backward: gradient buffer size mismatch");
  Require(d_output.SameShape(trace.output), ErrorCode::kShapeMismatch,
          "unet_backward: output gradient shape mismatch");

  auto norm_backward = [&](const LayerInfo& l, std::size_t li, const Tensor& da) {
    const auto gamma = Slice(model.params, l.gamma_offset, l.norm_size);
    auto dg = Slice(grads, l.gamma_offset, l.norm_size);
    auto db = Slice(grads, l.beta_offset, l.norm_size);
    if (trace.mode == Mode::kTrain) return nn::BatchNormTrainBackward(trace.norm[li], gamma, da, dg, db);
    return nn::BatchNormEvalBackward(trace.norm[li], gamma, da, dg, db);
  };

  // Gradients flowing into encoder outputs through the skip connections.
  std::vector<Tensor> d_skip(n);
  Tensor dh = d_output;
  for (std::size_t j = n; j >= 1; --j) {
    const std::size_t li = n + j - 1;
    const LayerInfo& l = model.layers[li];
    CheckFinite(dh, l, "gradient");
    Tensor dz;
    if (!l.has_norm) {
      dz = std::move(dh);
    } else {
      Tensor da = nn::LeakyReluBackward(trace.pre_act[li], dh, 0.0);
      if (!trace.masks[li].empty()) {
        for (std::size_t k = 0; k < da.size(); ++k) da.values()[k] *= trace.masks[li][k];
      }
      dz = norm_backward(l, li, da);
    }
    Tensor din;
    nn::Conv2dTransposeBackward(trace.inputs[li], Slice(model.params, l.w_offset, l.w_size), l.geom,
                                dz, &din, Slice(grads, l.w_offset, l.w_size),
                                Slice(grads, l.b_offset, l.b_size));
    if (j == 1) {
      d_skip[n - 1] = std::move(din);
    } else {
      const int prev_c = model.layers[li - 1].geom.in_c;
      Tensor skip_part;
      nn::SplitChannels(din, prev_c, &dh, &skip_part);
      d_skip[n - j] = std::move(skip_part);
    }
  }
  Tensor d_next;  // gradient w.r.t. output of encoder layer i from layer i+1
  for (std::size_t i = n; i-- > 0;) {
    const LayerInfo& l = model.layers[i];
    Tensor dout = std::move(d_skip[i]);
    if (!d_next.empty()) {
      for (std::size_t k = 0; k < dout.size(); ++k) dout.values()[k] += d_next.values()[k];
    }
    CheckFinite(dout, l, "gradient");
    Tensor da = nn::LeakyReluBackward(trace.pre_act[i], dout, cfg.leaky_slope);
    Tensor dz = norm_backward(l, i, da);
    Tensor* dx = i > 0 ? &d_next : nullptr;
    nn::Conv2dBackward(trace.inputs[i], Slice(model.params, l.w_offset, l.w_size), l.geom, dz, dx,
                       Slice(grads, l.w_offset, l.w_size), Slice(grads, l.b_offset, l.b_size));
  }
}

double LsdLoss(const Tensor& reference, const Tensor& estimate) {
  Require(reference.SameShape(estimate), ErrorCode::kShapeMismatch,
          "lsd_loss: shape mismatch " + reference.ShapeString() + " vs " + estimate.ShapeString());
  Require(!reference.empty(), ErrorCode::kInvalidArgument, "lsd_loss: empty tensors");
  double total = 0.0;
  for (int c = 0; c < reference.channels(); ++c) {
    total += LsdCore(reference.channel(c).data(), estimate.channel(c).data(),
                     static_cast<std::size_t>(reference.time()), static_cast<std::size_t>(reference.freq()));
  }
  return total / reference.channels();
}

Tensor LsdLossGradient(const Tensor& reference, const Tensor& estimate) {
  Require(reference.SameShape(estimate), ErrorCode::kShapeMismatch, "lsd_loss: shape mismatch");
  Tensor g(estimate.channels(), estimate.time(), estimate.freq());
  for (int c = 0; c < estimate.channels(); ++c) {
    LsdCoreGradient(estimate.channel(c).data(), reference.channel(c).data(),
                    static_cast<std::size_t>(estimate.time()), static_cast<std::size_t>(estimate.freq()),
                    1.0 / estimate.channels(), g.channel(c).data());
  }
  return g;
}

LossAndGrad ComputeLossAndGrad(const UNetModel& model, const Tensor& input, const Tensor& target,
                               Mode mode, std::uint64_t dropout_seed) {
  LossAndGrad out;
  const Tensor y = Forward(model, input, mode, dropout_seed, &out.trace);
  out.loss = LsdLoss(target, y);
  if (!std::isfinite(out.loss)) Fail(ErrorCode::kNumerical, "unet: non-finite loss");
  out.grads.assign(model.params.size(), 0.0);
  Backward(model, out.trace, LsdLossGradient(target, y), out.grads);
  return out;
}

void UpdateRunningStats(UNetModel& model, const ForwardTrace& trace) {
  if (trace.mode != Mode::kTrain) return;
  const double m = model.config.bn_momentum;
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    const LayerInfo& l = model.layers[li];
    if (!l.has_norm) continue;
    const nn::NormCache& nc = trace.norm[li];
    for (std::size_t c = 0; c < l.norm_size; ++c) {
      double& rm = model.running_mean[l.stat_offset + c];
      double& rv = model.running_var[l.stat_offset + c];
      rm = (1.0 - m) * rm + m * nc.mean[c];
      rv = (1.0 - m) * rv + m * nc.var[c];
    }
  }
}

}  // namespace chroma_se::unet
