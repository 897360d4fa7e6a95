#include "ghostsr/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ghostsr/errors.hpp"
#include "ghostsr/ops.hpp"

namespace ghostsr {

namespace {

Tensor<float> kaiming_uniform(const Shape& shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor<float> t(shape);
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-bound, bound));
  return t;
}

Tensor<float> zero_proxy(const GhostLayerSpec& spec) {
  const std::size_t K = grid_size(spec.d);
  return Tensor<float>(Shape{spec.proxy_count(), 1, K, K}, 0.0f);
}

TensorEntry int_entry(const std::vector<int>& v) {
  TensorEntry e;
  e.dims = {v.size()};
  e.data = std::vector<std::int32_t>(v.begin(), v.end());
  return e;
}

std::vector<int> read_ints(const Checkpoint& ck, const std::string& name) {
  const TensorEntry& e = ck.entry(name);
  const auto* v = std::get_if<std::vector<std::int32_t>>(&e.data);
  if (!v || e.dims.size() != 1) throw ValidationError("checkpoint tensor '" + name + "' must be a rank-1 i32 array");
  return {v->begin(), v->end()};
}

/// Names of the layers that run at the configured scale.
std::set<std::string> active_layers(const ModelConfig& config) {
  std::set<std::string> active{"input"};
  std::set<std::string> out;
  for (const auto& l : config.layers) {
    if (l.annotation == Annotation::Inactive) continue;
    bool ok = true;
    for (const auto& in : l.inputs) ok = ok && active.contains(in);
    if (!ok) continue;
    active.insert(l.name);
    out.insert(l.name);
  }
  return out;
}

}  // namespace

Network Network::assemble(ModelConfig config, std::map<std::string, LayerParams> params) {
  return Network(std::move(config), std::move(params));
}

Network::Network(ModelConfig config, std::map<std::string, LayerParams> params)
    : config_(std::move(config)), params_(std::move(params)) {
  check();
}

LayerParams& Network::params(const std::string& layer) {
  auto it = params_.find(layer);
  if (it == params_.end()) throw NotFound("network has no conv layer '" + layer + "'");
  return it->second;
}

const LayerParams& Network::params(const std::string& layer) const {
  auto it = params_.find(layer);
  if (it == params_.end()) throw NotFound("network has no conv layer '" + layer + "'");
  return it->second;
}

GhostLayerSpec Network::ghost_spec(const LayerDef& layer) const {
  GhostLayerSpec spec;
  spec.conv = layer.conv;
  spec.ratio = layer.converted() ? *layer.ghost_ratio : 0.0;
  spec.d = config_.shift.d;
  spec.tau = config_.shift.tau;
  spec.shared = config_.shift.shared;
  if (layer.converted()) {
    const LayerParams& p = params(layer.name);
    spec.assignment = p.assignment;
    spec.permutation = p.permutation;
  }
  return spec;
}

void Network::check() const {
  config_.validate();
  for (const auto& l : config_.layers) {
    if (!l.is_conv()) continue;
    auto it = params_.find(l.name);
    if (it == params_.end()) throw ValidationError("no parameters for layer '" + l.name + "'");
    const LayerParams& p = it->second;
    const GhostLayerSpec spec = ghost_spec(l);
    const ConvSpec conv = spec.intrinsic_conv();
    auto bad = [&](const std::string& msg) { throw ValidationError("layer '" + l.name + "': " + msg); };
    if (!(p.weight.shape() == conv.weight_shape())) {
      bad("weight shape " + p.weight.shape().str() + " expected " + conv.weight_shape().str());
    }
    if (conv.bias != p.bias.has_value()) bad("bias presence disagrees with the config");
    if (p.bias && !(p.bias->shape() == conv.bias_shape())) bad("bias shape " + p.bias->shape().str());
    if (!l.converted()) {
      if (!p.assignment.empty() || !p.permutation.empty() || p.proxy || p.offsets) {
        bad("shift state on a layer that is not converted");
      }
      continue;
    }
    try {
      spec.validate();
    } catch (const std::invalid_argument& e) {
      bad(e.what());
    }
    if (p.proxy && p.offsets) bad("has both shift proxies and hardened offsets");
    if (!p.proxy && !p.offsets) bad("has neither shift proxies nor hardened offsets");
    if (p.proxy && !(p.proxy->shape() == zero_proxy(spec).shape())) bad("proxy shape " + p.proxy->shape().str());
    if (p.offsets) {
      if (p.offsets->size() != spec.proxy_count()) bad("wrong number of hardened offsets");
      for (const Offset& o : *p.offsets) {
        try {
          check_offset(o, spec.d);
        } catch (const std::invalid_argument& e) {
          bad(e.what());
        }
      }
    }
  }
  if (params_.size() != static_cast<std::size_t>(std::count_if(config_.layers.begin(), config_.layers.end(),
                                                                [](const LayerDef& l) { return l.is_conv(); }))) {
    throw ValidationError("parameters present for layers the config does not define");
  }
}

bool Network::frozen() const {
  return std::none_of(params_.begin(), params_.end(), [](const auto& kv) { return kv.second.proxy.has_value(); });
}

double Network::ratio() const {
  for (const auto& l : config_.layers) {
    if (l.converted()) return *l.ghost_ratio;
  }
  return 0.0;
}

Network Network::random_init(ModelConfig config, Rng& rng) {
  config.validate();
  std::map<std::string, LayerParams> params;
  for (const auto& l : config.layers) {
    if (!l.is_conv()) continue;
    GhostLayerSpec spec;
    spec.conv = l.conv;
    spec.ratio = l.converted() ? *l.ghost_ratio : 0.0;
    spec.d = config.shift.d;
    spec.shared = config.shift.shared;
    const ConvSpec conv = spec.intrinsic_conv();
    const std::size_t fan_in = conv.c_i * conv.s * conv.s;
    LayerParams p;
    p.weight = kaiming_uniform(conv.weight_shape(), fan_in, rng);
    if (conv.bias) p.bias = kaiming_uniform(conv.bias_shape(), fan_in, rng);
    if (l.converted()) {
      GhostAssignment split = scratch_assignment(l.conv.c_o, spec.ratio);
      p.assignment = std::move(split.assignment);
      p.permutation = std::move(split.permutation);
      p.proxy = zero_proxy(spec);
    }
    params.emplace(l.name, std::move(p));
  }
  return Network(std::move(config), std::move(params));
}

Checkpoint Network::to_checkpoint() const {
  Checkpoint ck;
  ck.meta.config_hash = config_.hash();
  ck.meta.ratio = ratio();
  ck.meta.d = config_.shift.d;
  ck.meta.scale = static_cast<std::uint32_t>(config_.scale);
  ck.meta.model = config_.name;
  ck.meta.config_text = config_.to_text();
  for (const auto& [name, p] : params_) {
    ck.put(name + ".weight", p.weight);
    if (p.bias) ck.put(name + ".bias", *p.bias);
    if (!p.assignment.empty()) ck.put(name + ".assign", int_entry(p.assignment));
    if (!p.permutation.empty()) ck.put(name + ".perm", int_entry(p.permutation));
    if (p.proxy) ck.put(name + ".proxy", *p.proxy);
    if (p.offsets) {
      TensorEntry e;
      e.dims = {p.offsets->size(), 2};
      std::vector<std::int8_t> raw;
      for (const Offset& o : *p.offsets) {
        raw.push_back(static_cast<std::int8_t>(o.di));
        raw.push_back(static_cast<std::int8_t>(o.dj));
      }
      e.data = std::move(raw);
      ck.put(name + ".offsets", std::move(e));
    }
  }
  return ck;
}

Network Network::from_checkpoint(const Checkpoint& ck) {
  if (ck.meta.config_text.empty()) throw ValidationError("checkpoint does not embed its model config");
  return from_checkpoint(ModelConfig::parse(ck.meta.config_text), ck);
}

Network Network::from_checkpoint(ModelConfig config, const Checkpoint& ck) {
  config.validate();
  if (ck.meta.config_hash != config.hash()) {
    throw ValidationError("checkpoint was written for a different config (hash mismatch with '" + config.name + "')");
  }
  std::set<std::string> used;
  auto take = [&](const std::string& n) {
    used.insert(n);
    return n;
  };
  std::map<std::string, LayerParams> params;
  for (const auto& l : config.layers) {
    if (!l.is_conv()) continue;
    LayerParams p;
    p.weight = ck.get_float(take(l.name + ".weight"));
    if (l.conv.bias) p.bias = ck.get_float(take(l.name + ".bias"));
    if (l.converted()) {
      p.assignment = read_ints(ck, take(l.name + ".assign"));
      p.permutation = read_ints(ck, take(l.name + ".perm"));
      if (ck.contains(l.name + ".proxy")) p.proxy = ck.get_float(take(l.name + ".proxy"));
      if (ck.contains(l.name + ".offsets")) {
        const std::string n = take(l.name + ".offsets");
        const TensorEntry& e = ck.entry(n);
        const auto* raw = std::get_if<std::vector<std::int8_t>>(&e.data);
        if (!raw || e.dims.size() != 2 || e.dims[1] != 2) {
          throw ValidationError("checkpoint tensor '" + n + "' must be an (n, 2) i8 array");
        }
        std::vector<Offset> offsets;
        for (std::size_t i = 0; i < raw->size(); i += 2) offsets.push_back(Offset{(*raw)[i], (*raw)[i + 1]});
        p.offsets = std::move(offsets);
      }
    }
    params.emplace(l.name, std::move(p));
  }
  for (const auto& [name, e] : ck.entries()) {
    if (!used.contains(name)) throw ValidationError("checkpoint has unexpected tensor '" + name + "'");
  }
  return Network(std::move(config), std::move(params));
}

ForwardResult Network::forward(Tape<float>& tape, Var input, const ForwardOptions& options) const {
  const Shape& in_shape = tape.shape(input);
  if (in_shape.c != 3) {
    throw std::invalid_argument("network input must have 3 channels, got " + std::to_string(in_shape.c));
  }
  const bool sampled = options.mode != ShiftMode::Inference && options.noise == NoiseMode::Sampled;
  if (sampled && !options.rng && !frozen()) throw std::invalid_argument("sampled shift noise needs an rng");

  ForwardResult result;
  std::array<float, 3> neg_mean{};
  std::array<float, 3> pos_mean{};
  for (std::size_t c = 0; c < 3; ++c) {
    pos_mean[c] = static_cast<float>(config_.rgb_mean[c]);
    neg_mean[c] = -pos_mean[c];
  }
  std::map<std::string, Var> nodes;
  nodes["input"] = add_channel_constant(tape, input, std::span<const float>(neg_mean));
  const std::set<std::string> active = active_layers(config_);

  for (const auto& l : config_.layers) {
    if (!active.contains(l.name)) continue;
    std::vector<Var> in;
    for (const auto& name : l.inputs) in.push_back(nodes.at(name));
    Var y;
    switch (l.kind) {
      case LayerKind::Conv: {
        const LayerParams& p = params(l.name);
        Var w = tape.parameter(p.weight);
        result.params[l.name + ".weight"] = w;
        std::optional<Var> b;
        if (p.bias) {
          b = tape.parameter(*p.bias);
          result.params[l.name + ".bias"] = *b;
        }
        if (!l.converted()) {
          y = conv2d(tape, in[0], w, b, l.conv);
          break;
        }
        GhostShiftState<float> state;
        state.offsets = p.offsets;
        if (p.proxy && !p.offsets) {
          state.proxy = tape.parameter(*p.proxy);
          result.params[l.name + ".proxy"] = *state.proxy;
          state.noise = options.mode != ShiftMode::Inference && options.noise == NoiseMode::Sampled
                            ? gumbel_noise<float>(p.proxy->shape(), *options.rng)
                            : Tensor<float>(p.proxy->shape(), 0.0f);
        }
        y = ghost_layer_forward(tape, in[0], ghost_spec(l), w, b, options.mode, state);
        break;
      }
      case LayerKind::Relu: y = relu(tape, in[0]); break;
      case LayerKind::LeakyRelu: y = leaky_relu(tape, in[0], static_cast<float>(l.value)); break;
      case LayerKind::Scale: y = scalar_mul(tape, in[0], static_cast<float>(l.value)); break;
      case LayerKind::Add: y = add(tape, in[0], in[1]); break;
      case LayerKind::Concat: y = concat_channels(tape, std::span<const Var>(in)); break;
      case LayerKind::Slice: y = slice_channels(tape, in[0], l.start, l.count); break;
      case LayerKind::PixelShuffle: y = pixel_shuffle(tape, in[0], l.factor); break;
    }
    nodes[l.name] = y;
  }
  result.output = add_channel_constant(tape, nodes.at(config_.output_name()), std::span<const float>(pos_mean));
  return result;
}

Tensor<float> forward_sr(const Network& network, const Tensor<float>& lr) {
  if (lr.shape().c != 3) {
    throw std::invalid_argument("forward_sr expects a 3-channel image, got " + std::to_string(lr.shape().c));
  }
  Tape<float> tape(false);
  Var x = tape.constant(lr);
  ForwardResult r = network.forward(tape, x, ForwardOptions{});
  Tensor<float> out = tape.value(r.output);
  for (float& v : out.values()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

Network freeze(const Network& network) {
  std::map<std::string, LayerParams> params = network.layers();
  for (auto& [name, p] : params) {
    if (!p.proxy) continue;
    p.offsets = harden_all(*p.proxy);
    p.proxy.reset();
  }
  return Network::assemble(network.config(), std::move(params));
}

Network convert_to_ghost(const Network& pretrained, double ratio, const ConversionPlan* plan) {
  const ModelConfig& src = pretrained.config();
  for (const auto& l : src.layers) {
    if (l.converted()) throw ValidationError("layer '" + l.name + "' is already converted");
  }
  if (ratio == 0.0) return pretrained;
  if (plan) {
    if (std::abs(plan->ratio - ratio) > 1e-12) {
      throw ValidationError("plan was built for ratio " + std::to_string(plan->ratio) + ", not " +
                            std::to_string(ratio));
    }
    for (const auto& lp : plan->layers) {
      const LayerDef* l = src.find(lp.name);
      if (!l || l->annotation != Annotation::Ghost) {
        throw ValidationError("plan layer '" + lp.name + "' is not a ghost-eligible layer of " + src.name);
      }
    }
  }

  ModelConfig config = with_ghost_ratio(src, ratio);
  std::map<std::string, LayerParams> params;
  for (const auto& l : config.layers) {
    if (!l.is_conv()) continue;
    const LayerParams& old = pretrained.params(l.name);
    if (!l.converted()) {
      params.emplace(l.name, old);
      continue;
    }
    GhostAssignment split;
    if (plan) {
      const LayerPlan* lp = plan->find(l.name);
      if (!lp) throw ValidationError("plan has no entry for ghost layer '" + l.name + "'");
      if (lp->c_o != l.conv.c_o) {
        throw ValidationError("plan layer '" + l.name + "' has " + std::to_string(lp->c_o) + " output channels, config " +
                              std::to_string(l.conv.c_o));
      }
      split = lp->split;
    } else {
      split = scratch_assignment(l.conv.c_o, ratio);
    }
    const std::size_t k = l.conv.c_o - ghost_count(l.conv.c_o, ratio);
    if (split.permutation.size() != l.conv.c_o || split.assignment.size() != l.conv.c_o - k) {
      throw ValidationError("plan layer '" + l.name + "' does not match the ratio split");
    }
    const std::size_t per_filter = l.conv.c_i * l.conv.s * l.conv.s;
    LayerParams p;
    p.weight = Tensor<float>(Shape{k, l.conv.c_i, l.conv.s, l.conv.s});
    for (std::size_t i = 0; i < k; ++i) {
      const auto srcf = static_cast<std::size_t>(split.permutation[i]);
      std::copy_n(old.weight.data() + srcf * per_filter, per_filter, p.weight.data() + i * per_filter);
    }
    if (old.bias) {
      p.bias = Tensor<float>(Shape{1, k, 1, 1});
      for (std::size_t i = 0; i < k; ++i) p.bias->values()[i] = old.bias->values()[split.permutation[i]];
    }
    p.assignment = split.assignment;
    p.permutation = split.permutation;
    GhostLayerSpec spec;
    spec.conv = l.conv;
    spec.ratio = ratio;
    spec.d = config.shift.d;
    spec.shared = config.shift.shared;
    p.proxy = zero_proxy(spec);
    params.emplace(l.name, std::move(p));
  }
  return Network::assemble(std::move(config), std::move(params));
}

ConversionPlan make_plan(const Network& pretrained, double ratio, Rng& rng, int max_iters) {
  ConversionPlan plan;
  plan.ratio = ratio;
  for (const auto& l : pretrained.config().layers) {
    if (l.annotation != Annotation::Ghost) continue;
    if (l.converted()) throw ValidationError("layer '" + l.name + "' is already converted");
    plan.layers.push_back(cluster_layer(l.name, pretrained.params(l.name).weight, ratio, rng, max_iters));
  }
  return plan;
}

}  // namespace ghostsr
