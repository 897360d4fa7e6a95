#include "ghostsr/config.hpp"

#include <charconv>
#include <functional>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "ghostsr/errors.hpp"
#include "ghostsr/shift.hpp"

namespace ghostsr {

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Relu: return "relu";
    case LayerKind::LeakyRelu: return "lrelu";
    case LayerKind::Add: return "add";
    case LayerKind::Scale: return "scale";
    case LayerKind::Concat: return "concat";
    case LayerKind::Slice: return "slice";
    case LayerKind::PixelShuffle: return "pixel_shuffle";
  }
  return "?";
}

std::optional<LayerKind> parse_kind(const std::string& s) {
  static const std::map<std::string, LayerKind> kinds{
      {"conv", LayerKind::Conv},   {"relu", LayerKind::Relu},     {"lrelu", LayerKind::LeakyRelu},
      {"add", LayerKind::Add},     {"scale", LayerKind::Scale},   {"concat", LayerKind::Concat},
      {"slice", LayerKind::Slice}, {"pixel_shuffle", LayerKind::PixelShuffle}};
  auto it = kinds.find(s);
  if (it == kinds.end()) return std::nullopt;
  return it->second;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> tokens(std::string_view s) {
  std::istringstream ss{std::string(s)};
  std::vector<std::string> out;
  std::string t;
  while (ss >> t) out.push_back(t);
  return out;
}

}  // namespace

const std::string& ModelConfig::output_name() const {
  if (!output.empty()) return output;
  if (layers.empty()) throw ValidationError("model " + name + " has no layers");
  return layers.back().name;
}

const LayerDef* ModelConfig::find(std::string_view layer_name) const {
  for (const auto& l : layers) {
    if (l.name == layer_name) return &l;
  }
  return nullptr;
}

const LayerDef& ModelConfig::layer(std::string_view layer_name) const {
  if (const auto* l = find(layer_name)) return *l;
  throw NotFound("model " + name + " has no layer '" + std::string(layer_name) + "'");
}

std::vector<NodeShape> ModelConfig::infer_shapes() const {
  auto fail = [&](const std::string& where, const std::string& msg) -> void {
    throw ValidationError("model " + name + ", layer " + where + ": " + msg);
  };
  if (scale < 1 || scale > 8) throw ValidationError("model " + name + ": scale must be in [1, 8]");
  if (shift.d < 0) throw ValidationError("model " + name + ": shift_d must be >= 0");
  if (!(shift.tau > 0)) throw ValidationError("model " + name + ": shift_tau must be > 0");
  if (layers.empty()) throw ValidationError("model " + name + " has no layers");

  std::unordered_map<std::string, std::size_t> index;
  std::vector<NodeShape> shapes(layers.size());
  std::vector<bool> inactive(layers.size(), false);
  const NodeShape input_shape{3, 1};

  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerDef& l = layers[i];
    if (l.name.empty() || l.name == "input" || l.name.find_first_of(" \t|") != std::string::npos) {
      fail(l.name, "invalid layer name");
    }
    if (index.contains(l.name)) fail(l.name, "duplicate layer name");

    std::vector<NodeShape> in;
    for (const auto& src : l.inputs) {
      if (src == "input") {
        in.push_back(input_shape);
        continue;
      }
      auto it = index.find(src);
      if (it == index.end()) fail(l.name, "input '" + src + "' is not defined earlier");
      if (inactive[it->second]) {
        if (l.is_conv() && l.annotation != Annotation::Inactive) fail(l.name, "consumes inactive layer '" + src + "'");
        inactive[i] = true;
      }
      in.push_back(shapes[it->second]);
    }
    const std::size_t arity = l.inputs.size();
    const bool unary = l.kind != LayerKind::Add && l.kind != LayerKind::Concat;
    if (unary && arity != 1) fail(l.name, std::string(kind_name(l.kind)) + " takes exactly one input");
    if (l.kind == LayerKind::Add && arity != 2) fail(l.name, "add takes two inputs");
    if (l.kind == LayerKind::Concat && arity < 2) fail(l.name, "concat takes at least two inputs");
    if (!l.is_conv() && l.annotation != Annotation::None) fail(l.name, "only conv layers carry an annotation");

    NodeShape out = in[0];
    switch (l.kind) {
      case LayerKind::Conv: {
        if (l.annotation == Annotation::None) fail(l.name, "conv layer needs an annotation");
        try {
          l.conv.validate();
        } catch (const std::invalid_argument& e) {
          fail(l.name, e.what());
        }
        if (l.conv.c_i != in[0].channels) {
          fail(l.name, "c_i=" + std::to_string(l.conv.c_i) + " but input has " + std::to_string(in[0].channels) +
                           " channels");
        }
        if (l.annotation == Annotation::Ghost && l.conv.s == 1) {
          fail(l.name, "point-wise (1x1) layers must be conv_only");
        }
        if (l.ghost_ratio) {
          if (l.annotation != Annotation::Ghost) fail(l.name, "ghost ratio on a layer not annotated ghost");
          try {
            if (ghost_count(l.conv.c_o, *l.ghost_ratio) == l.conv.c_o) fail(l.name, "no intrinsic channels left");
          } catch (const std::invalid_argument& e) {
            fail(l.name, e.what());
          }
        }
        out.channels = l.conv.c_o;
        if (l.annotation == Annotation::Inactive) inactive[i] = true;
        break;
      }
      case LayerKind::Relu:
      case LayerKind::LeakyRelu:
      case LayerKind::Scale:
        break;
      case LayerKind::Add:
        if (in[0].channels != in[1].channels || in[0].upscale != in[1].upscale) {
          fail(l.name, "add operands differ in shape");
        }
        break;
      case LayerKind::Concat:
        out.channels = 0;
        for (const auto& s : in) {
          if (s.upscale != in[0].upscale) fail(l.name, "concat operands differ in resolution");
          out.channels += s.channels;
        }
        break;
      case LayerKind::Slice:
        if (l.count == 0 || l.start + l.count > in[0].channels) fail(l.name, "slice range outside input channels");
        out.channels = l.count;
        break;
      case LayerKind::PixelShuffle:
        if (l.factor == 0 || in[0].channels % (l.factor * l.factor) != 0) {
          fail(l.name, "channels not divisible by factor^2");
        }
        out.channels = in[0].channels / (l.factor * l.factor);
        out.upscale = in[0].upscale * l.factor;
        break;
    }
    shapes[i] = out;
    index.emplace(l.name, i);
  }

  // The first and last executed convolutions keep their dense form.
  const LayerDef* first = nullptr;
  const LayerDef* last = nullptr;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!layers[i].is_conv() || inactive[i]) continue;
    if (!first) first = &layers[i];
    last = &layers[i];
  }
  if (!first) throw ValidationError("model " + name + " has no active convolution");
  if (first->annotation != Annotation::ConvOnly) fail(first->name, "the first layer must be conv_only");
  if (last->annotation != Annotation::ConvOnly) fail(last->name, "the last layer must be conv_only");

  const std::string& out_name = output_name();
  auto it = index.find(out_name);
  if (it == index.end()) throw ValidationError("model " + name + ": output '" + out_name + "' is not a layer");
  if (inactive[it->second]) throw ValidationError("model " + name + ": output layer is inactive");
  if (shapes[it->second].channels != 3) throw ValidationError("model " + name + ": output must have 3 channels");
  if (shapes[it->second].upscale != scale) {
    throw ValidationError("model " + name + ": output resolution is x" + std::to_string(shapes[it->second].upscale) +
                          " but scale is " + std::to_string(scale));
  }
  return shapes;
}

std::string ModelConfig::to_text() const {
  std::ostringstream out;
  out << "model " << name << '\n';
  out << "scale " << scale << '\n';
  out << "rgb_mean " << fmt(rgb_mean[0]) << ' ' << fmt(rgb_mean[1]) << ' ' << fmt(rgb_mean[2]) << '\n';
  out << "shift_d " << shift.d << '\n';
  out << "shift_tau " << fmt(shift.tau) << '\n';
  out << "shift_shared " << (shift.shared ? 1 : 0) << '\n';
  if (!output.empty()) out << "output " << output << '\n';
  for (const auto& l : layers) {
    out << l.name << " | " << kind_name(l.kind);
    for (const auto& in : l.inputs) out << ' ' << in;
    out << " | ";
    switch (l.kind) {
      case LayerKind::Conv: out << l.conv.c_i << ' ' << l.conv.c_o << ' ' << l.conv.s; break;
      case LayerKind::LeakyRelu:
      case LayerKind::Scale: out << fmt(l.value); break;
      case LayerKind::Slice: out << l.start << ' ' << l.count; break;
      case LayerKind::PixelShuffle: out << l.factor; break;
      default: out << '-';
    }
    out << " | ";
    switch (l.annotation) {
      case Annotation::None: out << '-'; break;
      case Annotation::ConvOnly: out << "conv_only"; break;
      case Annotation::Inactive: out << "inactive"; break;
      case Annotation::Ghost:
        out << "ghost";
        if (l.ghost_ratio) out << '(' << fmt(*l.ghost_ratio) << ')';
        break;
    }
    if (l.is_conv() && !l.conv.bias) out << " nobias";
    out << '\n';
  }
  return out.str();
}

ModelConfig ModelConfig::parse(std::string_view text) {
  ModelConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw ValidationError("config line " + std::to_string(lineno) + ": " + msg);
  };
  auto number = [&](const std::string& tok) {
    double v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size()) fail("bad number '" + tok + "'");
    return v;
  };
  auto count = [&](const std::string& tok) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size()) fail("bad count '" + tok + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;

    if (line.find('|') == std::string::npos) {
      auto t = tokens(line);
      const std::string& key = t[0];
      auto need = [&](std::size_t n) {
        if (t.size() != n + 1) fail(key + " expects " + std::to_string(n) + " value(s)");
      };
      if (key == "model") {
        need(1);
        cfg.name = t[1];
      } else if (key == "scale") {
        need(1);
        cfg.scale = count(t[1]);
      } else if (key == "rgb_mean") {
        need(3);
        for (std::size_t c = 0; c < 3; ++c) cfg.rgb_mean[c] = number(t[c + 1]);
      } else if (key == "shift_d") {
        need(1);
        cfg.shift.d = static_cast<int>(count(t[1]));
      } else if (key == "shift_tau") {
        need(1);
        cfg.shift.tau = number(t[1]);
      } else if (key == "shift_shared") {
        need(1);
        cfg.shift.shared = count(t[1]) != 0;
      } else if (key == "output") {
        need(1);
        cfg.output = t[1];
      } else {
        fail("unknown header key '" + key + "'");
      }
      continue;
    }

    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      const auto bar = line.find('|', pos);
      fields.push_back(trim(std::string_view(line).substr(pos, bar == std::string::npos ? std::string::npos : bar - pos)));
      if (bar == std::string::npos) break;
      pos = bar + 1;
    }
    if (fields.size() != 4) fail("layer lines have four fields: name | kind inputs | args | annotation");
    LayerDef l;
    l.name = fields[0];
    auto kind_tokens = tokens(fields[1]);
    if (kind_tokens.empty()) fail("missing layer kind");
    auto kind = parse_kind(kind_tokens[0]);
    if (!kind) fail("unknown layer kind '" + kind_tokens[0] + "'");
    l.kind = *kind;
    l.inputs.assign(kind_tokens.begin() + 1, kind_tokens.end());

    auto args = tokens(fields[2]);
    if (args.size() == 1 && args[0] == "-") args.clear();
    auto need_args = [&](std::size_t n) {
      if (args.size() != n) fail(std::string(kind_name(l.kind)) + " expects " + std::to_string(n) + " argument(s)");
    };
    switch (l.kind) {
      case LayerKind::Conv:
        need_args(3);
        l.conv = ConvSpec{count(args[0]), count(args[1]), count(args[2]), true};
        break;
      case LayerKind::LeakyRelu:
      case LayerKind::Scale:
        need_args(1);
        l.value = number(args[0]);
        break;
      case LayerKind::Slice:
        need_args(2);
        l.start = count(args[0]);
        l.count = count(args[1]);
        break;
      case LayerKind::PixelShuffle:
        need_args(1);
        l.factor = count(args[0]);
        break;
      default:
        need_args(0);
    }

    for (const auto& tok : tokens(fields[3])) {
      if (tok == "-") continue;
      if (tok == "conv_only") {
        l.annotation = Annotation::ConvOnly;
      } else if (tok == "inactive") {
        l.annotation = Annotation::Inactive;
      } else if (tok == "nobias") {
        l.conv.bias = false;
      } else if (tok.rfind("ghost", 0) == 0) {
        l.annotation = Annotation::Ghost;
        if (tok.size() > 5) {
          if (tok[5] != '(' || tok.back() != ')') fail("ghost ratio is written ghost(0.5)");
          l.ghost_ratio = number(tok.substr(6, tok.size() - 7));
        }
      } else {
        fail("unknown annotation '" + tok + "'");
      }
    }
    cfg.layers.push_back(std::move(l));
  }
  if (cfg.name.empty()) throw ValidationError("config has no model line");
  cfg.validate();
  return cfg;
}

std::uint64_t ModelConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_text()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ModelConfig with_ghost_ratio(const ModelConfig& config, double ratio) {
  ModelConfig out = config;
  for (auto& l : out.layers) {
    if (l.converted()) throw ValidationError("layer '" + l.name + "' is already converted");
    if (l.annotation != Annotation::Ghost || ratio == 0.0) continue;
    try {
      if (ghost_count(l.conv.c_o, ratio) == 0) continue;
    } catch (const std::invalid_argument& e) {
      throw ValidationError("layer '" + l.name + "': " + e.what());
    }
    l.ghost_ratio = ratio;
  }
  out.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Builders

namespace {

class Builder {
 public:
  explicit Builder(std::string name, std::size_t scale) {
    cfg_.name = std::move(name);
    cfg_.scale = scale;
  }

  std::string conv(const std::string& name, const std::string& in, std::size_t ci, std::size_t co, std::size_t k,
                   Annotation a) {
    LayerDef l;
    l.name = name;
    l.kind = LayerKind::Conv;
    l.inputs = {in};
    l.annotation = a;
    l.conv = ConvSpec{ci, co, k, true};
    return push(std::move(l));
  }
  std::string unary(const std::string& name, LayerKind kind, const std::string& in, double value = 0) {
    LayerDef l;
    l.name = name;
    l.kind = kind;
    l.inputs = {in};
    l.value = value;
    return push(std::move(l));
  }
  std::string add(const std::string& name, const std::string& a, const std::string& b) {
    LayerDef l;
    l.name = name;
    l.kind = LayerKind::Add;
    l.inputs = {a, b};
    return push(std::move(l));
  }
  std::string concat(const std::string& name, std::vector<std::string> ins) {
    LayerDef l;
    l.name = name;
    l.kind = LayerKind::Concat;
    l.inputs = std::move(ins);
    return push(std::move(l));
  }
  std::string slice(const std::string& name, const std::string& in, std::size_t start, std::size_t count) {
    LayerDef l;
    l.name = name;
    l.kind = LayerKind::Slice;
    l.inputs = {in};
    l.start = start;
    l.count = count;
    return push(std::move(l));
  }
  std::string shuffle(const std::string& name, const std::string& in, std::size_t r) {
    LayerDef l;
    l.name = name;
    l.kind = LayerKind::PixelShuffle;
    l.inputs = {in};
    l.factor = r;
    return push(std::move(l));
  }

  ModelConfig done(const std::string& output = {}) {
    cfg_.output = output;
    cfg_.validate();
    return std::move(cfg_);
  }

 private:
  std::string push(LayerDef l) {
    std::string n = l.name;
    cfg_.layers.push_back(std::move(l));
    return n;
  }
  ModelConfig cfg_;
};

std::string pre(const std::string& p, std::size_t i, const std::string& s) {
  return p + "." + std::to_string(i) + "." + s;
}

/// Sub-pixel upsampler: one conv + shuffle for scales 2 and 3, two x2 stages for 4.
std::string upsampler(Builder& b, const std::string& prefix, const std::string& in, std::size_t feats,
                      std::size_t scale, Annotation a, bool relu) {
  std::string x = in;
  const std::size_t stages = scale == 4 ? 2 : 1;
  const std::size_t r = scale == 4 ? 2 : scale;
  for (std::size_t s = 0; s < stages; ++s) {
    const std::string p = stages == 1 ? prefix : prefix + "." + std::to_string(s);
    x = b.conv(p + ".conv", x, feats, feats * r * r, 3, a);
    if (relu) x = b.unary(p + ".relu", LayerKind::Relu, x);
    x = b.shuffle(p + ".shuffle", x, r);
  }
  return x;
}

}  // namespace

ModelConfig make_edsr(std::size_t blocks, std::size_t feats, std::size_t scale, double res_scale) {
  Builder b("edsr_x" + std::to_string(scale), scale);
  const std::string head = b.conv("head", "input", 3, feats, 3, Annotation::ConvOnly);
  std::string x = head;
  for (std::size_t i = 0; i < blocks; ++i) {
    std::string y = b.conv(pre("body", i, "conv1"), x, feats, feats, 3, Annotation::Ghost);
    y = b.unary(pre("body", i, "relu"), LayerKind::Relu, y);
    y = b.conv(pre("body", i, "conv2"), y, feats, feats, 3, Annotation::Ghost);
    if (res_scale != 1.0) y = b.unary(pre("body", i, "scale"), LayerKind::Scale, y, res_scale);
    x = b.add(pre("body", i, "add"), x, y);
  }
  x = b.conv("body.conv", x, feats, feats, 3, Annotation::ConvOnly);
  x = b.add("body.skip", x, head);
  x = upsampler(b, "tail.upsampler", x, feats, scale, Annotation::ConvOnly, false);
  b.conv("tail.conv", x, feats, 3, 3, Annotation::ConvOnly);
  return b.done();
}

ModelConfig make_rdn(std::size_t blocks, std::size_t convs, std::size_t growth, std::size_t feats,
                     std::size_t scale) {
  Builder b("rdn_x" + std::to_string(scale), scale);
  const std::string sfe1 = b.conv("sfe1", "input", 3, feats, 3, Annotation::ConvOnly);
  std::string x = b.conv("sfe2", sfe1, feats, feats, 3, Annotation::Ghost);
  std::vector<std::string> outs;
  for (std::size_t d = 0; d < blocks; ++d) {
    const std::string p = "rdb." + std::to_string(d);
    std::string cat = x;
    std::size_t width = feats;
    for (std::size_t c = 0; c < convs; ++c) {
      std::string y = b.conv(p + ".conv" + std::to_string(c), cat, width, growth, 3, Annotation::Ghost);
      y = b.unary(p + ".relu" + std::to_string(c), LayerKind::Relu, y);
      cat = b.concat(p + ".cat" + std::to_string(c), {cat, y});
      width += growth;
    }
    std::string lff = b.conv(p + ".lff", cat, width, feats, 1, Annotation::ConvOnly);
    x = b.add(p + ".add", lff, x);
    outs.push_back(x);
  }
  x = b.concat("gff.cat", outs);
  x = b.conv("gff.conv0", x, blocks * feats, feats, 1, Annotation::ConvOnly);
  x = b.conv("gff.conv1", x, feats, feats, 3, Annotation::ConvOnly);
  x = b.add("gff.skip", x, sfe1);
  if (scale == 4) {
    x = b.conv("upnet.conv0", x, feats, growth * 4, 3, Annotation::ConvOnly);
    x = b.shuffle("upnet.shuffle0", x, 2);
    x = b.conv("upnet.conv1", x, growth, growth * 4, 3, Annotation::ConvOnly);
    x = b.shuffle("upnet.shuffle1", x, 2);
  } else {
    x = b.conv("upnet.conv0", x, feats, growth * scale * scale, 3, Annotation::ConvOnly);
    x = b.shuffle("upnet.shuffle", x, scale);
  }
  b.conv("upnet.conv_out", x, growth, 3, 3, Annotation::ConvOnly);
  return b.done();
}

ModelConfig make_carn(std::size_t feats, std::size_t blocks, std::size_t units, std::size_t scale,
                      bool multi_scale) {
  Builder b("carn_x" + std::to_string(scale), scale);
  const std::string entry = b.conv("entry", "input", 3, feats, 3, Annotation::ConvOnly);
  auto cascade = [&](const std::string& prefix, const std::string& in, std::size_t count,
                     const std::function<std::string(const std::string&, const std::string&)>& unit) {
    std::string cat = in;
    std::string x = in;
    for (std::size_t i = 0; i < count; ++i) {
      const std::string p = prefix + ".b" + std::to_string(i + 1);
      std::string y = unit(p, x);
      cat = b.concat(prefix + ".cat" + std::to_string(i + 1), {cat, y});
      x = b.conv(prefix + ".c" + std::to_string(i + 1), cat, feats * (i + 2), feats, 1, Annotation::ConvOnly);
    }
    return x;
  };
  auto residual_unit = [&](const std::string& p, const std::string& in) {
    std::string y = b.conv(p + ".conv1", in, feats, feats, 3, Annotation::Ghost);
    y = b.unary(p + ".relu1", LayerKind::Relu, y);
    y = b.conv(p + ".conv2", y, feats, feats, 3, Annotation::Ghost);
    y = b.add(p + ".add", y, in);
    return b.unary(p + ".relu2", LayerKind::Relu, y);
  };
  auto block = [&](const std::string& p, const std::string& in) { return cascade(p, in, units, residual_unit); };
  const std::string body = cascade("body", entry, blocks, block);

  std::string up;
  const std::size_t scales[] = {2, 3, 4};
  for (std::size_t s : scales) {
    if (s == scale) {
      up = upsampler(b, "up.x" + std::to_string(s), body, feats, s, Annotation::ConvOnly, true);
    } else if (multi_scale) {
      upsampler(b, "up.x" + std::to_string(s), body, feats, s, Annotation::Inactive, true);
    }
  }
  return b.done(b.conv("exit", up, feats, 3, 3, Annotation::ConvOnly));
}

ModelConfig make_imdn(std::size_t modules, std::size_t scale) {
  Builder b("imdn_x" + std::to_string(scale), scale);
  constexpr std::size_t kFeats = 64;
  constexpr std::size_t kDistilled = 16;
  constexpr std::size_t kRemaining = kFeats - kDistilled;
  constexpr double kSlope = 0.05;
  const std::string fea = b.conv("fea_conv", "input", 3, kFeats, 3, Annotation::ConvOnly);
  std::string x = fea;
  std::vector<std::string> outs;
  for (std::size_t m = 0; m < modules; ++m) {
    const std::string p = "imdb." + std::to_string(m);
    std::vector<std::string> distilled;
    std::string rem = x;
    std::size_t width = kFeats;
    for (std::size_t c = 1; c <= 3; ++c) {
      const std::string cs = std::to_string(c);
      std::string y = b.conv(p + ".c" + cs, rem, width, kFeats, 3, Annotation::Ghost);
      y = b.unary(p + ".act" + cs, LayerKind::LeakyRelu, y, kSlope);
      distilled.push_back(b.slice(p + ".d" + cs, y, 0, kDistilled));
      rem = b.slice(p + ".r" + cs, y, kDistilled, kRemaining);
      width = kRemaining;
    }
    distilled.push_back(b.conv(p + ".c4", rem, kRemaining, kDistilled, 3, Annotation::Ghost));
    std::string cat = b.concat(p + ".cat", distilled);
    std::string c5 = b.conv(p + ".c5", cat, kFeats, kFeats, 1, Annotation::ConvOnly);
    x = b.add(p + ".add", c5, x);
    outs.push_back(x);
  }
  x = b.concat("c.cat", outs);
  x = b.conv("c", x, modules * kFeats, kFeats, 1, Annotation::ConvOnly);
  x = b.unary("c.act", LayerKind::LeakyRelu, x, kSlope);
  x = b.conv("lr_conv", x, kFeats, kFeats, 3, Annotation::ConvOnly);
  x = b.add("lr_skip", x, fea);
  x = b.conv("upsampler.conv", x, kFeats, 3 * scale * scale, 3, Annotation::ConvOnly);
  b.shuffle("upsampler.shuffle", x, scale);
  return b.done();
}

std::vector<std::string> preset_names() {
  return {"edsr_x2", "edsr_x3", "edsr_x4", "rdn_x2",  "rdn_x3",  "rdn_x4",  "rdn_x2_appendix", "carn_x2",
          "carn_x3", "carn_x4", "imdn_x2", "imdn_x3", "imdn_x4", "toy-edsr", "toy-carn"};
}

ModelConfig preset(const std::string& name) {
  auto scale_of = [&](const std::string& prefix) -> std::size_t {
    return static_cast<std::size_t>(name[prefix.size()] - '0');
  };
  auto named = [&](ModelConfig c) {
    c.name = name;
    return c;
  };
  if (name == "edsr_x2" || name == "edsr_x3" || name == "edsr_x4") {
    return named(make_edsr(32, 256, scale_of("edsr_x"), 0.1));
  }
  if (name == "rdn_x2" || name == "rdn_x3" || name == "rdn_x4") return named(make_rdn(16, 8, 64, 32, scale_of("rdn_x")));
  if (name == "rdn_x2_appendix") return named(make_rdn(16, 8, 64, 64, 2));
  if (name == "carn_x2" || name == "carn_x3" || name == "carn_x4") {
    return named(make_carn(64, 3, 3, scale_of("carn_x"), true));
  }
  if (name == "imdn_x2" || name == "imdn_x3" || name == "imdn_x4") return named(make_imdn(6, scale_of("imdn_x")));
  if (name == "toy-edsr") return named(make_edsr(4, 16, 2, 1.0));
  if (name == "toy-carn") return named(make_carn(16, 2, 2, 2, false));
  throw NotFound("unknown preset '" + name + "'");
}

ModelConfig load_config(const std::string& name_or_path) {
  for (const auto& p : preset_names()) {
    if (p == name_or_path) return preset(p);
  }
  std::ifstream in(name_or_path);
  if (!in) throw NotFound("config not found: '" + name_or_path + "' is neither a preset nor a readable file");
  std::stringstream ss;
  ss << in.rdbuf();
  return ModelConfig::parse(ss.str());
}

void save_config(const ModelConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write config " + path);
  out << config.to_text();
  if (!out) throw std::runtime_error("failed writing config " + path);
}

}  // namespace ghostsr
