#include "ghostsr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ghostsr/kernels.hpp"

namespace ghostsr {

void ConvSpec::validate() const {
  if (c_i == 0) throw std::invalid_argument("conv c_i must be >= 1");
  if (c_o == 0) throw std::invalid_argument("conv c_o must be >= 1");
  if (s % 2 == 0) throw std::invalid_argument("conv kernel size s must be odd, got " + std::to_string(s));
}

namespace {

std::string dims(std::size_t a, std::size_t b) {
  return std::to_string(a) + " vs " + std::to_string(b);
}

void require_same_shape(const Shape& a, const Shape& b, const std::string& op) {
  if (a.n != b.n) throw std::invalid_argument(op + ": batch n mismatch " + dims(a.n, b.n));
  if (a.c != b.c) throw std::invalid_argument(op + ": channels c mismatch " + dims(a.c, b.c));
  if (a.h != b.h) throw std::invalid_argument(op + ": height h mismatch " + dims(a.h, b.h));
  if (a.w != b.w) throw std::invalid_argument(op + ": width w mismatch " + dims(a.w, b.w));
}

}  // namespace

template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var weight, std::optional<Var> bias, const ConvSpec& spec,
           ConvAlgorithm algo) {
  spec.validate();
  const Shape& xs = tape.shape(x);
  const Shape& ws = tape.shape(weight);
  if (xs.c != spec.c_i) throw std::invalid_argument("conv2d: input channels c_i mismatch " + dims(xs.c, spec.c_i));
  if (ws.n != spec.c_o) throw std::invalid_argument("conv2d: weight c_o mismatch " + dims(ws.n, spec.c_o));
  if (ws.c != spec.c_i) throw std::invalid_argument("conv2d: weight c_i mismatch " + dims(ws.c, spec.c_i));
  if (ws.h != spec.s || ws.w != spec.s) {
    throw std::invalid_argument("conv2d: weight kernel size s mismatch " + dims(ws.h, spec.s));
  }
  if (bias.has_value() != spec.bias) throw std::invalid_argument("conv2d: bias presence disagrees with spec");
  const T* bias_ptr = nullptr;
  if (bias) {
    if (tape.value(*bias).numel() != spec.c_o) {
      throw std::invalid_argument("conv2d: bias length mismatch " + dims(tape.value(*bias).numel(), spec.c_o));
    }
    bias_ptr = tape.value(*bias).data();
  }

  Tensor<T> out(Shape{xs.n, spec.c_o, xs.h, xs.w});
  if (algo == ConvAlgorithm::Naive) {
    kernels::conv2d_naive(tape.value(x), tape.value(weight), bias_ptr, out);
  } else {
    kernels::conv2d_blocked(tape.value(x), tape.value(weight), bias_ptr, out);
  }

  std::vector<Var> inputs{x, weight};
  if (bias) inputs.push_back(*bias);
  const bool has_bias = bias.has_value();
  return tape.record(std::move(out), std::move(inputs),
                     [x, weight, has_bias](const Tape<T>& t, const Tensor<T>& g, GradSink<T>& sink) {
                       if (auto* gx = sink[0]) kernels::conv2d_grad_input(g, t.value(weight), *gx);
                       if (auto* gw = sink[1]) kernels::conv2d_grad_weight(g, t.value(x), *gw);
                       if (has_bias) {
                         if (auto* gb = sink[2]) kernels::conv2d_grad_bias(g, gb->data());
                       }
                     });
}

template <typename T>
Var depthwise_conv2d(Tape<T>& tape, Var x, Var kernel) {
  const Shape& xs = tape.shape(x);
  const Shape& ks = tape.shape(kernel);
  if (ks.n != xs.c) throw std::invalid_argument("depthwise_conv2d: kernel count vs channels c " + dims(ks.n, xs.c));
  if (ks.c != 1) throw std::invalid_argument("depthwise_conv2d: kernel must have one input channel");
  if (ks.h != ks.w || ks.h % 2 == 0) throw std::invalid_argument("depthwise_conv2d: kernel must be square and odd");

  Tensor<T> out(xs);
  kernels::depthwise_blocked(tape.value(x), tape.value(kernel), out);
  return tape.record(std::move(out), {x, kernel},
                     [x, kernel](const Tape<T>& t, const Tensor<T>& g, GradSink<T>& sink) {
                       const Tensor<T>& xv = t.value(x);
                       const Tensor<T>& kv = t.value(kernel);
                       const Shape& s = xv.shape();
                       const int K = static_cast<int>(kv.shape().h);
                       const int pad = (K - 1) / 2;
                       if (auto* gx = sink[0]) {
                         for (std::size_t n = 0; n < s.n; ++n) {
                           for (std::size_t c = 0; c < s.c; ++c) {
                             const T* k = kv.data() + c * kv.shape().plane();
                             for (int ky = 0; ky < K; ++ky) {
                               for (int kx = 0; kx < K; ++kx) {
                                 kernels::axpy_shifted_adjoint(k[ky * K + kx], g.plane(n, c), gx->plane(n, c),
                                                               s.h, s.w, ky - pad, kx - pad);
                               }
                             }
                           }
                         }
                       }
                       if (auto* gk = sink[1]) {
                         for (std::size_t c = 0; c < s.c; ++c) {
                           T* k = gk->data() + c * kv.shape().plane();
                           for (std::size_t n = 0; n < s.n; ++n) {
                             for (int ky = 0; ky < K; ++ky) {
                               for (int kx = 0; kx < K; ++kx) {
                                 k[ky * K + kx] += kernels::shifted_dot(g.plane(n, c), xv.plane(n, c), s.h, s.w,
                                                                        ky - pad, kx - pad);
                               }
                             }
                           }
                         }
                       }
                     });
}

template <typename T>
Var relu(Tape<T>& tape, Var x) {
  const Tensor<T>& xv = tape.value(x);
  Tensor<T> out(xv.shape());
  auto src = xv.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > T{0} ? src[i] : T{0};
  return tape.record(std::move(out), {x}, [x](const Tape<T>& t, const Tensor<T>& g, GradSink<T>& sink) {
    auto* gx = sink[0];
    if (!gx) return;
    auto xs = t.value(x).values();
    auto gi = g.values();
    auto go = gx->values();
    // Subgradient at exactly zero is zero.
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (xs[i] > T{0}) go[i] += gi[i];
    }
  });
}

template <typename T>
Var leaky_relu(Tape<T>& tape, Var x, T slope) {
  const Tensor<T>& xv = tape.value(x);
  Tensor<T> out(xv.shape());
  auto src = xv.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > T{0} ? src[i] : slope * src[i];
  return tape.record(std::move(out), {x}, [x, slope](const Tape<T>& t, const Tensor<T>& g, GradSink<T>& sink) {
    auto* gx = sink[0];
    if (!gx) return;
    auto xs = t.value(x).values();
    auto gi = g.values();
    auto go = gx->values();
    for (std::size_t i = 0; i < xs.size(); ++i) go[i] += xs[i] > T{0} ? gi[i] : slope * gi[i];
  });
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  require_same_shape(tape.shape(a), tape.shape(b), "add");
  Tensor<T> out(tape.shape(a));
  auto av = tape.value(a).values();
  auto bv = tape.value(b).values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  return tape.record(std::move(out), {a, b}, [](const Tape<T>&, const Tensor<T>& g, GradSink<T>& sink) {
    for (std::size_t slot = 0; slot < 2; ++slot) {
      if (auto* gi = sink[slot]) {
        auto dst = gi->values();
        auto src = g.values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
    }
  });
}

template <typename T>
Var mul(Tape<T>& tape, Var a, Var b) {
  require_same_shape(tape.shape(a), tape.shape(b), "mul");
  Tensor<T> out(tape.shape(a));
  auto av = tape.value(a).values();
  auto bv = tape.value(b).values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  return tape.record(std::move(out), {a, b}, [a, b](const Tape<T>& t, const Tensor<T>& g, GradSink<T>& sink) {
    auto gv = g.values();
    if (auto* ga = sink[0]) {
      auto other = t.value(b).values();
      auto dst = ga->values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gv[i] * other[i];
    }
    if (auto* gb = sink[1]) {
      auto other = t.value(a).values();
      auto dst = gb->values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gv[i] * other[i];
    }
  });
}

template <typename T>
Var scalar_mul(Tape<T>& tape, Var x, T k) {
  Tensor<T> out(tape.shape(x));
  auto xv = tape.value(x).values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = k * xv[i];
  return tape.record(std::move(out), {x}, [k](const Tape<T>&, const Tensor<T>& g, GradSink<T>& sink) {
    if (auto* gx = sink[0]) {
      auto dst = gx->values();
      auto src = g.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += k * src[i];
    }
  });
}

template <typename T>
Var add_channel_constant(Tape<T>& tape, Var x, std::span<const T> values) {
  const Shape& s = tape.shape(x);
  if (values.size() != s.c) {
    throw std::invalid_argument("add_channel_constant: channels c mismatch " + dims(values.size(), s.c));
  }
  Tensor<T> out(tape.value(x));
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      T* p = out.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) p[i] += values[c];
    }
  }
  return tape.record(std::move(out), {x}, [](const Tape<T>&, const Tensor<T>& g, GradSink<T>& sink) {
    if (auto* gx = sink[0]) {
      auto dst = gx->values();
      auto src = g.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  });
}

template <typename T>
Var concat_channels(Tape<T>& tape, std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  const Shape first = tape.shape(parts[0]);
  std::size_t channels = 0;
  for (Var p : parts) {
    const Shape& s = tape.shape(p);
    if (s.n != first.n) throw std::invalid_argument("concat_channels: batch n mismatch " + dims(s.n, first.n));
    if (s.h != first.h) throw std::invalid_argument("concat_channels: height h mismatch " + dims(s.h, first.h));
    if (s.w != first.w) throw std::invalid_argument("concat_channels: width w mismatch " + dims(s.w, first.w));
    channels += s.c;
  }
  Tensor<T> out(Shape{first.n, channels, first.h, first.w});
  const std::size_t plane = first.plane();
  for (std::size_t n = 0; n < first.n; ++n) {
    std::size_t c0 = 0;
    for (Var p : parts) {
      const Tensor<T>& v = tape.value(p);
      std::copy_n(v.plane(n, 0), v.shape().c * plane, out.plane(n, c0));
      c0 += v.shape().c;
    }
  }
  std::vector<std::size_t> widths;
  for (Var p : parts) widths.push_back(tape.shape(p).c);
  return tape.record(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                     [widths](const Tape<T>&, const Tensor<T>& g, GradSink<T>& sink) {
                       const Shape& gs = g.shape();
                       std::size_t c0 = 0;
                       for (std::size_t slot = 0; slot < widths.size(); ++slot) {
                         if (auto* gi = sink[slot]) {
                           for (std::size_t n = 0; n < gs.n; ++n) {
                             const T* src = g.plane(n, c0);
                             T* dst = gi->plane(n, 0);
                             for (std::size_t i = 0; i < widths[slot] * gs.plane(); ++i) dst[i] += src[i];
                           }
                         }
                         c0 += widths[slot];
                       }
                     });
}

template <typename T>
Var slice_channels(Tape<T>& tape, Var x, std::size_t start, std::size_t count) {
  const Shape& s = tape.shape(x);
  if (count == 0 || start + count > s.c) {
    throw std::invalid_argument("slice_channels: range [" + std::to_string(start) + ", " +
                                std::to_string(start + count) + ") outside channels c=" + std::to_string(s.c));
  }
  Tensor<T> out(Shape{s.n, count, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n) {
    std::copy_n(tape.value(x).plane(n, start), count * s.plane(), out.plane(n, 0));
  }
  return tape.record(std::move(out), {x}, [start, count](const Tape<T>&, const Tensor<T>& g, GradSink<T>& sink) {
    if (auto* gx = sink[0]) {
      const Shape& gs = g.shape();
      for (std::size_t n = 0; n < gs.n; ++n) {
        const T* src = g.plane(n, 0);
        T* dst = gx->plane(n, start);
        for (std::size_t i = 0; i < count * gs.plane(); ++i) dst[i] += src[i];
      }
    }
  });
}

template <typename T>
Var gather_channels(Tape<T>& tape, Var x, std::span<const int> order) {
  const Shape& s = tape.shape(x);
  if (order.size() != s.c) throw std::invalid_argument("gather_channels: order length vs channels c " + dims(order.size(), s.c));
  std::vector<bool> seen(s.c, false);
  for (int o : order) {
    if (o < 0 || static_cast<std::size_t>(o) >= s.c || seen[static_cast<std::size_t>(o)]) {
      throw std::invalid_argument("gather_channels: order is not a permutation");
    }
    seen[static_cast<std::size_t>(o)] = true;
  }
  Tensor<T> out(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t p = 0; p < s.c; ++p) {
      std::copy_n(tape.value(x).plane(n, static_cast<std::size_t>(order[p])), s.plane(), out.plane(n, p));
    }
  }
  std::vector<int> ord(order.begin(), order.end());
  return tape.record(std::move(out), {x}, [ord](const Tape<T>&, const Tensor<T>& g, GradSink<T>& sink) {
    if (auto* gx = sink[0]) {
      const Shape& gs = g.shape();
      for (std::size_t n = 0; n < gs.n; ++n) {
        for (std::size_t p = 0; p < gs.c; ++p) {
          const T* src = g.plane(n, p);
          T* dst = gx->plane(n, static_cast<std::size_t>(ord[p]));
          for (std::size_t i = 0; i < gs.plane(); ++i) dst[i] += src[i];
        }
      }
    }
  });
}

template <typename T>
Var pixel_shuffle(Tape<T>& tape, Var x, std::size_t r) {
  const Shape& s = tape.shape(x);
  if (r == 0) throw std::invalid_argument("pixel_shuffle: upscale factor r must be >= 1");
  if (s.c % (r * r) != 0) {
    throw std::invalid_argument("pixel_shuffle: channels c=" + std::to_string(s.c) + " not divisible by r^2=" +
                                std::to_string(r * r));
  }
  const Shape os{s.n, s.c / (r * r), s.h * r, s.w * r};
  Tensor<T> out(os);
  const Tensor<T>& in = tape.value(x);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t co = 0; co < os.c; ++co) {
      for (std::size_t y = 0; y < os.h; ++y) {
        for (std::size_t xx = 0; xx < os.w; ++xx) {
          out(n, co, y, xx) = in(n, co * r * r + (y % r) * r + (xx % r), y / r, xx / r);
        }
      }
    }
  }
  return tape.record(std::move(out), {x}, [r](const Tape<T>&, const Tensor<T>& g, GradSink<T>& sink) {
    auto* gx = sink[0];
    if (!gx) return;
    const Shape& gs = g.shape();
    for (std::size_t n = 0; n < gs.n; ++n) {
      for (std::size_t co = 0; co < gs.c; ++co) {
        for (std::size_t y = 0; y < gs.h; ++y) {
          for (std::size_t xx = 0; xx < gs.w; ++xx) {
            (*gx)(n, co * r * r + (y % r) * r + (xx % r), y / r, xx / r) += g(n, co, y, xx);
          }
        }
      }
    }
  });
}

template <typename T>
Var sum(Tape<T>& tape, Var x) {
  auto xv = tape.value(x).values();
  const T total = std::accumulate(xv.begin(), xv.end(), T{0});
  return tape.record(Tensor<T>::scalar(total), {x}, [](const Tape<T>&, const Tensor<T>& g, GradSink<T>& sink) {
    if (auto* gx = sink[0]) {
      const T gv = g.item();
      for (T& v : gx->values()) v += gv;
    }
  });
}

template <typename T>
Var l1_loss(Tape<T>& tape, Var pred, Var target) {
  require_same_shape(tape.shape(pred), tape.shape(target), "l1_loss");
  auto p = tape.value(pred).values();
  auto q = tape.value(target).values();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(static_cast<double>(p[i]) - static_cast<double>(q[i]));
  const auto count = static_cast<T>(p.size());
  return tape.record(Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(p.size()))), {pred},
                     [pred, target, count](const Tape<T>& t, const Tensor<T>& g, GradSink<T>& sink) {
                       auto* gp = sink[0];
                       if (!gp) return;
                       const T scale = g.item() / count;
                       auto pv = t.value(pred).values();
                       auto tv = t.value(target).values();
                       auto dst = gp->values();
                       for (std::size_t i = 0; i < dst.size(); ++i) {
                         const T d = pv[i] - tv[i];
                         if (d > T{0}) {
                           dst[i] += scale;
                         } else if (d < T{0}) {
                           dst[i] -= scale;
                         }
                       }
                     });
}

template <typename T>
Var mse_loss(Tape<T>& tape, Var pred, Var target) {
  require_same_shape(tape.shape(pred), tape.shape(target), "mse_loss");
  auto p = tape.value(pred).values();
  auto q = tape.value(target).values();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - static_cast<double>(q[i]);
    acc += d * d;
  }
  const auto count = static_cast<T>(p.size());
  return tape.record(Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(p.size()))), {pred},
                     [pred, target, count](const Tape<T>& t, const Tensor<T>& g, GradSink<T>& sink) {
                       auto* gp = sink[0];
                       if (!gp) return;
                       const T scale = T{2} * g.item() / count;
                       auto pv = t.value(pred).values();
                       auto tv = t.value(target).values();
                       auto dst = gp->values();
                       for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * (pv[i] - tv[i]);
                     });
}

#define GHOSTSR_INSTANTIATE_OPS(T)                                                                   \
  template Var conv2d<T>(Tape<T>&, Var, Var, std::optional<Var>, const ConvSpec&, ConvAlgorithm);  \
  template Var depthwise_conv2d<T>(Tape<T>&, Var, Var);                                            \
  template Var relu<T>(Tape<T>&, Var);                                                             \
  template Var leaky_relu<T>(Tape<T>&, Var, T);                                                    \
  template Var add<T>(Tape<T>&, Var, Var);                                                         \
  template Var mul<T>(Tape<T>&, Var, Var);                                                         \
  template Var scalar_mul<T>(Tape<T>&, Var, T);                                                    \
  template Var add_channel_constant<T>(Tape<T>&, Var, std::span<const T>);                         \
  template Var concat_channels<T>(Tape<T>&, std::span<const Var>);                                 \
  template Var slice_channels<T>(Tape<T>&, Var, std::size_t, std::size_t);                         \
  template Var gather_channels<T>(Tape<T>&, Var, std::span<const int>);                            \
  template Var pixel_shuffle<T>(Tape<T>&, Var, std::size_t);                                       \
  template Var sum<T>(Tape<T>&, Var);                                                              \
  template Var l1_loss<T>(Tape<T>&, Var, Var);                                                     \
  template Var mse_loss<T>(Tape<T>&, Var, Var);

GHOSTSR_INSTANTIATE_OPS(float)
GHOSTSR_INSTANTIATE_OPS(double)

#undef GHOSTSR_INSTANTIATE_OPS

}  // namespace ghostsr
