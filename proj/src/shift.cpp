#include "ghostsr/shift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ghostsr/errors.hpp"
#include "ghostsr/kernels.hpp"
#include "ghostsr/parallel.hpp"

namespace ghostsr {

void check_offset(Offset o, int d) {
  if (d < 0) throw std::invalid_argument("max offset d must be >= 0");
  if (std::abs(o.di) > d || std::abs(o.dj) > d) {
    throw std::invalid_argument("offset (" + std::to_string(o.di) + ", " + std::to_string(o.dj) +
                                ") outside [-" + std::to_string(d) + ", " + std::to_string(d) + "]");
  }
}

template <typename T>
Tensor<T> one_hot_from_offsets(Offset o, int d) {
  check_offset(o, d);
  const std::size_t K = grid_size(d);
  Tensor<T> w(Shape{1, 1, K, K});
  w(0, 0, static_cast<std::size_t>(o.di + d), static_cast<std::size_t>(o.dj + d)) = T{1};
  return w;
}

double gumbel_from_uniform(double u) { return -std::log(-std::log(u)); }

template <typename T>
Tensor<T> gumbel_noise(const Shape& shape, Rng& rng) {
  Tensor<T> n(shape);
  for (T& v : n.values()) v = static_cast<T>(gumbel_from_uniform(rng.uniform_open()));
  return n;
}

template <typename T>
Tensor<T> soft_shift_weight(const Tensor<T>& proxy, const Tensor<T>& noise, T tau) {
  if (!(tau > T{0})) throw std::invalid_argument("temperature tau must be > 0");
  if (!(proxy.shape() == noise.shape())) {
    throw std::invalid_argument("noise shape " + noise.shape().str() + " differs from proxy " +
                                proxy.shape().str());
  }
  const Shape& s = proxy.shape();
  Tensor<T> out(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* p = proxy.plane(n, c);
      const T* z = noise.plane(n, c);
      T* o = out.plane(n, c);
      T peak = -std::numeric_limits<T>::infinity();
      for (std::size_t i = 0; i < s.plane(); ++i) {
        o[i] = (p[i] + z[i]) / tau;
        peak = std::max(peak, o[i]);
      }
      T total{0};
      for (std::size_t i = 0; i < s.plane(); ++i) {
        o[i] = std::exp(o[i] - peak);
        total += o[i];
      }
      for (std::size_t i = 0; i < s.plane(); ++i) o[i] /= total;
    }
  }
  return out;
}

template <typename T>
Offset harden_offsets(std::span<const T> grid, int d) {
  const std::size_t K = grid_size(d);
  if (grid.size() != K * K) throw std::invalid_argument("offset grid has wrong size for d");
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] > grid[best]) best = i;
  }
  return Offset{static_cast<int>(best / K) - d, static_cast<int>(best % K) - d};
}

template <typename T>
std::vector<Offset> harden_all(const Tensor<T>& grids) {
  const Shape& s = grids.shape();
  if (s.h != s.w || s.h % 2 == 0) throw std::invalid_argument("offset grids must be square and odd");
  const int d = static_cast<int>(s.h / 2);
  std::vector<Offset> out;
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      out.push_back(harden_offsets(std::span<const T>(grids.plane(n, c), s.plane()), d));
    }
  }
  return out;
}

template <typename T>
Tensor<T> shift2d(const Tensor<T>& x, Offset o, int d) {
  check_offset(o, d);
  const Shape& s = x.shape();
  Tensor<T> out(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      kernels::shift_plane(x.plane(n, c), out.plane(n, c), s.h, s.w, o.di, o.dj);
    }
  }
  return out;
}

namespace {

void check_assignment(std::span<const int> assignment, std::size_t intrinsic) {
  for (int a : assignment) {
    if (a < 0 || static_cast<std::size_t>(a) >= intrinsic) {
      throw std::invalid_argument("ghost source channel " + std::to_string(a) + " outside intrinsic range [0, " +
                                  std::to_string(intrinsic) + ")");
    }
  }
}

/// dK[p](a, b) = sum over ghosts j using plane p of <g_j, shift(I_src(j), a - d, b - d)>.
template <typename T>
Tensor<T> kernel_grad(const Tensor<T>& g, const Tensor<T>& in, std::span<const int> assignment, std::size_t planes,
                      int d) {
  const Shape& s = g.shape();
  const std::size_t K = grid_size(d);
  Tensor<T> per_ghost(Shape{assignment.size(), 1, K, K});
  parallel_for(assignment.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      T* k = per_ghost.plane(j, 0);
      const auto src = static_cast<std::size_t>(assignment[j]);
      for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t a = 0; a < K; ++a) {
          for (std::size_t b = 0; b < K; ++b) {
            k[a * K + b] += kernels::shifted_dot(g.plane(n, j), in.plane(n, src), s.h, s.w,
                                                 static_cast<int>(a) - d, static_cast<int>(b) - d);
          }
        }
      }
    }
  });
  if (planes == assignment.size()) return per_ghost;
  Tensor<T> shared(Shape{1, 1, K, K});
  for (std::size_t j = 0; j < assignment.size(); ++j) {
    for (std::size_t i = 0; i < K * K; ++i) shared.data()[i] += per_ghost.plane(j, 0)[i];
  }
  return shared;
}

/// dW' += (1 / tau) S * (dK - <S, dK>) per plane.
template <typename T>
void softmax_backward(const Tensor<T>& soft, const Tensor<T>& dk, T tau, Tensor<T>& grad_proxy) {
  const Shape& s = soft.shape();
  for (std::size_t p = 0; p < s.n; ++p) {
    const T* sp = soft.plane(p, 0);
    const T* kp = dk.plane(p, 0);
    T* out = grad_proxy.plane(p, 0);
    T inner{0};
    for (std::size_t i = 0; i < s.plane(); ++i) inner += sp[i] * kp[i];
    for (std::size_t i = 0; i < s.plane(); ++i) out[i] += sp[i] * (kp[i] - inner) / tau;
  }
}

}  // namespace

template <typename T>
Var ghost_shift(Tape<T>& tape, Var intrinsic, Var proxy, const Tensor<T>& noise, T tau,
                std::span<const int> assignment, ShiftPath path) {
  const Shape& is = tape.shape(intrinsic);
  const Shape& ps = tape.shape(proxy);
  if (assignment.empty()) throw std::invalid_argument("ghost_shift: no ghost channels");
  check_assignment(assignment, is.c);
  if (ps.c != 1 || ps.h != ps.w || ps.h % 2 == 0) {
    throw std::invalid_argument("ghost_shift: proxy must be (p, 1, K, K) with K odd, got " + ps.str());
  }
  if (ps.n != 1 && ps.n != assignment.size()) {
    throw std::invalid_argument("ghost_shift: proxy count " + std::to_string(ps.n) + " must be 1 or the ghost count " +
                                std::to_string(assignment.size()));
  }
  const int d = static_cast<int>(ps.h / 2);
  const bool shared = ps.n == 1;
  Tensor<T> soft = soft_shift_weight(tape.value(proxy), noise, tau);

  // Hardening the logits rather than S avoids ties created by rounding in exp.
  Tensor<T> logits(ps);
  for (std::size_t i = 0; i < logits.numel(); ++i) {
    logits.data()[i] = tape.value(proxy).data()[i] + noise.data()[i];
  }
  std::vector<Offset> offsets = harden_all(logits);

  const std::size_t G = assignment.size();
  const std::size_t K = grid_size(d);
  Tensor<T> out(Shape{is.n, G, is.h, is.w});
  const Tensor<T>& in = tape.value(intrinsic);
  parallel_for(G, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const auto src = static_cast<std::size_t>(assignment[j]);
      const std::size_t p = shared ? 0 : j;
      for (std::size_t n = 0; n < is.n; ++n) {
        if (path == ShiftPath::StraightThrough) {
          kernels::shift_plane(in.plane(n, src), out.plane(n, j), is.h, is.w, offsets[p].di, offsets[p].dj);
        } else {
          const T* k = soft.plane(p, 0);
          for (std::size_t a = 0; a < K; ++a) {
            for (std::size_t b = 0; b < K; ++b) {
              kernels::axpy_shifted(k[a * K + b], in.plane(n, src), out.plane(n, j), is.h, is.w,
                                    static_cast<int>(a) - d, static_cast<int>(b) - d);
            }
          }
        }
      }
    }
  });

  std::vector<int> assign(assignment.begin(), assignment.end());
  return tape.record(
      std::move(out), {intrinsic, proxy},
      [intrinsic, assign, soft = std::move(soft), offsets = std::move(offsets), tau, d, shared, path, K](
          const Tape<T>& t, const Tensor<T>& g, GradSink<T>& sink) {
        const Tensor<T>& in = t.value(intrinsic);
        const Shape& s = g.shape();
        if (auto* gi = sink[0]) {
          for (std::size_t j = 0; j < assign.size(); ++j) {
            const auto src = static_cast<std::size_t>(assign[j]);
            const std::size_t p = shared ? 0 : j;
            for (std::size_t n = 0; n < s.n; ++n) {
              if (path == ShiftPath::StraightThrough) {
                kernels::shift_plane_adjoint_add(g.plane(n, j), gi->plane(n, src), s.h, s.w, offsets[p].di,
                                                 offsets[p].dj);
              } else {
                const T* k = soft.plane(p, 0);
                for (std::size_t a = 0; a < K; ++a) {
                  for (std::size_t b = 0; b < K; ++b) {
                    kernels::axpy_shifted_adjoint(k[a * K + b], g.plane(n, j), gi->plane(n, src), s.h, s.w,
                                                  static_cast<int>(a) - d, static_cast<int>(b) - d);
                  }
                }
              }
            }
          }
        }
        if (auto* gp = sink[1]) {
          const Tensor<T> dk = kernel_grad(g, in, assign, soft.shape().n, d);
          softmax_backward(soft, dk, tau, *gp);
        }
      });
}

template <typename T>
Var ghost_shift_hard(Tape<T>& tape, Var intrinsic, std::span<const Offset> offsets,
                     std::span<const int> assignment, int d) {
  const Shape& is = tape.shape(intrinsic);
  if (assignment.empty()) throw std::invalid_argument("ghost_shift_hard: no ghost channels");
  check_assignment(assignment, is.c);
  if (offsets.size() != 1 && offsets.size() != assignment.size()) {
    throw std::invalid_argument("ghost_shift_hard: offset count " + std::to_string(offsets.size()) +
                                " must be 1 or the ghost count " + std::to_string(assignment.size()));
  }
  for (Offset o : offsets) check_offset(o, d);
  const bool shared = offsets.size() == 1;
  const std::size_t G = assignment.size();
  Tensor<T> out(Shape{is.n, G, is.h, is.w});
  const Tensor<T>& in = tape.value(intrinsic);
  parallel_for(G, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const Offset o = offsets[shared ? 0 : j];
      for (std::size_t n = 0; n < is.n; ++n) {
        kernels::shift_plane(in.plane(n, static_cast<std::size_t>(assignment[j])), out.plane(n, j), is.h, is.w, o.di,
                             o.dj);
      }
    }
  });
  std::vector<int> assign(assignment.begin(), assignment.end());
  std::vector<Offset> offs(offsets.begin(), offsets.end());
  return tape.record(std::move(out), {intrinsic},
                     [assign, offs, shared](const Tape<T>&, const Tensor<T>& g, GradSink<T>& sink) {
                       auto* gi = sink[0];
                       if (!gi) return;
                       const Shape& s = g.shape();
                       for (std::size_t j = 0; j < assign.size(); ++j) {
                         const Offset o = offs[shared ? 0 : j];
                         for (std::size_t n = 0; n < s.n; ++n) {
                           kernels::shift_plane_adjoint_add(g.plane(n, j),
                                                            gi->plane(n, static_cast<std::size_t>(assign[j])), s.h,
                                                            s.w, o.di, o.dj);
                         }
                       }
                     });
}

template <typename T>
Var shift_train_forward(Tape<T>& tape, Var x_channel, Var proxy, const ShiftWeight<T>& sw, NoiseMode mode,
                        Rng& rng) {
  if (tape.shape(x_channel).c != 1) throw std::invalid_argument("shift_train_forward expects one channel");
  const std::size_t K = grid_size(sw.d);
  const Shape ps{1, 1, K, K};
  if (!(tape.shape(proxy) == ps)) throw std::invalid_argument("proxy shape does not match d");
  Tensor<T> noise = mode == NoiseMode::Sampled ? gumbel_noise<T>(ps, rng) : Tensor<T>(ps);
  const int assignment[] = {0};
  return ghost_shift(tape, x_channel, proxy, noise, sw.tau, assignment, ShiftPath::StraightThrough);
}

std::size_t ghost_count(std::size_t c_o, double ratio) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("ghost ratio must lie in [0, 1), got " + std::to_string(ratio));
  }
  const double g = ratio * static_cast<double>(c_o);
  const double rounded = std::round(g);
  if (std::abs(g - rounded) > 1e-9) {
    throw std::invalid_argument("ghost ratio " + std::to_string(ratio) + " times c_o=" + std::to_string(c_o) +
                                " is not an integer");
  }
  return static_cast<std::size_t>(rounded);
}

std::vector<int> inverse_permutation(std::span<const int> permutation) {
  std::vector<int> inv(permutation.size(), -1);
  for (std::size_t p = 0; p < permutation.size(); ++p) {
    const int c = permutation[p];
    if (c < 0 || static_cast<std::size_t>(c) >= permutation.size() || inv[static_cast<std::size_t>(c)] != -1) {
      throw std::invalid_argument("channel order is not a permutation");
    }
    inv[static_cast<std::size_t>(c)] = static_cast<int>(p);
  }
  return inv;
}

std::size_t GhostLayerSpec::ghosts() const { return ghost_count(conv.c_o, ratio); }

void GhostLayerSpec::validate() const {
  conv.validate();
  const std::size_t g = ghosts();
  if (g == conv.c_o) throw std::invalid_argument("ghost layer needs at least one intrinsic channel");
  if (assignment.size() != g) {
    throw std::invalid_argument("assignment has " + std::to_string(assignment.size()) + " entries for " +
                                std::to_string(g) + " ghost channels");
  }
  check_assignment(assignment, intrinsic());
  if (!permutation.empty()) {
    if (permutation.size() != conv.c_o) throw std::invalid_argument("permutation length differs from c_o");
    (void)inverse_permutation(permutation);
  }
  if (d < 0) throw std::invalid_argument("max offset d must be >= 0");
  if (!(tau > 0.0)) throw std::invalid_argument("temperature tau must be > 0");
}

template <typename T>
Var ghost_layer_forward(Tape<T>& tape, Var x, const GhostLayerSpec& spec, Var weight, std::optional<Var> bias,
                        ShiftMode mode, const GhostShiftState<T>& state) {
  spec.validate();
  Var intrinsic = conv2d(tape, x, weight, bias, spec.intrinsic_conv());
  if (spec.ghosts() == 0) return intrinsic;

  Var ghosts;
  if (state.offsets) {
    if (state.offsets->size() != spec.proxy_count()) {
      throw std::invalid_argument("hardened offset count differs from the layer's shift count");
    }
    ghosts = ghost_shift_hard(tape, intrinsic, *state.offsets, spec.assignment, spec.d);
  } else if (mode == ShiftMode::Inference) {
    throw InvalidState("ghost layer has not been hardened; freeze it before inference");
  } else {
    if (!state.proxy) throw InvalidState("ghost layer has neither shift proxies nor hardened offsets");
    const std::size_t K = grid_size(spec.d);
    const Shape expected{spec.proxy_count(), 1, K, K};
    if (!(tape.shape(*state.proxy) == expected)) {
      throw std::invalid_argument("proxy shape " + tape.shape(*state.proxy).str() + " expected " + expected.str());
    }
    ghosts = ghost_shift(tape, intrinsic, *state.proxy, state.noise, static_cast<T>(spec.tau), spec.assignment,
                         mode == ShiftMode::Soft ? ShiftPath::Soft : ShiftPath::StraightThrough);
  }
  Var y = concat_channels(tape, intrinsic, ghosts);
  if (spec.permutation.empty()) return y;
  const std::vector<int> order = inverse_permutation(spec.permutation);
  bool identity = true;
  for (std::size_t i = 0; i < order.size(); ++i) identity = identity && order[i] == static_cast<int>(i);
  if (identity) return y;
  return gather_channels(tape, y, std::span<const int>(order));
}

#define GHOSTSR_INSTANTIATE_SHIFT(T)                                                                             \
  template Tensor<T> one_hot_from_offsets<T>(Offset, int);                                                      \
  template Tensor<T> gumbel_noise<T>(const Shape&, Rng&);                                                       \
  template Tensor<T> soft_shift_weight<T>(const Tensor<T>&, const Tensor<T>&, T);                               \
  template Offset harden_offsets<T>(std::span<const T>, int);                                                   \
  template std::vector<Offset> harden_all<T>(const Tensor<T>&);                                                 \
  template Tensor<T> shift2d<T>(const Tensor<T>&, Offset, int);                                                 \
  template Var ghost_shift<T>(Tape<T>&, Var, Var, const Tensor<T>&, T, std::span<const int>, ShiftPath);        \
  template Var ghost_shift_hard<T>(Tape<T>&, Var, std::span<const Offset>, std::span<const int>, int);          \
  template Var shift_train_forward<T>(Tape<T>&, Var, Var, const ShiftWeight<T>&, NoiseMode, Rng&);              \
  template Var ghost_layer_forward<T>(Tape<T>&, Var, const GhostLayerSpec&, Var, std::optional<Var>, ShiftMode, \
                                      const GhostShiftState<T>&);

GHOSTSR_INSTANTIATE_SHIFT(float)
GHOSTSR_INSTANTIATE_SHIFT(double)

#undef GHOSTSR_INSTANTIATE_SHIFT

}  // namespace ghostsr
