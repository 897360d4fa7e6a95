#pragma once

// Raw loops behind the differentiable ops. All convolutions are stride 1 with
// zero "same" padding, written as cross-correlation:
//   out[y, x] = sum_{i, j} k[i + p, j + p] * in[y + i, x + j].

#include <algorithm>
#include <cstddef>
#include <cstring>

#include "ghostsr/parallel.hpp"
#include "ghostsr/tensor.hpp"

namespace ghostsr::kernels {

/// Output rows/cols [lo, hi) whose input index (out + offset) is in bounds.
struct Span1d {
  std::ptrdiff_t lo;
  std::ptrdiff_t hi;
};
inline Span1d valid_range(std::ptrdiff_t extent, std::ptrdiff_t offset) {
  return {std::max<std::ptrdiff_t>(0, -offset), std::min(extent, extent - offset)};
}

/// dst[y, x] = src[y + di, x + dj], zero where the source is out of bounds.
template <typename T>
void shift_plane(const T* src, T* dst, std::size_t h, std::size_t w, int di, int dj) {
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  const Span1d rows = valid_range(H, di);
  const Span1d cols = valid_range(W, dj);
  for (std::ptrdiff_t y = 0; y < H; ++y) {
    T* out = dst + y * W;
    if (y < rows.lo || y >= rows.hi || cols.lo >= cols.hi) {
      std::fill(out, out + W, T{0});
      continue;
    }
    const T* in = src + (y + di) * W + dj;
    std::fill(out, out + cols.lo, T{0});
    std::memcpy(out + cols.lo, in + cols.lo, static_cast<std::size_t>(cols.hi - cols.lo) * sizeof(T));
    std::fill(out + cols.hi, out + W, T{0});
  }
}

/// Adjoint of shift_plane: acc[y + di, x + dj] += g[y, x].
template <typename T>
void shift_plane_adjoint_add(const T* g, T* acc, std::size_t h, std::size_t w, int di, int dj) {
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  const Span1d rows = valid_range(H, di);
  const Span1d cols = valid_range(W, dj);
  for (std::ptrdiff_t y = rows.lo; y < rows.hi; ++y) {
    const T* src = g + y * W;
    T* dst = acc + (y + di) * W + dj;
    for (std::ptrdiff_t x = cols.lo; x < cols.hi; ++x) dst[x] += src[x];
  }
}

/// sum_{y, x} a[y, x] * b[y + di, x + dj] over the in-bounds region.
template <typename T>
T shifted_dot(const T* a, const T* b, std::size_t h, std::size_t w, int di, int dj) {
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  const Span1d rows = valid_range(H, di);
  const Span1d cols = valid_range(W, dj);
  T lanes[8] = {};
  T tail{0};
  for (std::ptrdiff_t y = rows.lo; y < rows.hi; ++y) {
    const T* pa = a + y * W;
    const T* pb = b + (y + di) * W + dj;
    std::ptrdiff_t x = cols.lo;
    for (; x + 8 <= cols.hi; x += 8) {
      for (int l = 0; l < 8; ++l) lanes[l] += pa[x + l] * pb[x + l];
    }
    for (; x < cols.hi; ++x) tail += pa[x] * pb[x];
  }
  T total = tail;
  for (T v : lanes) total += v;
  return total;
}

/// acc[y, x] += k * src[y + di, x + dj] over the in-bounds region.
template <typename T>
void axpy_shifted(T k, const T* src, T* acc, std::size_t h, std::size_t w, int di, int dj) {
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  const Span1d rows = valid_range(H, di);
  const Span1d cols = valid_range(W, dj);
  for (std::ptrdiff_t y = rows.lo; y < rows.hi; ++y) {
    const T* in = src + (y + di) * W + dj;
    T* out = acc + y * W;
    for (std::ptrdiff_t x = cols.lo; x < cols.hi; ++x) out[x] += k * in[x];
  }
}

/// acc[y + di, x + dj] += k * g[y, x]; the adjoint of axpy_shifted.
template <typename T>
void axpy_shifted_adjoint(T k, const T* g, T* acc, std::size_t h, std::size_t w, int di, int dj) {
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  const Span1d rows = valid_range(H, di);
  const Span1d cols = valid_range(W, dj);
  for (std::ptrdiff_t y = rows.lo; y < rows.hi; ++y) {
    const T* in = g + y * W;
    T* out = acc + (y + di) * W + dj;
    for (std::ptrdiff_t x = cols.lo; x < cols.hi; ++x) out[x] += k * in[x];
  }
}

// ---------------------------------------------------------------------------
// Dense convolution. weight: (c_o, c_i, s, s), bias: c_o values or nullptr.

/// Direct per-output summation in (c_i, ky, kx) order. The correctness oracle.
template <typename T>
void conv2d_naive(const Tensor<T>& x, const Tensor<T>& weight, const T* bias, Tensor<T>& out) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  const auto H = static_cast<std::ptrdiff_t>(xs.h);
  const auto W = static_cast<std::ptrdiff_t>(xs.w);
  const auto s = static_cast<std::ptrdiff_t>(ws.h);
  const std::ptrdiff_t pad = (s - 1) / 2;
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t co = 0; co < ws.n; ++co) {
      for (std::ptrdiff_t y = 0; y < H; ++y) {
        for (std::ptrdiff_t xx = 0; xx < W; ++xx) {
          T acc = bias ? bias[co] : T{0};
          for (std::size_t ci = 0; ci < ws.c; ++ci) {
            for (std::ptrdiff_t ky = 0; ky < s; ++ky) {
              for (std::ptrdiff_t kx = 0; kx < s; ++kx) {
                const std::ptrdiff_t iy = y + ky - pad;
                const std::ptrdiff_t ix = xx + kx - pad;
                if (iy < 0 || ix < 0 || iy >= H || ix >= W) continue;
                acc += weight(co, ci, static_cast<std::size_t>(ky), static_cast<std::size_t>(kx)) *
                       x(n, ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
              }
            }
          }
          out(n, co, static_cast<std::size_t>(y), static_cast<std::size_t>(xx)) = acc;
        }
      }
    }
  }
}

/// Plane-at-a-time form: every tap becomes a contiguous, vectorisable row
/// update. Parallel over output channels.
template <typename T>
void conv2d_blocked(const Tensor<T>& x, const Tensor<T>& weight, const T* bias, Tensor<T>& out) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  const int s = static_cast<int>(ws.h);
  const int pad = (s - 1) / 2;
  parallel_for(ws.n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = 0; n < xs.n; ++n) {
      for (std::size_t co = begin; co < end; ++co) {
        T* dst = out.plane(n, co);
        std::fill(dst, dst + xs.plane(), bias ? bias[co] : T{0});
        for (std::size_t ci = 0; ci < ws.c; ++ci) {
          const T* src = x.plane(n, ci);
          const T* k = weight.data() + (co * ws.c + ci) * ws.plane();
          for (int ky = 0; ky < s; ++ky) {
            for (int kx = 0; kx < s; ++kx) {
              axpy_shifted(k[ky * s + kx], src, dst, xs.h, xs.w, ky - pad, kx - pad);
            }
          }
        }
      }
    }
  });
}

/// grad_x += correlation-adjoint of grad_out with weight.
template <typename T>
void conv2d_grad_input(const Tensor<T>& grad_out, const Tensor<T>& weight, Tensor<T>& grad_x) {
  const Shape& gs = grad_out.shape();
  const Shape& ws = weight.shape();
  const int s = static_cast<int>(ws.h);
  const int pad = (s - 1) / 2;
  parallel_for(ws.c, [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = 0; n < gs.n; ++n) {
      for (std::size_t ci = begin; ci < end; ++ci) {
        T* dst = grad_x.plane(n, ci);
        for (std::size_t co = 0; co < ws.n; ++co) {
          const T* g = grad_out.plane(n, co);
          const T* k = weight.data() + (co * ws.c + ci) * ws.plane();
          for (int ky = 0; ky < s; ++ky) {
            for (int kx = 0; kx < s; ++kx) {
              axpy_shifted_adjoint(k[ky * s + kx], g, dst, gs.h, gs.w, ky - pad, kx - pad);
            }
          }
        }
      }
    }
  });
}

/// grad_w += sum over batch and pixels of grad_out * shifted input.
template <typename T>
void conv2d_grad_weight(const Tensor<T>& grad_out, const Tensor<T>& x, Tensor<T>& grad_w) {
  const Shape& gs = grad_out.shape();
  const Shape& ws = grad_w.shape();
  const int s = static_cast<int>(ws.h);
  const int pad = (s - 1) / 2;
  parallel_for(ws.n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t co = begin; co < end; ++co) {
      for (std::size_t ci = 0; ci < ws.c; ++ci) {
        T* k = grad_w.data() + (co * ws.c + ci) * ws.plane();
        for (std::size_t n = 0; n < gs.n; ++n) {
          const T* g = grad_out.plane(n, co);
          const T* src = x.plane(n, ci);
          for (int ky = 0; ky < s; ++ky) {
            for (int kx = 0; kx < s; ++kx) {
              k[ky * s + kx] += shifted_dot(g, src, gs.h, gs.w, ky - pad, kx - pad);
            }
          }
        }
      }
    }
  });
}

template <typename T>
void conv2d_grad_bias(const Tensor<T>& grad_out, T* grad_b) {
  const Shape& gs = grad_out.shape();
  for (std::size_t co = 0; co < gs.c; ++co) {
    T acc{0};
    for (std::size_t n = 0; n < gs.n; ++n) {
      const T* g = grad_out.plane(n, co);
      for (std::size_t i = 0; i < gs.plane(); ++i) acc += g[i];
    }
    grad_b[co] += acc;
  }
}

// ---------------------------------------------------------------------------
// Depthwise convolution. kernel: (c, 1, K, K), one K x K filter per channel.

template <typename T>
void depthwise_naive(const Tensor<T>& x, const Tensor<T>& kernel, Tensor<T>& out) {
  const Shape& xs = x.shape();
  const auto K = static_cast<std::ptrdiff_t>(kernel.shape().h);
  const std::ptrdiff_t pad = (K - 1) / 2;
  const auto H = static_cast<std::ptrdiff_t>(xs.h);
  const auto W = static_cast<std::ptrdiff_t>(xs.w);
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t c = 0; c < xs.c; ++c) {
      for (std::ptrdiff_t y = 0; y < H; ++y) {
        for (std::ptrdiff_t xx = 0; xx < W; ++xx) {
          T acc{0};
          for (std::ptrdiff_t ky = 0; ky < K; ++ky) {
            for (std::ptrdiff_t kx = 0; kx < K; ++kx) {
              const std::ptrdiff_t iy = y + ky - pad;
              const std::ptrdiff_t ix = xx + kx - pad;
              if (iy < 0 || ix < 0 || iy >= H || ix >= W) continue;
              acc += kernel(c, 0, static_cast<std::size_t>(ky), static_cast<std::size_t>(kx)) *
                     x(n, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
            }
          }
          out(n, c, static_cast<std::size_t>(y), static_cast<std::size_t>(xx)) = acc;
        }
      }
    }
  }
}

/// Row-vectorised depthwise convolution, parallel over channels.
template <typename T>
void depthwise_blocked(const Tensor<T>& x, const Tensor<T>& kernel, Tensor<T>& out) {
  const Shape& xs = x.shape();
  const int K = static_cast<int>(kernel.shape().h);
  const int pad = (K - 1) / 2;
  parallel_for(xs.c, [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = 0; n < xs.n; ++n) {
      for (std::size_t c = begin; c < end; ++c) {
        T* dst = out.plane(n, c);
        std::fill(dst, dst + xs.plane(), T{0});
        const T* src = x.plane(n, c);
        const T* k = kernel.data() + c * kernel.shape().plane();
        for (int ky = 0; ky < K; ++ky) {
          for (int kx = 0; kx < K; ++kx) {
            axpy_shifted(k[ky * K + kx], src, dst, xs.h, xs.w, ky - pad, kx - pad);
          }
        }
      }
    }
  });
}

}  // namespace ghostsr::kernels
