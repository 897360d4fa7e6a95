#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ghostsr/ops.hpp"
#include "ghostsr/rng.hpp"
#include "ghostsr/tape.hpp"

namespace ghostsr {

/// Integer displacement of a shift: R[y, x] = I[y + di, x + dj].
struct Offset {
  int di = 0;
  int dj = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

/// Throws std::invalid_argument unless |di|, |dj| <= d.
void check_offset(Offset o, int d);

/// Side length 2d + 1 of the offset grid.
inline std::size_t grid_size(int d) { return static_cast<std::size_t>(2 * d + 1); }

/// (1, 1, 2d+1, 2d+1) kernel with a single 1 at (di + d, dj + d).
template <typename T>
Tensor<T> one_hot_from_offsets(Offset o, int d);

/// -log(-log(u)) for u in (0, 1).
double gumbel_from_uniform(double u);

/// Standard Gumbel samples of the given shape.
template <typename T>
Tensor<T> gumbel_noise(const Shape& shape, Rng& rng);

/// Per-plane softmax of (proxy + noise) / tau, max-subtracted. Every (n, c)
/// plane of the result sums to one. Throws std::invalid_argument for tau <= 0.
template <typename T>
Tensor<T> soft_shift_weight(const Tensor<T>& proxy, const Tensor<T>& noise, T tau);

/// Argmax of one (2d+1)^2 grid given row-major; ties go to the smallest
/// (i, then j).
template <typename T>
Offset harden_offsets(std::span<const T> grid, int d);

/// harden_offsets applied to every plane of a (p, 1, K, K) tensor.
template <typename T>
std::vector<Offset> harden_all(const Tensor<T>& grids);

/// Shifts every plane of x by o with zero fill.
template <typename T>
Tensor<T> shift2d(const Tensor<T>& x, Offset o, int d);

/// How ghost features are produced from intrinsic ones during a forward pass.
enum class ShiftPath {
  StraightThrough,  // hard one-hot forward, softmax Jacobian backward
  Soft,             // the softmax kernel S itself is applied as a depthwise tap
};

/// Ghost features from learnable shifts. intrinsic: (n, k, h, w); proxy:
/// (p, 1, K, K) with p equal to the ghost count or 1 when shared; noise has
/// the proxy's shape. assignment[j] is the intrinsic channel feeding ghost j.
/// Returns (n, assignment.size(), h, w).
template <typename T>
Var ghost_shift(Tape<T>& tape, Var intrinsic, Var proxy, const Tensor<T>& noise, T tau,
                std::span<const int> assignment, ShiftPath path);

/// Ghost features from fixed offsets; offsets has one entry per ghost or a
/// single shared entry. Differentiable with respect to intrinsic only.
template <typename T>
Var ghost_shift_hard(Tape<T>& tape, Var intrinsic, std::span<const Offset> offsets,
                     std::span<const int> assignment, int d);

/// A learnable shift for a single channel plane.
template <typename T>
struct ShiftWeight {
  int d = 1;
  Tensor<T> proxy;  // (1, 1, 2d+1, 2d+1)
  T tau = T{1};
  std::optional<Offset> hardened;
};

enum class NoiseMode { Sampled, FrozenZero };

/// Straight-through training forward for one channel: output equals shift2d
/// at the argmax of proxy + noise, gradients reach the proxy via the softmax.
template <typename T>
Var shift_train_forward(Tape<T>& tape, Var x_channel, Var proxy, const ShiftWeight<T>& sw,
                        NoiseMode mode, Rng& rng);

/// One converted layer. The conv part produces (1 - ratio) * c_o intrinsic
/// channels; ghost channel k + j is a shift of intrinsic channel assignment[j].
struct GhostLayerSpec {
  ConvSpec conv;  // describes the full layer; conv.c_o is the total output width
  double ratio = 0.0;
  std::vector<int> assignment;
  /// permutation[p] is the original channel index held at internal position p;
  /// empty means identity. Outputs are restored to original order.
  std::vector<int> permutation;
  int d = 1;
  double tau = 1.0;
  bool shared = false;

  [[nodiscard]] std::size_t ghosts() const;
  [[nodiscard]] std::size_t intrinsic() const { return conv.c_o - ghosts(); }
  [[nodiscard]] ConvSpec intrinsic_conv() const {
    return ConvSpec{conv.c_i, intrinsic(), conv.s, conv.bias};
  }
  [[nodiscard]] std::size_t proxy_count() const { return shared ? std::size_t{1} : ghosts(); }

  /// Throws std::invalid_argument on a non-integral split, an out-of-range
  /// source channel or a malformed permutation.
  void validate() const;
};

/// Channel count split for ratio; throws std::invalid_argument unless
/// ratio * c_o is an integer and ratio is in [0, 1).
std::size_t ghost_count(std::size_t c_o, double ratio);

/// Order that returns internal [intrinsic | ghost] channels to original order.
std::vector<int> inverse_permutation(std::span<const int> permutation);

enum class ShiftMode {
  Train,      // straight-through with the supplied noise
  Soft,       // softmax kernel forward and backward
  Inference,  // hardened offsets only
};

/// Shift state for one ghost layer as seen by the forward pass.
template <typename T>
struct GhostShiftState {
  std::optional<Var> proxy;
  Tensor<T> noise;                      // used in Train and Soft modes
  std::optional<std::vector<Offset>> offsets;  // hardened offsets
};

/// Y = concat(conv(x), shift(conv(x))), reordered by the permutation. Train and
/// Soft modes need a proxy; a layer that only has hardened offsets runs the
/// hard path in every mode. Inference without offsets throws InvalidState.
template <typename T>
Var ghost_layer_forward(Tape<T>& tape, Var x, const GhostLayerSpec& spec, Var weight,
                        std::optional<Var> bias, ShiftMode mode, const GhostShiftState<T>& state);

}  // namespace ghostsr
