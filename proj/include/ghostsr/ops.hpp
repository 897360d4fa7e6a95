#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ghostsr/tape.hpp"

namespace ghostsr {

/// Square, stride-1, same-padded convolution.
struct ConvSpec {
  std::size_t c_i = 1;
  std::size_t c_o = 1;
  std::size_t s = 3;
  bool bias = true;

  /// Throws std::invalid_argument for an even kernel or empty channel counts.
  void validate() const;
  [[nodiscard]] Shape weight_shape() const { return Shape{c_o, c_i, s, s}; }
  [[nodiscard]] Shape bias_shape() const { return Shape{1, c_o, 1, 1}; }
  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

enum class ConvAlgorithm { Naive, Blocked };

// Every op below appends one node to the tape and returns its handle. Shape
// errors throw std::invalid_argument naming the offending dimension.

template <typename T>
Var conv2d(Tape<T>& tape, Var x, Var weight, std::optional<Var> bias, const ConvSpec& spec,
           ConvAlgorithm algo = ConvAlgorithm::Blocked);

/// kernel: (c, 1, K, K) with K odd.
template <typename T>
Var depthwise_conv2d(Tape<T>& tape, Var x, Var kernel);

template <typename T>
Var relu(Tape<T>& tape, Var x);

template <typename T>
Var leaky_relu(Tape<T>& tape, Var x, T slope);

template <typename T>
Var add(Tape<T>& tape, Var a, Var b);

template <typename T>
Var mul(Tape<T>& tape, Var a, Var b);

template <typename T>
Var scalar_mul(Tape<T>& tape, Var x, T k);

/// Adds a fixed per-channel constant (e.g. the dataset RGB mean).
template <typename T>
Var add_channel_constant(Tape<T>& tape, Var x, std::span<const T> values);

template <typename T>
Var concat_channels(Tape<T>& tape, std::span<const Var> parts);

template <typename T>
Var concat_channels(Tape<T>& tape, Var a, Var b) {
  const Var parts[] = {a, b};
  return concat_channels(tape, std::span<const Var>(parts));
}

template <typename T>
Var slice_channels(Tape<T>& tape, Var x, std::size_t start, std::size_t count);

/// out[:, p] = x[:, order[p]]; order must be a permutation.
template <typename T>
Var gather_channels(Tape<T>& tape, Var x, std::span<const int> order);

/// Depth-to-space: out(c, y, x) = in(c r^2 + (y mod r) r + (x mod r), y / r, x / r).
template <typename T>
Var pixel_shuffle(Tape<T>& tape, Var x, std::size_t r);

template <typename T>
Var sum(Tape<T>& tape, Var x);

/// mean |pred - target|; target is not differentiated.
template <typename T>
Var l1_loss(Tape<T>& tape, Var pred, Var target);

/// mean (pred - target)^2; target is not differentiated.
template <typename T>
Var mse_loss(Tape<T>& tape, Var pred, Var target);

}  // namespace ghostsr
