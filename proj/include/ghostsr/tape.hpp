#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ghostsr/tensor.hpp"

namespace ghostsr {

/// Handle to a value recorded on a Tape.
struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  [[nodiscard]] bool valid() const noexcept { return id != kNone; }
  friend bool operator==(const Var&, const Var&) = default;
};

template <typename T>
class Tape;

/// Hands a backward function the gradient buffers of its inputs. Buffers are
/// allocated on first touch and only for inputs that need a gradient, so
/// backward code must accumulate (+=) and must check for nullptr.
template <typename T>
class GradSink {
 public:
  GradSink(const Tape<T>& tape, std::span<const Var> inputs,
           std::vector<std::optional<Tensor<T>>>& grads)
      : tape_(tape), inputs_(inputs), grads_(grads) {}

  Tensor<T>* operator[](std::size_t slot);

 private:
  const Tape<T>& tape_;
  std::span<const Var> inputs_;
  std::vector<std::optional<Tensor<T>>>& grads_;
};

/// Gradients of a scalar loss with respect to every registered parameter.
template <typename T>
class Gradients {
 public:
  void set(Var v, Tensor<T> g) { grads_.insert_or_assign(v.id, std::move(g)); }

  [[nodiscard]] const Tensor<T>& operator[](Var v) const {
    auto it = grads_.find(v.id);
    if (it == grads_.end()) throw std::invalid_argument("no gradient recorded for this variable");
    return it->second;
  }
  [[nodiscard]] bool contains(Var v) const { return grads_.contains(v.id); }
  [[nodiscard]] std::size_t size() const { return grads_.size(); }

 private:
  std::unordered_map<std::size_t, Tensor<T>> grads_;
};

/// Reverse-mode tape. Nodes are appended in creation order, so ids are
/// strictly increasing and the graph is acyclic by construction. Backward
/// never mutates recorded values; it can run any number of times.
template <typename T>
class Tape {
 public:
  using Backward = std::function<void(const Tape&, const Tensor<T>& grad_out, GradSink<T>&)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) noexcept = default;
  Tape& operator=(Tape&&) noexcept = default;

  [[nodiscard]] bool grad_enabled() const noexcept { return grad_enabled_; }

  Var constant(Tensor<T> value) { return push(std::move(value), {}, nullptr, false, false); }

  /// Registers a differentiable leaf. With gradients disabled it is a constant.
  Var parameter(Tensor<T> value) {
    const bool track = grad_enabled_;
    Var v = push(std::move(value), {}, nullptr, track, track);
    if (track) parameters_.push_back(v);
    return v;
  }

  /// Records the result of an op. The node requires a gradient if any input does.
  Var record(Tensor<T> value, std::vector<Var> inputs, Backward backward) {
    bool needs = false;
    if (grad_enabled_) {
      for (Var in : inputs) needs = needs || node(in).requires_grad;
    }
    if (!needs) return push(std::move(value), {}, nullptr, false, false);
    return push(std::move(value), std::move(inputs), std::move(backward), true, false);
  }

  [[nodiscard]] const Tensor<T>& value(Var v) const { return node(v).value; }
  [[nodiscard]] const Shape& shape(Var v) const { return node(v).value.shape(); }
  [[nodiscard]] bool requires_grad(Var v) const { return node(v).requires_grad; }
  [[nodiscard]] std::span<const Var> inputs(Var v) const { return node(v).inputs; }
  [[nodiscard]] std::span<const Var> parameters() const { return parameters_; }
  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

  /// Gradient of a single-element loss with respect to every parameter.
  /// Parameters the loss does not depend on receive zeros.
  [[nodiscard]] Gradients<T> backward(Var loss) const {
    if (node(loss).value.numel() != 1) {
      throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                  node(loss).value.shape().str());
    }
    std::vector<std::optional<Tensor<T>>> grads(nodes_.size());
    if (node(loss).requires_grad) grads[loss.id].emplace(node(loss).value.shape(), T{1});

    for (std::size_t id = loss.id + 1; id-- > 0;) {
      const Node& n = nodes_[id];
      if (!grads[id] || !n.backward) continue;
      GradSink<T> sink(*this, n.inputs, grads);
      n.backward(*this, *grads[id], sink);
    }

    Gradients<T> out;
    for (Var p : parameters_) {
      if (grads[p.id]) {
        out.set(p, std::move(*grads[p.id]));
      } else {
        out.set(p, Tensor<T>(node(p).value.shape(), T{0}));
      }
    }
    return out;
  }

 private:
  struct Node {
    Tensor<T> value;
    std::vector<Var> inputs;
    Backward backward;
    bool requires_grad = false;
    bool is_parameter = false;
  };

  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) throw std::invalid_argument("variable does not belong to this tape");
    return nodes_[v.id];
  }

  Var push(Tensor<T> value, std::vector<Var> inputs, Backward backward, bool requires_grad,
           bool is_parameter) {
    nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(backward), requires_grad,
                          is_parameter});
    return Var{nodes_.size() - 1};
  }

  bool grad_enabled_ = true;
  std::vector<Node> nodes_;
  std::vector<Var> parameters_;
};

template <typename T>
Tensor<T>* GradSink<T>::operator[](std::size_t slot) {
  const Var in = inputs_[slot];
  if (!tape_.requires_grad(in)) return nullptr;
  auto& g = grads_[in.id];
  if (!g) g.emplace(tape_.shape(in), T{0});
  return &*g;
}

}  // namespace ghostsr
