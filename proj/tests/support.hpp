#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "ghostsr/ops.hpp"
#include "ghostsr/rng.hpp"
#include "ghostsr/tape.hpp"

namespace ghostsr::testing {

template <typename T>
Tensor<T> random_tensor(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(s);
  for (T& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

/// Builds a scalar loss on a fresh tape from parameter leaves registered in
/// order. Called repeatedly with perturbed values.
using LossBuilder = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

inline double evaluate(const LossBuilder& build, const std::vector<Tensor<double>>& params) {
  Tape<double> tape(false);
  std::vector<Var> vars;
  for (const auto& p : params) vars.push_back(tape.parameter(p));
  return tape.value(build(tape, vars)).item();
}

/// Central differences at h, h/2, h/4 combined by two Richardson steps, so
/// truncation error is O(h^6) for smooth functions.
inline double numeric_partial(const LossBuilder& build, std::vector<Tensor<double>>& params, std::size_t which,
                              std::size_t index, double h) {
  double& x = params[which].data()[index];
  const double x0 = x;
  auto central = [&](double step) {
    x = x0 + step;
    const double up = evaluate(build, params);
    x = x0 - step;
    const double down = evaluate(build, params);
    x = x0;
    return (up - down) / (2.0 * step);
  };
  const double d1 = central(h);
  const double d2 = central(h / 2);
  const double d4 = central(h / 4);
  const double r1 = (4.0 * d2 - d1) / 3.0;
  const double r2 = (4.0 * d4 - d2) / 3.0;
  return (16.0 * r2 - r1) / 15.0;
}

/// Compares every analytic gradient entry with the finite-difference oracle
/// using |a - n| / (|a| + 1e-8).
inline GradCheck check_gradients(const LossBuilder& build, std::vector<Tensor<double>> params, double h = 1e-2) {
  Tape<double> tape;
  std::vector<Var> vars;
  for (const auto& p : params) vars.push_back(tape.parameter(p));
  const Gradients<double> grads = tape.backward(build(tape, vars));
  GradCheck out;
  for (std::size_t w = 0; w < params.size(); ++w) {
    const Tensor<double>& g = grads[vars[w]];
    for (std::size_t i = 0; i < params[w].numel(); ++i) {
      const double numeric = numeric_partial(build, params, w, i, h);
      const double analytic = g.data()[i];
      out.max_rel_error = std::max(out.max_rel_error, std::abs(analytic - numeric) / (std::abs(analytic) + 1e-8));
      ++out.checked;
    }
  }
  return out;
}

/// Loss = sum(out * weights) for a fixed random weighting, which makes every
/// output element contribute a distinct upstream gradient.
inline Var weighted_sum(Tape<double>& tape, Var out, const Tensor<double>& weights) {
  return sum(tape, mul(tape, out, tape.constant(weights)));
}

}  // namespace ghostsr::testing
