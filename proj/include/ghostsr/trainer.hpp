#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ghostsr/network.hpp"

namespace ghostsr {

struct AdamSpec {
  double lr0 = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers and their step counts are keyed
/// by parameter name and created on first use; begin_step() opens a step.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamSpec spec = {}) : spec_(spec) {}

  void begin_step() { ++t_; }
  [[nodiscard]] std::uint64_t t() const { return t_; }
  [[nodiscard]] const AdamSpec& spec() const { return spec_; }

  void update(const std::string& key, std::span<T> param, std::span<const T> grad, double lr);

 private:
  struct Moments {
    std::vector<T> m;
    std::vector<T> v;
    std::uint64_t t = 0;
  };
  AdamSpec spec_;
  std::uint64_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

/// 0.5 lr0 (1 + cos(pi t / T)); t is clamped to [0, T].
double cosine_lr(std::size_t t, std::size_t total, double lr0);

enum class LossKind { L1, L2 };

struct Batch {
  Tensor<float> lr;
  Tensor<float> hr;
};

using BatchProvider = std::function<Batch(std::size_t step, Rng& rng)>;

struct LogRow {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double wall_ms = 0.0;
};

struct TrainOptions {
  std::size_t steps = 100;
  AdamSpec adam;
  LossKind loss = LossKind::L1;
  std::uint64_t seed = 0;
  bool timing = true;  // false writes wall_ms = 0 for reproducible logs
  NoiseMode noise = NoiseMode::Sampled;
  std::function<void(const LogRow&)> on_step;
};

struct TrainResult {
  Network network;
  std::vector<LogRow> log;
};

/// Raised when a step produces a non-finite loss; the message carries the
/// step, learning rate and the offending parameter tensors.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per step: draw a batch, forward with straight-through shifts, loss,
/// backward, Adam update of weights, biases and shift proxies.
TrainResult train(Network network, const BatchProvider& batches, const TrainOptions& options);

void write_log_csv(std::ostream& out, std::span<const LogRow> log);

}  // namespace ghostsr
