#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "ghostsr/config.hpp"
#include "ghostsr/tensor.hpp"

namespace ghostsr {

// Counting convention
//   params: c_o * c_i * s^2 weights plus c_o biases when present.
//   FLOPs:  h * w * c_o * c_i * s^2, one multiply-accumulate = one FLOP;
//           bias adds, activations and structural ops are free.
//   h, w:   HR size / scale * upscale of the layer, kept fractional.
//   ghost:  the intrinsic conv is counted with (1 - ratio) c_o outputs; the
//           shift row is always 0 params, 0 FLOPs.
//   inactive layers (other-scale upsamplers) keep their params, 0 FLOPs.

enum class CostKind { Conv, GhostConv, Shift, Inactive };

std::string cost_kind_name(CostKind kind);

struct LayerCost {
  std::string layer;
  CostKind kind = CostKind::Conv;
  std::size_t c_i = 0;
  std::size_t c_o = 0;
  std::size_t s = 0;
  double h = 0.0;
  double w = 0.0;
  std::uint64_t params = 0;
  double flops = 0.0;
};

struct CostReport {
  std::string model;
  std::size_t scale = 1;
  std::size_t hr_h = 720;
  std::size_t hr_w = 1280;
  std::vector<LayerCost> rows;
  std::uint64_t total_params = 0;
  double total_flops = 0.0;
};

/// Analytic params/FLOPs of a (possibly converted) config at the given HR size.
CostReport count(const ModelConfig& config, std::size_t hr_h = 720, std::size_t hr_w = 1280);

void print_report(std::ostream& out, const CostReport& report, bool per_layer = true);
void write_report_csv(std::ostream& out, const CostReport& report);

enum class BenchOp { Shift, Depthwise3x3, Conv3x3 };

std::string bench_op_name(BenchOp op);
/// "shift", "depthwise3x3" or "conv3x3"; throws std::invalid_argument otherwise.
BenchOp parse_bench_op(const std::string& name);

struct BenchOptions {
  std::size_t reps = 10;
  std::size_t warmup = 3;
  std::uint64_t seed = 0;
};

struct BenchResult {
  BenchOp op = BenchOp::Shift;
  Shape shape;
  std::size_t reps = 0;
  std::size_t warmup = 0;
  int threads = 1;
  double median_ms = 0.0;
  double min_ms = 0.0;
  double flops = 0.0;
  double gflops_per_s = 0.0;
  double gbytes_per_s = 0.0;  // input read plus output written
};

/// Raised when a kernel disagrees with its reference before timing.
class BenchCorrectnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// FLOPs of one application of op to a tensor of shape (c_i = c_o = shape.c).
double bench_flops(BenchOp op, const Shape& shape);

/// Times the inference kernel for op. A correctness pre-pass compares shift
/// with one-hot depthwise (bitwise) and the blocked kernels with their naive
/// references; disagreement throws BenchCorrectnessError. reps must be >= 10.
BenchResult bench(BenchOp op, const Shape& shape, const BenchOptions& options = {});

void print_bench(std::ostream& out, const std::vector<BenchResult>& results);
void write_bench_csv(std::ostream& out, const std::vector<BenchResult>& results);

}  // namespace ghostsr
