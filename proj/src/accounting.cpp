#include "ghostsr/accounting.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "ghostsr/kernels.hpp"
#include "ghostsr/parallel.hpp"
#include "ghostsr/rng.hpp"
#include "ghostsr/shift.hpp"

namespace ghostsr {

std::string cost_kind_name(CostKind kind) {
  switch (kind) {
    case CostKind::Conv: return "conv";
    case CostKind::GhostConv: return "ghost.conv";
    case CostKind::Shift: return "ghost.shift";
    case CostKind::Inactive: return "inactive";
  }
  return "?";
}

CostReport count(const ModelConfig& config, std::size_t hr_h, std::size_t hr_w) {
  const std::vector<NodeShape> shapes = config.infer_shapes();
  CostReport report;
  report.model = config.name;
  report.scale = config.scale;
  report.hr_h = hr_h;
  report.hr_w = hr_w;
  const double lr_h = static_cast<double>(hr_h) / static_cast<double>(config.scale);
  const double lr_w = static_cast<double>(hr_w) / static_cast<double>(config.scale);

  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerDef& l = config.layers[i];
    if (!l.is_conv()) continue;
    const auto up = static_cast<double>(shapes[i].upscale);
    LayerCost row;
    row.layer = l.name;
    row.c_i = l.conv.c_i;
    row.c_o = l.conv.c_o;
    row.s = l.conv.s;
    row.h = lr_h * up;
    row.w = lr_w * up;
    if (l.converted()) {
      row.kind = CostKind::GhostConv;
      row.c_o = l.conv.c_o - ghost_count(l.conv.c_o, *l.ghost_ratio);
    } else if (l.annotation == Annotation::Inactive) {
      row.kind = CostKind::Inactive;
    }
    const double taps = static_cast<double>(row.c_i * row.s * row.s);
    row.params = row.c_o * row.c_i * row.s * row.s + (l.conv.bias ? row.c_o : 0);
    row.flops = row.kind == CostKind::Inactive ? 0.0 : row.h * row.w * static_cast<double>(row.c_o) * taps;
    report.rows.push_back(row);

    if (row.kind == CostKind::GhostConv) {
      LayerCost shift = row;
      shift.kind = CostKind::Shift;
      shift.c_i = row.c_o;
      shift.c_o = l.conv.c_o - row.c_o;
      shift.s = 0;
      shift.params = 0;
      shift.flops = 0.0;
      report.rows.push_back(shift);
    }
  }
  for (const LayerCost& r : report.rows) {
    report.total_params += r.params;
    report.total_flops += r.flops;
  }
  return report;
}

namespace {

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

void print_report(std::ostream& out, const CostReport& report, bool per_layer) {
  out << "model " << report.model << "  x" << report.scale << "  HR " << report.hr_h << "x" << report.hr_w << "\n";
  out << "convention: FLOPs = h*w*c_o*c_i*s^2 (1 MAC = 1 FLOP), params include bias, shift = 0/0\n";
  if (per_layer) {
    std::size_t width = 5;
    for (const LayerCost& r : report.rows) width = std::max(width, r.layer.size());
    out << std::left << std::setw(static_cast<int>(width)) << "layer" << "  " << std::setw(11) << "kind"
        << std::right << std::setw(6) << "c_i" << std::setw(6) << "c_o" << std::setw(3) << "s" << std::setw(10)
        << "h" << std::setw(10) << "w" << std::setw(12) << "params" << std::setw(12) << "GFLOPs" << "\n";
    for (const LayerCost& r : report.rows) {
      out << std::left << std::setw(static_cast<int>(width)) << r.layer << "  " << std::setw(11)
          << cost_kind_name(r.kind) << std::right << std::setw(6) << r.c_i << std::setw(6) << r.c_o << std::setw(3)
          << r.s << std::setw(10) << fixed(r.h, 2) << std::setw(10) << fixed(r.w, 2) << std::setw(12) << r.params
          << std::setw(12) << fixed(r.flops / 1e9, 3) << "\n";
    }
  }
  out << "total params " << report.total_params << " (" << fixed(static_cast<double>(report.total_params) / 1e6, 4)
      << "M)  FLOPs " << fixed(report.total_flops / 1e9, 2) << "G\n";
}

void write_report_csv(std::ostream& out, const CostReport& report) {
  out << "model,scale,hr_h,hr_w,layer,kind,c_i,c_o,s,h,w,params,flops\n";
  const auto old = out.precision(17);
  auto line = [&](const std::string& layer, const std::string& kind, const LayerCost* r, std::uint64_t params,
                  double flops) {
    out << report.model << ',' << report.scale << ',' << report.hr_h << ',' << report.hr_w << ',' << layer << ','
        << kind << ',';
    if (r) {
      out << r->c_i << ',' << r->c_o << ',' << r->s << ',' << r->h << ',' << r->w << ',';
    } else {
      out << ",,,,,";
    }
    out << params << ',' << flops << '\n';
  };
  for (const LayerCost& r : report.rows) line(r.layer, cost_kind_name(r.kind), &r, r.params, r.flops);
  line("total", "total", nullptr, report.total_params, report.total_flops);
  out.precision(old);
}

std::string bench_op_name(BenchOp op) {
  switch (op) {
    case BenchOp::Shift: return "shift";
    case BenchOp::Depthwise3x3: return "depthwise3x3";
    case BenchOp::Conv3x3: return "conv3x3";
  }
  return "?";
}

BenchOp parse_bench_op(const std::string& name) {
  if (name == "shift") return BenchOp::Shift;
  if (name == "depthwise3x3") return BenchOp::Depthwise3x3;
  if (name == "conv3x3") return BenchOp::Conv3x3;
  throw std::invalid_argument("unknown bench op '" + name + "' (shift, depthwise3x3, conv3x3)");
}

double bench_flops(BenchOp op, const Shape& shape) {
  const double pixels = static_cast<double>(shape.n) * static_cast<double>(shape.plane());
  const auto c = static_cast<double>(shape.c);
  switch (op) {
    case BenchOp::Shift: return 0.0;
    case BenchOp::Depthwise3x3: return pixels * c * 9.0;
    case BenchOp::Conv3x3: return pixels * c * c * 9.0;
  }
  return 0.0;
}

namespace {

Tensor<float> random_tensor(const Shape& shape, Rng& rng) {
  Tensor<float> t(shape);
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

/// Ghost channel c takes offset c mod 9 of the d = 1 grid.
Offset channel_offset(std::size_t c) {
  const int k = static_cast<int>(c % 9);
  return Offset{k / 3 - 1, k % 3 - 1};
}

void run_shift(const Tensor<float>& x, Tensor<float>& out) {
  const Shape& s = x.shape();
  parallel_for(s.c, [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = 0; n < s.n; ++n) {
      for (std::size_t c = begin; c < end; ++c) {
        const Offset o = channel_offset(c);
        kernels::shift_plane(x.plane(n, c), out.plane(n, c), s.h, s.w, o.di, o.dj);
      }
    }
  });
}

void check_close(const Tensor<float>& got, const Tensor<float>& want, const std::string& what) {
  double max_err = 0.0;
  double max_ref = 0.0;
  for (std::size_t i = 0; i < got.numel(); ++i) {
    max_err = std::max(max_err, std::abs(static_cast<double>(got.values()[i]) - want.values()[i]));
    max_ref = std::max(max_ref, std::abs(static_cast<double>(want.values()[i])));
  }
  if (max_err > 1e-5 * std::max(1.0, max_ref)) {
    throw BenchCorrectnessError(what + " disagrees with its reference (max abs error " + std::to_string(max_err) +
                                ")");
  }
}

void correctness_prepass(BenchOp op, const Shape& shape, Rng& rng) {
  const Shape small{1, std::min<std::size_t>(shape.c, 16), std::min<std::size_t>(shape.h, 24),
                    std::min<std::size_t>(shape.w, 24)};
  const Tensor<float> x = random_tensor(small, rng);
  switch (op) {
    case BenchOp::Shift: {
      Tensor<float> got(small);
      run_shift(x, got);
      Tensor<float> kernel(Shape{small.c, 1, 3, 3});
      for (std::size_t c = 0; c < small.c; ++c) {
        const Tensor<float> hot = one_hot_from_offsets<float>(channel_offset(c), 1);
        std::copy(hot.values().begin(), hot.values().end(), kernel.values().begin() + static_cast<std::ptrdiff_t>(c * 9));
      }
      Tensor<float> want(small);
      kernels::depthwise_naive(x, kernel, want);
      if (!std::equal(got.values().begin(), got.values().end(), want.values().begin())) {
        throw BenchCorrectnessError("shift disagrees with one-hot depthwise convolution");
      }
      break;
    }
    case BenchOp::Depthwise3x3: {
      const Tensor<float> kernel = random_tensor(Shape{small.c, 1, 3, 3}, rng);
      Tensor<float> got(small);
      Tensor<float> want(small);
      kernels::depthwise_blocked(x, kernel, got);
      kernels::depthwise_naive(x, kernel, want);
      check_close(got, want, "depthwise3x3");
      break;
    }
    case BenchOp::Conv3x3: {
      const Tensor<float> weight = random_tensor(Shape{small.c, small.c, 3, 3}, rng);
      Tensor<float> got(small);
      Tensor<float> want(small);
      kernels::conv2d_blocked<float>(x, weight, nullptr, got);
      kernels::conv2d_naive<float>(x, weight, nullptr, want);
      check_close(got, want, "conv3x3");
      break;
    }
  }
}

}  // namespace

BenchResult bench(BenchOp op, const Shape& shape, const BenchOptions& options) {
  validate_shape(shape);
  if (options.reps < 10) throw std::invalid_argument("bench needs at least 10 repetitions");
  Rng rng(options.seed);
  correctness_prepass(op, shape, rng);

  const Tensor<float> x = random_tensor(shape, rng);
  Tensor<float> out(shape);
  Tensor<float> params;
  if (op == BenchOp::Depthwise3x3) params = random_tensor(Shape{shape.c, 1, 3, 3}, rng);
  if (op == BenchOp::Conv3x3) params = random_tensor(Shape{shape.c, shape.c, 3, 3}, rng);
  auto run = [&] {
    switch (op) {
      case BenchOp::Shift: run_shift(x, out); break;
      case BenchOp::Depthwise3x3: kernels::depthwise_blocked(x, params, out); break;
      case BenchOp::Conv3x3: kernels::conv2d_blocked<float>(x, params, nullptr, out); break;
    }
  };

  for (std::size_t i = 0; i < options.warmup; ++i) run();
  std::vector<double> times;
  times.reserve(options.reps);
  using Clock = std::chrono::steady_clock;
  for (std::size_t i = 0; i < options.reps; ++i) {
    const auto start = Clock::now();
    run();
    times.push_back(std::chrono::duration<double, std::milli>(Clock::now() - start).count());
  }
  std::sort(times.begin(), times.end());
  const std::size_t mid = times.size() / 2;

  BenchResult r;
  r.op = op;
  r.shape = shape;
  r.reps = options.reps;
  r.warmup = options.warmup;
  r.threads = num_threads();
  r.median_ms = times.size() % 2 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
  r.min_ms = times.front();
  r.flops = bench_flops(op, shape);
  const double seconds = r.median_ms / 1e3;
  r.gflops_per_s = r.flops / 1e9 / seconds;
  r.gbytes_per_s = 2.0 * static_cast<double>(shape.numel() * sizeof(float)) / 1e9 / seconds;
  return r;
}

void print_bench(std::ostream& out, const std::vector<BenchResult>& results) {
  out << std::left << std::setw(14) << "op" << std::setw(18) << "shape" << std::right << std::setw(5) << "reps"
      << std::setw(8) << "threads" << std::setw(12) << "median_ms" << std::setw(12) << "min_ms" << std::setw(12)
      << "GFLOPs" << std::setw(10) << "GFLOP/s" << std::setw(8) << "GB/s" << "\n";
  for (const BenchResult& r : results) {
    out << std::left << std::setw(14) << bench_op_name(r.op) << std::setw(18) << r.shape.str() << std::right
        << std::setw(5) << r.reps << std::setw(8) << r.threads << std::setw(12) << fixed(r.median_ms, 3)
        << std::setw(12) << fixed(r.min_ms, 3) << std::setw(12) << fixed(r.flops / 1e9, 3) << std::setw(10)
        << fixed(r.gflops_per_s, 2) << std::setw(8) << fixed(r.gbytes_per_s, 2) << "\n";
  }
}

void write_bench_csv(std::ostream& out, const std::vector<BenchResult>& results) {
  out << "op,n,c,h,w,reps,warmup,threads,median_ms,min_ms,flops,gflops_per_s,gbytes_per_s\n";
  const auto old = out.precision(17);
  for (const BenchResult& r : results) {
    out << bench_op_name(r.op) << ',' << r.shape.n << ',' << r.shape.c << ',' << r.shape.h << ',' << r.shape.w << ','
        << r.reps << ',' << r.warmup << ',' << r.threads << ',' << r.median_ms << ',' << r.min_ms << ',' << r.flops
        << ',' << r.gflops_per_s << ',' << r.gbytes_per_s << '\n';
  }
  out.precision(old);
}

}  // namespace ghostsr
