// Acceptance runner. Prints one PASS/FAIL line per criterion; `--criterion N`
// runs a single one. Exit status is 0 only when every selected criterion passes.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ghostsr/accounting.hpp"
#include "ghostsr/clustering.hpp"
#include "ghostsr/image.hpp"
#include "ghostsr/kernels.hpp"
#include "ghostsr/metrics.hpp"
#include "ghostsr/network.hpp"
#include "ghostsr/parallel.hpp"
#include "ghostsr/shift.hpp"
#include "ghostsr/trainer.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace ghostsr;
using testing::check_gradients;
using testing::random_tensor;
using testing::weighted_sum;

namespace {

struct Outcome {
  bool pass = true;
  std::string summary;
  std::vector<std::string> info;

  void require(bool ok, const std::string& line) {
    pass = pass && ok;
    info.push_back(std::string(ok ? "ok    " : "FAIL  ") + line);
  }
  void note(const std::string& line) { info.push_back("info  " + line); }
};

std::string num(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

bool within(double got, double want, double rel) { return std::abs(got - want) <= rel * std::abs(want); }

// ---------------------------------------------------------------------------
// 1. Reference param/FLOP totals of the four converted architectures, +-2%.

Outcome criterion1() {
  Outcome o;
  o.summary = "counting regression on the full-size models, params and FLOPs within 2%, runtime < 1 s";
  struct Row {
    const char* preset;
    double params_dense, params_ghost, gflops_dense, gflops_ghost;
  };
  const Row rows[] = {{"edsr_x2", 40.73, 21.85, 9389, 5038},
                      {"rdn_x2", 19.27, 9.83, 4442, 2265},
                      {"carn_x3", 1.59, 1.19, 119, 77},
                      {"imdn_x2", 0.69, 0.40, 160, 91}};
  const auto start = std::chrono::steady_clock::now();
  for (const Row& r : rows) {
    const CostReport dense = count(preset(r.preset));
    const CostReport ghost = count(with_ghost_ratio(preset(r.preset), 0.5));
    const double pd = static_cast<double>(dense.total_params) / 1e6;
    const double pg = static_cast<double>(ghost.total_params) / 1e6;
    const double fd = dense.total_flops / 1e9;
    const double fg = ghost.total_flops / 1e9;
    o.require(within(pd, r.params_dense, 0.02) && within(fd, r.gflops_dense, 0.02),
              std::string(r.preset) + " dense " + num(pd) + "M / " + num(fd, 2) + "G (ref " + num(r.params_dense, 2) +
                  "M / " + num(r.gflops_dense, 0) + "G)");
    o.require(within(pg, r.params_ghost, 0.02) && within(fg, r.gflops_ghost, 0.02),
              std::string(r.preset) + " ghost " + num(pg) + "M / " + num(fg, 2) + "G (ref " + num(r.params_ghost, 2) +
                  "M / " + num(r.gflops_ghost, 0) + "G)");
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.require(seconds < 1.0, "runtime " + num(seconds, 3) + " s");
  return o;
}

// ---------------------------------------------------------------------------
// 2. CARN x3 ratio ladder.

/// Cost if the 1x1 cascade convs were converted too (they are conv_only).
std::pair<double, double> carn_with_pointwise(double ratio) {
  const CostReport dense = count(preset("carn_x3"));
  const CostReport ghost = count(with_ghost_ratio(preset("carn_x3"), ratio));
  double params = static_cast<double>(ghost.total_params);
  double flops = ghost.total_flops;
  for (const LayerCost& r : dense.rows) {
    if (r.kind == CostKind::Conv && r.s == 1) {
      params -= ratio * static_cast<double>(r.params);
      flops -= ratio * r.flops;
    }
  }
  return {params / 1e6, flops / 1e9};
}

Outcome criterion2() {
  Outcome o;
  o.summary = "CARN x3 ratio ladder 0.25/0.5/0.75, params and FLOPs within 2%";
  struct Rung {
    double ratio, params, gflops;
  };
  for (const Rung& r : {Rung{0.25, 1.33, 96}, Rung{0.5, 1.19, 77}, Rung{0.75, 1.01, 60}}) {
    const CostReport c = count(with_ghost_ratio(preset("carn_x3"), r.ratio));
    const double p = static_cast<double>(c.total_params) / 1e6;
    const double f = c.total_flops / 1e9;
    o.require(within(p, r.params, 0.02) && within(f, r.gflops, 0.02),
              "ratio " + num(r.ratio, 2) + ": " + num(p) + "M / " + num(f, 2) + "G (ref " + num(r.params, 2) + "M / " +
                  num(r.gflops, 0) + "G)");
    const auto [pp, pf] = carn_with_pointwise(r.ratio);
    o.note("ratio " + num(r.ratio, 2) + " with 1x1 convs also converted: " + num(pp) + "M / " + num(pf, 2) + "G");
  }
  return o;
}

// ---------------------------------------------------------------------------
// 3. shift2d equals one-hot depthwise convolution, bitwise.

Outcome criterion3() {
  Outcome o;
  o.summary = "shift equals one-hot depthwise conv bitwise, 100 tensors x 9 offsets at d=1";
  Rng rng(2024);
  std::size_t mismatches = 0;
  std::size_t compared = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Shape s{1 + rng.index(2), 1 + rng.index(4), 1 + rng.index(12), 1 + rng.index(12)};
    const Tensor<float> x = random_tensor<float>(s, rng, -10, 10);
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        const Offset off{di, dj};
        const Tensor<float> shifted = shift2d(x, off, 1);
        const Tensor<float> hot = one_hot_from_offsets<float>(off, 1);
        Tensor<float> kernel(Shape{s.c, 1, 3, 3});
        for (std::size_t c = 0; c < s.c; ++c) std::copy_n(hot.data(), 9, kernel.data() + c * 9);
        Tensor<float> naive(s);
        Tensor<float> blocked(s);
        kernels::depthwise_naive(x, kernel, naive);
        kernels::depthwise_blocked(x, kernel, blocked);
        for (std::size_t i = 0; i < x.numel(); ++i) {
          mismatches += shifted.data()[i] != naive.data()[i];
          mismatches += shifted.data()[i] != blocked.data()[i];
        }
        compared += 2 * x.numel();
      }
    }
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " mismatching elements of " + std::to_string(compared));
  return o;
}

// ---------------------------------------------------------------------------
// 4. Central finite differences in double, relative error < 1e-6.

Tensor<double> away_from_zero(const Shape& s, Rng& rng) {
  Tensor<double> t(s);
  for (double& v : t.values()) v = (rng.coin() ? 1.0 : -1.0) * rng.uniform(0.1, 1.0);
  return t;
}

Outcome criterion4() {
  Outcome o;
  o.summary = "finite-difference gradient suite in double, max relative error < 1e-6, 5 instances per op";
  using Build = testing::LossBuilder;
  struct Case {
    std::string name;
    std::function<std::pair<Build, std::vector<Tensor<double>>>(Rng&)> make;
  };
  const std::vector<Case> cases = {
      {"conv2d",
       [](Rng& rng) {
         const ConvSpec spec{2, 3, 3, true};
         auto w = random_tensor<double>(Shape{2, 3, 4, 5}, rng);
         Build b = [=](Tape<double>& t, const std::vector<Var>& p) {
           return weighted_sum(t, conv2d(t, p[0], p[1], p[2], spec), w);
         };
         return std::pair{b, std::vector{random_tensor<double>(Shape{2, 2, 4, 5}, rng),
                                         random_tensor<double>(Shape{3, 2, 3, 3}, rng),
                                         random_tensor<double>(Shape{1, 3, 1, 1}, rng)}};
       }},
      {"conv2d 1x1",
       [](Rng& rng) {
         const ConvSpec spec{3, 2, 1, false};
         auto w = random_tensor<double>(Shape{1, 2, 3, 3}, rng);
         Build b = [=](Tape<double>& t, const std::vector<Var>& p) {
           return weighted_sum(t, conv2d(t, p[0], p[1], std::nullopt, spec), w);
         };
         return std::pair{b, std::vector{random_tensor<double>(Shape{1, 3, 3, 3}, rng),
                                         random_tensor<double>(Shape{2, 3, 1, 1}, rng)}};
       }},
      {"depthwise_conv2d",
       [](Rng& rng) {
         auto w = random_tensor<double>(Shape{1, 3, 5, 4}, rng);
         Build b = [=](Tape<double>& t, const std::vector<Var>& p) {
           return weighted_sum(t, depthwise_conv2d(t, p[0], p[1]), w);
         };
         return std::pair{b, std::vector{random_tensor<double>(Shape{1, 3, 5, 4}, rng),
                                         random_tensor<double>(Shape{3, 1, 3, 3}, rng)}};
       }},
      {"ghost layer soft path",
       [](Rng& rng) {
         GhostLayerSpec spec;
         spec.conv = ConvSpec{3, 4, 3, true};
         spec.ratio = 0.5;
         spec.assignment = {1, 0};
         spec.permutation = {2, 0, 3, 1};
         spec.tau = 0.8;
         auto noise = gumbel_noise<double>(Shape{2, 1, 3, 3}, rng);
         auto w = random_tensor<double>(Shape{1, 4, 4, 4}, rng);
         Build b = [=](Tape<double>& t, const std::vector<Var>& p) {
           GhostShiftState<double> st;
           st.proxy = p[3];
           st.noise = noise;
           return weighted_sum(t, ghost_layer_forward<double>(t, p[0], spec, p[1], p[2], ShiftMode::Soft, st), w);
         };
         return std::pair{b, std::vector{random_tensor<double>(Shape{1, 3, 4, 4}, rng),
                                         random_tensor<double>(Shape{2, 3, 3, 3}, rng),
                                         random_tensor<double>(Shape{1, 2, 1, 1}, rng),
                                         random_tensor<double>(Shape{2, 1, 3, 3}, rng)}};
       }},
      {"pixel_shuffle",
       [](Rng& rng) {
         const std::size_t r = 2 + rng.index(2);
         auto w = random_tensor<double>(Shape{1, 2, 2 * r, 3 * r}, rng);
         Build b = [=](Tape<double>& t, const std::vector<Var>& p) {
           return weighted_sum(t, pixel_shuffle(t, p[0], r), w);
         };
         return std::pair{b, std::vector{random_tensor<double>(Shape{1, 2 * r * r, 2, 3}, rng)}};
       }},
      {"relu / leaky_relu / add / scale",
       [](Rng& rng) {
         auto w = random_tensor<double>(Shape{1, 2, 3, 3}, rng);
         Build b = [=](Tape<double>& t, const std::vector<Var>& p) {
           Var a = relu(t, p[0]);
           Var c = leaky_relu(t, p[1], 0.05);
           return weighted_sum(t, scalar_mul(t, add(t, a, c), 0.7), w);
         };
         return std::pair{b, std::vector{away_from_zero(Shape{1, 2, 3, 3}, rng),
                                         away_from_zero(Shape{1, 2, 3, 3}, rng)}};
       }},
      {"concat / slice",
       [](Rng& rng) {
         auto w = random_tensor<double>(Shape{1, 3, 2, 3}, rng);
         Build b = [=](Tape<double>& t, const std::vector<Var>& p) {
           Var cat = concat_channels(t, p[0], p[1]);
           return weighted_sum(t, slice_channels(t, cat, 1, 3), w);
         };
         return std::pair{b, std::vector{random_tensor<double>(Shape{1, 2, 2, 3}, rng),
                                         random_tensor<double>(Shape{1, 2, 2, 3}, rng)}};
       }},
      {"l1_loss",
       [](Rng& rng) {
         auto target = random_tensor<double>(Shape{2, 3, 3, 3}, rng);
         Tensor<double> pred = target;
         for (double& v : pred.values()) v += (rng.coin() ? 1.0 : -1.0) * rng.uniform(0.1, 0.5);
         Build b = [=](Tape<double>& t, const std::vector<Var>& p) { return l1_loss(t, p[0], t.constant(target)); };
         return std::pair{b, std::vector{pred}};
       }},
      {"mse_loss",
       [](Rng& rng) {
         auto target = random_tensor<double>(Shape{2, 3, 3, 3}, rng);
         Build b = [=](Tape<double>& t, const std::vector<Var>& p) { return mse_loss(t, p[0], t.constant(target)); };
         return std::pair{b, std::vector{random_tensor<double>(Shape{2, 3, 3, 3}, rng)}};
       }},
  };
  Rng rng(99);
  for (const Case& c : cases) {
    double worst = 0.0;
    std::size_t checked = 0;
    for (int instance = 0; instance < 5; ++instance) {
      auto [build, params] = c.make(rng);
      const testing::GradCheck r = check_gradients(build, params);
      worst = std::max(worst, r.max_rel_error);
      checked += r.checked;
    }
    std::ostringstream line;
    line << c.name << ": max rel error " << std::scientific << std::setprecision(2) << worst << " over " << checked
         << " partials";
    o.require(worst < 1e-6, line.str());
  }
  return o;
}

// ---------------------------------------------------------------------------
// 5. Gumbel-softmax properties.

Outcome criterion5() {
  Outcome o;
  o.summary = "Gumbel-softmax: sums to 1 (1e-6), tau=0.01 puts >= 0.99 at argmax, uniform selection 1/9 +- 0.02";
  Rng rng(5);
  double worst_sum = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto p = random_tensor<float>(Shape{4, 1, 3, 3}, rng, -20, 20);
    const auto n = gumbel_noise<float>(p.shape(), rng);
    const auto s = soft_shift_weight(p, n, static_cast<float>(rng.uniform(0.01, 5.0)));
    for (std::size_t k = 0; k < 4; ++k) {
      double total = 0.0;
      for (std::size_t i = 0; i < 9; ++i) total += s.plane(k, 0)[i];
      worst_sum = std::max(worst_sum, std::abs(total - 1.0));
    }
  }
  o.require(worst_sum <= 1e-6, "max |sum - 1| = " + num(worst_sum, 9) + " over 4000 grids");

  double min_mass = 1.0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto logits = random_tensor<double>(Shape{1, 1, 3, 3}, rng, -1, 1);
    const auto best = static_cast<std::size_t>(rng.index(9));
    logits.data()[best] = *std::max_element(logits.data(), logits.data() + 9) + 0.1;
    const auto s = soft_shift_weight(logits, Tensor<double>(logits.shape()), 0.01);
    min_mass = std::min(min_mass, s.data()[best]);
  }
  o.require(min_mass >= 0.99, "tau 0.01 with a 0.1 logit margin: min argmax mass " + num(min_mass, 6));

  std::vector<int> counts(9, 0);
  const Tensor<float> zero(Shape{1, 1, 3, 3});
  for (int sample = 0; sample < 10000; ++sample) {
    const auto noise = gumbel_noise<float>(zero.shape(), rng);
    Tensor<float> logits = zero;
    for (std::size_t i = 0; i < 9; ++i) logits.data()[i] += noise.data()[i];
    const Offset off = harden_offsets<float>(logits.values(), 1);
    ++counts[static_cast<std::size_t>((off.di + 1) * 3 + off.dj + 1)];
  }
  double worst_freq = 0.0;
  std::string freqs;
  for (int c : counts) {
    worst_freq = std::max(worst_freq, std::abs(c / 10000.0 - 1.0 / 9.0));
    freqs += " " + num(c / 10000.0, 3);
  }
  o.require(worst_freq <= 0.02, "W'=0 selection frequencies" + freqs);
  return o;
}

// ---------------------------------------------------------------------------
// 6. Clustering.

Outcome criterion6() {
  Outcome o;
  o.summary = "k-means monotone on 100 instances, planted split recovered, |I| = (1-ratio) c_o, permutation consistent";
  Rng rng(6);
  std::size_t increases = 0;
  for (int instance = 0; instance < 100; ++instance) {
    const std::size_t n = 5 + rng.index(60);
    const std::size_t k = 1 + rng.index(n);
    Matrix p(n, 1 + rng.index(27));
    for (double& v : p.data) v = rng.uniform(-1, 1);
    const KMeansResult r = kmeans(p, k, rng, 50);
    for (std::size_t i = 1; i < r.history.size(); ++i) increases += r.history[i] > r.history[i - 1];
  }
  o.require(increases == 0, std::to_string(increases) + " objective increases over 100 random instances");

  std::size_t wrong = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix p(20, 9);
    for (std::size_t i = 0; i < 20; ++i) {
      for (double& v : p.row(i)) v = (i < 10 ? -5.0 : 5.0) + rng.uniform(-0.5, 0.5);
    }
    const KMeansResult r = kmeans(p, 2, rng);
    for (std::size_t i = 0; i < 20; ++i) {
      wrong += (r.labels[i] == r.labels[0]) != (i < 10);
    }
  }
  o.require(wrong == 0, "planted 2-cluster instances: " + std::to_string(wrong) + " misassigned points in 20 runs");

  std::size_t bad_counts = 0;
  for (double ratio : {0.0, 0.25, 0.5, 0.75}) {
    for (std::size_t c_o : {4u, 8u, 16u, 64u}) {
      const auto w = random_tensor<float>(Shape{c_o, 3, 3, 3}, rng);
      const LayerPlan plan = cluster_layer("l", w, ratio, rng);
      bad_counts += plan.split.intrinsic.size() != static_cast<std::size_t>((1.0 - ratio) * static_cast<double>(c_o));
    }
  }
  o.require(bad_counts == 0, std::to_string(bad_counts) + " layers with the wrong intrinsic count (16 cases)");

  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto w1 = random_tensor<double>(Shape{8, 3, 3, 3}, rng);
    const auto b1 = random_tensor<double>(Shape{1, 8, 1, 1}, rng);
    const auto w2 = random_tensor<double>(Shape{4, 8, 3, 3}, rng);
    const auto x = random_tensor<double>(Shape{1, 3, 6, 6}, rng);
    const LayerPlan plan = cluster_layer("l", w1.cast<float>(), 0.5, rng);
    Tensor<double> pw1(w1.shape()), pb1(b1.shape()), pw2(w2.shape());
    for (std::size_t p = 0; p < 8; ++p) {
      const auto src = static_cast<std::size_t>(plan.split.permutation[p]);
      std::copy_n(w1.data() + src * 27, 27, pw1.data() + p * 27);
      pb1.data()[p] = b1.data()[src];
      for (std::size_t out = 0; out < 4; ++out) std::copy_n(w2.plane(out, src), 9, pw2.plane(out, p));
    }
    auto run = [&](const Tensor<double>& a, const Tensor<double>& ab, const Tensor<double>& b) {
      Tape<double> t(false);
      Var h = relu(t, conv2d(t, t.constant(x), t.constant(a), t.constant(ab), ConvSpec{3, 8, 3, true}));
      return t.value(conv2d(t, h, t.constant(b), std::nullopt, ConvSpec{8, 4, 3, false}));
    };
    const Tensor<double> ref = run(w1, b1, w2);
    const Tensor<double> got = run(pw1, pb1, pw2);
    for (std::size_t i = 0; i < ref.numel(); ++i) {
      worst = std::max(worst, std::abs(ref.data()[i] - got.data()[i]) / (std::abs(ref.data()[i]) + 1e-12));
    }
  }
  o.require(worst <= 1e-5, "permuted two-layer function: max relative change " + num(worst, 12));
  return o;
}

// ---------------------------------------------------------------------------
// 7. Toy overfit.

constexpr std::size_t kToySteps = 500;
constexpr std::size_t kToyPairs = 8;
constexpr std::size_t kToyLrSize = 48;
constexpr double kToyLr = 3e-3;

Outcome criterion7() {
  Outcome o;
  o.summary = "toy EDSR ghost (ratio 0.5, x2), 8 fixed 48x48 LR pairs, 500 steps: < 10 min, Y-PSNR >= bicubic + 3 dB, "
              "freeze bitwise";
  Rng rng(7);
  std::vector<Image> hr;
  std::vector<Image> lr;
  for (std::size_t i = 0; i < kToyPairs; ++i) {
    hr.push_back(synthetic_image(2 * kToyLrSize, 2 * kToyLrSize, rng));
    lr.push_back(bicubic_resize(hr.back(), kToyLrSize, kToyLrSize));
  }
  const Batch batch{stack(lr), stack(hr)};
  const Network start = convert_to_ghost(Network::random_init(preset("toy-edsr"), rng), 0.5);

  TrainOptions opt;
  opt.steps = kToySteps;
  opt.adam.lr0 = kToyLr;
  opt.seed = 1;
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult result = train(start, [&](std::size_t, Rng&) { return batch; }, opt);
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  o.require(minutes < 10.0, "training time " + num(minutes, 2) + " min");
  o.note("loss " + num(result.log.front().loss, 5) + " -> " + num(result.log.back().loss, 5));

  const Network frozen = freeze(result.network);
  double sr_psnr = 0.0;
  double bic_psnr = 0.0;
  for (std::size_t i = 0; i < kToyPairs; ++i) {
    const Image sr = Image::from_tensor(forward_sr(frozen, lr[i].to_tensor()));
    Image bic = bicubic_resize(lr[i], hr[i].h, hr[i].w);
    for (float& v : bic.data) v = std::clamp(v, 0.0f, 1.0f);
    const Image hy = rgb_to_y(hr[i]);
    sr_psnr += psnr(rgb_to_y(sr), hy, 2) / kToyPairs;
    bic_psnr += psnr(rgb_to_y(bic), hy, 2) / kToyPairs;
  }
  o.require(sr_psnr >= bic_psnr + 3.0, "train-set Y-PSNR " + num(sr_psnr, 3) + " dB vs bicubic " + num(bic_psnr, 3) +
                                           " dB (margin " + num(sr_psnr - bic_psnr, 3) + ")");

  std::size_t differing = 0;
  for (std::size_t i = 0; i < kToyPairs; ++i) {
    Tape<float> a(false);
    ForwardOptions hard;
    hard.mode = ShiftMode::Train;
    hard.noise = NoiseMode::FrozenZero;
    const Tensor<float> ya = a.value(result.network.forward(a, a.constant(lr[i].to_tensor()), hard).output);
    Tape<float> b(false);
    const Tensor<float> yb = b.value(frozen.forward(b, b.constant(lr[i].to_tensor()), {}).output);
    for (std::size_t k = 0; k < ya.numel(); ++k) differing += ya.data()[k] != yb.data()[k];
  }
  o.require(differing == 0, "frozen vs hard training path: " + std::to_string(differing) + " differing outputs");
  return o;
}

// ---------------------------------------------------------------------------
// 8. Shift is not slower than depthwise 3x3.

Outcome criterion8() {
  Outcome o;
  o.summary = "benchmark direction: shift median <= depthwise3x3 median at 1x64x360x640, single thread";
  const int saved = num_threads();
  set_num_threads(1);
  const Shape shape{1, 64, 360, 640};
  const BenchResult shift = bench(BenchOp::Shift, shape, {10, 3, 1});
  const BenchResult dw = bench(BenchOp::Depthwise3x3, shape, {10, 3, 1});
  set_num_threads(saved);
  const bool ok = shift.median_ms <= dw.median_ms;
  const std::string line =
      "shift " + num(shift.median_ms, 2) + " ms vs depthwise3x3 " + num(dw.median_ms, 2) + " ms (median of 10)";
#if defined(__x86_64__)
  o.require(ok, line);
#else
  if (!ok) o.note("WARNING (non-x86-64 host, not a hard failure): " + line);
  o.require(true, line);
#endif
  return o;
}

// ---------------------------------------------------------------------------
// 9. Seeded CLI runs are bitwise reproducible.

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome criterion9() {
  Outcome o;
  o.summary = "seeded single-thread CLI runs reproduce logs, plans and checkpoints bitwise";
  const fs::path root = fs::temp_directory_path() / "ghostsr_acceptance_c9";
  fs::remove_all(root);
  const std::vector<std::string> steps = {
      "init --config toy-edsr --seed 3 --out dense.gsr",
      "cluster --checkpoint dense.gsr --ratio 0.5 --seed 4 --out plan.txt",
      "convert --checkpoint dense.gsr --plan plan.txt --ratio 0.5 --out ghost.gsr",
      "train --checkpoint ghost.gsr --steps 20 --batch 4 --patch 16 --lr 1e-3 --seed 5 --no-timing --out trained.gsr "
      "--log train.csv",
      "train --preset toy-carn --steps 10 --batch 2 --patch 12 --seed 6 --no-timing --out carn.gsr --log carn.csv",
      "freeze --checkpoint trained.gsr --out frozen.gsr",
  };
  for (const char* run : {"a", "b"}) {
    const fs::path dir = root / run;
    fs::create_directories(dir);
    for (const std::string& step : steps) {
      const std::string cmd =
          "cd '" + dir.string() + "' && GHOSTSR_THREADS=1 '" GHOSTSR_CLI "' " + step + " > /dev/null 2>> err.txt";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        o.require(false, std::string("run ") + run + " failed at: " + step);
        return o;
      }
    }
  }
  for (const char* file :
       {"dense.gsr", "plan.txt", "ghost.gsr", "trained.gsr", "train.csv", "carn.gsr", "carn.csv", "frozen.gsr"}) {
    const std::string a = slurp(root / "a" / file);
    const std::string b = slurp(root / "b" / file);
    o.require(!a.empty() && a == b, std::string(file) + " (" + std::to_string(a.size()) + " bytes)");
  }
  fs::remove_all(root);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                                          criterion6, criterion7, criterion8, criterion9};
  std::vector<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--criterion" && i + 1 < argc) {
      const std::size_t n = std::stoul(argv[++i]);
      if (n < 1 || n > criteria.size()) {
        std::cerr << "criterion must be 1.." << criteria.size() << "\n";
        return 2;
      }
      selected.push_back(n);
    } else {
      std::cerr << "usage: acceptance [--criterion N]...\n";
      return 2;
    }
  }
  if (selected.empty()) {
    for (std::size_t n = 1; n <= criteria.size(); ++n) selected.push_back(n);
  }

  bool all = true;
  for (std::size_t n : selected) {
    Outcome o;
    try {
      o = criteria[n - 1]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.info.push_back(std::string("FAIL  exception: ") + e.what());
    }
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.summary << "\n";
    for (const std::string& line : o.info) std::cout << "    " << line << "\n";
    std::cout.flush();
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
