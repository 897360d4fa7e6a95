#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ghostsr/image.hpp"
#include "ghostsr/network.hpp"
#include "ghostsr/trainer.hpp"
#include "support.hpp"

namespace ghostsr {
namespace {

using testing::random_tensor;

TEST(Adam, ZeroGradientLeavesParameters) {
  Adam<double> adam;
  std::vector<double> p{1.0, -2.0, 3.0};
  const std::vector<double> g(3, 0.0);
  for (int t = 0; t < 5; ++t) {
    adam.begin_step();
    adam.update("p", p, g, 0.1);
  }
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Adam<double> adam;
  std::vector<double> p{0.0, 0.0};
  const std::vector<double> g{0.2, -0.2};
  adam.begin_step();
  adam.update("p", p, g, 0.1);
  EXPECT_NEAR(p[0], -0.1, 1e-6);
  EXPECT_NEAR(p[1], 0.1, 1e-6);
}

TEST(Adam, MatchesHandWrittenRecurrence) {
  Rng rng(3);
  const AdamSpec spec{1e-3, 0.8, 0.95, 1e-6};
  Adam<double> adam(spec);
  std::vector<double> p(6), ref(6), m(6, 0.0), v(6, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = ref[i] = rng.uniform(-1, 1);
  double b1t = 1.0;
  double b2t = 1.0;
  for (int t = 1; t <= 4; ++t) {
    std::vector<double> g(6);
    for (double& x : g) x = rng.uniform(-1, 1);
    const double lr = 0.01 * t;
    adam.begin_step();
    adam.update("w", p, g, lr);
    b1t *= spec.beta1;
    b2t *= spec.beta2;
    for (std::size_t i = 0; i < 6; ++i) {
      m[i] = spec.beta1 * m[i] + (1 - spec.beta1) * g[i];
      v[i] = spec.beta2 * v[i] + (1 - spec.beta2) * g[i] * g[i];
      ref[i] -= lr * (m[i] / (1 - b1t)) / (std::sqrt(v[i] / (1 - b2t)) + spec.eps);
    }
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(p[i], ref[i], 1e-12) << "t " << t;
  }
}

TEST(Adam, KeysHaveIndependentMoments) {
  Adam<double> adam;
  std::vector<double> a{0.0}, b{0.0};
  adam.begin_step();
  adam.update("a", a, std::vector<double>{1.0}, 0.1);
  adam.begin_step();
  adam.update("a", a, std::vector<double>{1.0}, 0.1);
  adam.update("b", b, std::vector<double>{-1.0}, 0.1);
  // b starts its own bias correction on its first update.
  EXPECT_NEAR(b[0], 0.1, 1e-6);
}

TEST(Adam, RejectsMisuse) {
  Adam<float> adam;
  std::vector<float> p(2), g(3);
  EXPECT_THROW(adam.update("p", p, std::vector<float>(2), 0.1), std::logic_error);
  adam.begin_step();
  EXPECT_THROW(adam.update("p", p, g, 0.1), std::invalid_argument);
  adam.update("p", p, std::vector<float>(2), 0.1);
  std::vector<float> bigger(4);
  EXPECT_THROW(adam.update("p", bigger, std::vector<float>(4), 0.1), std::invalid_argument);
}

TEST(CosineLr, Endpoints) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 100, 2e-3), 2e-3);
  EXPECT_NEAR(cosine_lr(50, 100, 2e-3), 1e-3, 1e-18);
  EXPECT_NEAR(cosine_lr(100, 100, 2e-3), 0.0, 1e-18);
  EXPECT_NEAR(cosine_lr(250, 100, 2e-3), 0.0, 1e-18);
  EXPECT_DOUBLE_EQ(cosine_lr(7, 0, 2e-3), 2e-3);
  double prev = cosine_lr(0, 100, 1.0);
  for (std::size_t t = 1; t <= 100; ++t) {
    const double cur = cosine_lr(t, 100, 1.0);
    EXPECT_LE(cur, prev);
    prev = cur;
  }
}

struct ToyData {
  std::vector<Image> lr;
  std::vector<Image> hr;
  Batch batch;
};

ToyData toy_data(std::size_t count, std::size_t lr_size, std::uint64_t seed) {
  Rng rng(seed);
  ToyData d;
  for (std::size_t i = 0; i < count; ++i) {
    d.hr.push_back(synthetic_image(2 * lr_size, 2 * lr_size, rng));
    d.lr.push_back(bicubic_resize(d.hr.back(), lr_size, lr_size));
  }
  d.batch = Batch{stack(d.lr), stack(d.hr)};
  return d;
}

Network toy_ghost(std::uint64_t seed) {
  Rng rng(seed);
  return convert_to_ghost(Network::random_init(preset("toy-edsr"), rng), 0.5);
}

TEST(Train, ToyOverfitHalvesTheLoss) {
  const ToyData data = toy_data(4, 12, 1);
  TrainOptions opt;
  opt.steps = 60;
  opt.adam.lr0 = 2e-3;
  opt.seed = 5;
  const TrainResult r = train(toy_ghost(2), [&](std::size_t, Rng&) { return data.batch; }, opt);
  ASSERT_EQ(r.log.size(), 60u);
  EXPECT_LT(r.log.back().loss, r.log.front().loss / 2);
}

TEST(Train, ReplayIsBitwiseIdentical) {
  const ToyData data = toy_data(2, 8, 4);
  TrainOptions opt;
  opt.steps = 5;
  opt.adam.lr0 = 1e-3;
  opt.seed = 11;
  opt.timing = false;
  auto provider = [&](std::size_t, Rng& rng) {
    std::vector<PatchPair> pairs;
    std::ostringstream warn;
    pairs = sample_patches(data.hr, 2, 8, 2, rng, true, warn);
    std::vector<Image> lr, hr;
    for (const PatchPair& p : pairs) {
      lr.push_back(p.lr);
      hr.push_back(p.hr);
    }
    return Batch{stack(lr), stack(hr)};
  };
  const TrainResult a = train(toy_ghost(3), provider, opt);
  const TrainResult b = train(toy_ghost(3), provider, opt);
  std::ostringstream la, lb;
  write_log_csv(la, a.log);
  write_log_csv(lb, b.log);
  EXPECT_EQ(la.str(), lb.str());
  EXPECT_EQ(a.network.to_checkpoint().serialize(), b.network.to_checkpoint().serialize());
  for (const LogRow& row : a.log) EXPECT_EQ(row.wall_ms, 0.0);
}

TEST(Train, ProxiesMoveAfterOneStep) {
  const ToyData data = toy_data(2, 8, 6);
  TrainOptions opt;
  opt.steps = 1;
  opt.adam.lr0 = 1e-2;
  const Network before = toy_ghost(4);
  const TrainResult r = train(before, [&](std::size_t, Rng&) { return data.batch; }, opt);
  const Tensor<float>& p0 = *before.params("body.0.conv1").proxy;
  const Tensor<float>& p1 = *r.network.params("body.0.conv1").proxy;
  bool moved = false;
  for (std::size_t i = 0; i < p0.numel(); ++i) moved = moved || p0.data()[i] != p1.data()[i];
  EXPECT_TRUE(moved);
}

TEST(Train, NonFiniteLossReportsStep) {
  ToyData data = toy_data(1, 8, 7);
  data.batch.lr.data()[3] = std::nanf("");
  TrainOptions opt;
  opt.steps = 3;
  try {
    train(toy_ghost(5), [&](std::size_t, Rng&) { return data.batch; }, opt);
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_NE(std::string(e.what()).find("at step 0"), std::string::npos) << e.what();
  }
}

TEST(Train, RejectsMismatchedTarget) {
  ToyData data = toy_data(1, 8, 8);
  data.batch.hr = Tensor<float>(Shape{1, 3, 8, 8});
  TrainOptions opt;
  opt.steps = 1;
  EXPECT_THROW(train(toy_ghost(6), [&](std::size_t, Rng&) { return data.batch; }, opt), std::invalid_argument);
}

TEST(Train, LogCsvFormat) {
  std::ostringstream out;
  const std::vector<LogRow> log{{0, 0.5, 0.25, 0.0}, {1, 0.125, 1.0 / 3.0, 2.0}};
  write_log_csv(out, log);
  EXPECT_EQ(out.str(), "step,lr,loss,wall_ms\n0,0.5,0.25,0\n1,0.125,0.33333333333333331,2\n");
}

TEST(Freeze, ZeroProxyPicksFirstGridCell) {
  const Network frozen = freeze(toy_ghost(7));
  EXPECT_TRUE(frozen.frozen());
  const LayerParams& p = frozen.params("body.1.conv2");
  ASSERT_TRUE(p.offsets.has_value());
  EXPECT_FALSE(p.proxy.has_value());
  for (const Offset& o : *p.offsets) EXPECT_EQ(o, (Offset{-1, -1}));
}

Network with_random_proxies(std::uint64_t seed) {
  Network net = toy_ghost(seed);
  Rng rng(seed + 100);
  for (const LayerDef& l : net.config().layers) {
    if (!l.converted()) continue;
    LayerParams& p = net.params(l.name);
    p.proxy = random_tensor<float>(p.proxy->shape(), rng, -2.0, 2.0);
  }
  return net;
}

TEST(Freeze, Idempotent) {
  const Network once = freeze(with_random_proxies(8));
  const Network twice = freeze(once);
  EXPECT_EQ(once.to_checkpoint().serialize(), twice.to_checkpoint().serialize());
}

TEST(Freeze, MatchesHardTrainingPathBitwise) {
  const Network net = with_random_proxies(9);
  const Network frozen = freeze(net);
  Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor<float> x = random_tensor<float>(Shape{1, 3, 9, 11}, rng, 0.0, 1.0);
    Tape<float> train_tape(false);
    ForwardOptions hard;
    hard.mode = ShiftMode::Train;
    hard.noise = NoiseMode::FrozenZero;
    const Tensor<float> a = train_tape.value(net.forward(train_tape, train_tape.constant(x), hard).output);
    Tape<float> infer_tape(false);
    const Tensor<float> b = infer_tape.value(frozen.forward(infer_tape, infer_tape.constant(x), {}).output);
    ASSERT_EQ(a.shape(), b.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) ASSERT_EQ(a.data()[i], b.data()[i]) << "trial " << trial;
  }
}

}  // namespace
}  // namespace ghostsr
