#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ghostsr/checkpoint.hpp"
#include "ghostsr/config.hpp"
#include "ghostsr/errors.hpp"
#include "ghostsr/network.hpp"
#include "support.hpp"

namespace ghostsr {
namespace {

using testing::random_tensor;

std::size_t dense_params(const ModelConfig& c) {
  std::size_t total = 0;
  for (const auto& l : c.layers) {
    if (l.is_conv()) total += l.conv.c_o * l.conv.c_i * l.conv.s * l.conv.s + (l.conv.bias ? l.conv.c_o : 0);
  }
  return total;
}

ModelConfig tiny_config() {
  return ModelConfig::parse(R"(model tiny
scale 2
head | conv input | 3 8 3 | conv_only
body | conv head | 8 8 3 | ghost
act | relu body | - | -
sum | add act head | - | -
up | conv sum | 8 12 3 | conv_only
shuffle | pixel_shuffle up | 2 | -
)");
}

void expect_same(const Tensor<float>& a, const Tensor<float>& b) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) ASSERT_EQ(a.data()[i], b.data()[i]) << "at " << i;
}

TEST(ModelConfig, EdsrX2MatchesTableLayout) {
  const ModelConfig c = preset("edsr_x2");
  const LayerDef& head = c.layer("head");
  EXPECT_EQ(head.conv, (ConvSpec{3, 256, 3, true}));
  EXPECT_EQ(head.annotation, Annotation::ConvOnly);
  std::size_t blocks = 0;
  for (const auto& l : c.layers) {
    if (l.name.ends_with(".conv1")) {
      ++blocks;
      EXPECT_EQ(l.conv, (ConvSpec{256, 256, 3, true}));
      EXPECT_EQ(l.annotation, Annotation::Ghost);
    }
  }
  EXPECT_EQ(blocks, 32u);
  EXPECT_EQ(c.layer("tail.upsampler.conv").conv, (ConvSpec{256, 1024, 3, true}));
  EXPECT_EQ(c.layer("tail.upsampler.shuffle").factor, 2u);
  EXPECT_EQ(c.layer("tail.conv").conv, (ConvSpec{256, 3, 3, true}));
  EXPECT_EQ(c.layer("tail.conv").annotation, Annotation::ConvOnly);
}

TEST(ModelConfig, ParameterTotalsOfPresets) {
  EXPECT_NEAR(dense_params(preset("edsr_x2")) / 1e6, 40.73, 0.01);
  EXPECT_NEAR(dense_params(preset("rdn_x2")) / 1e6, 19.27, 0.01);
  EXPECT_NEAR(dense_params(preset("carn_x3")) / 1e6, 1.59, 0.01);
  EXPECT_NEAR(dense_params(preset("imdn_x2")) / 1e6, 0.69, 0.01);
}

TEST(ModelConfig, ImdnChannelSplits) {
  const ModelConfig c = preset("imdn_x2");
  EXPECT_EQ(c.layer("imdb.0.c1").conv, (ConvSpec{64, 64, 3, true}));
  EXPECT_EQ(c.layer("imdb.0.c2").conv, (ConvSpec{48, 64, 3, true}));
  EXPECT_EQ(c.layer("imdb.0.c3").conv, (ConvSpec{48, 64, 3, true}));
  EXPECT_EQ(c.layer("imdb.0.c4").conv, (ConvSpec{48, 16, 3, true}));
  EXPECT_EQ(c.layer("imdb.0.c5").conv, (ConvSpec{64, 64, 1, true}));
  EXPECT_EQ(c.layer("imdb.0.c5").annotation, Annotation::ConvOnly);
}

TEST(ModelConfig, TextRoundTripForEveryPreset) {
  for (const auto& name : preset_names()) {
    const ModelConfig c = preset(name);
    const ModelConfig back = ModelConfig::parse(c.to_text());
    EXPECT_EQ(back.to_text(), c.to_text()) << name;
    EXPECT_EQ(back.hash(), c.hash()) << name;
  }
}

TEST(ModelConfig, HashChangesWithConversion) {
  const ModelConfig c = preset("toy-edsr");
  EXPECT_NE(c.hash(), with_ghost_ratio(c, 0.5).hash());
}

TEST(ModelConfig, RejectsGhostOnFirstLastAndPointwise) {
  std::string text = tiny_config().to_text();
  auto replaced = [&](const std::string& from, const std::string& to) {
    std::string t = text;
    t.replace(t.find(from), from.size(), to);
    return t;
  };
  EXPECT_THROW(ModelConfig::parse(replaced("3 8 3 | conv_only", "3 8 3 | ghost")), ValidationError);
  EXPECT_THROW(ModelConfig::parse(replaced("8 12 3 | conv_only", "8 12 3 | ghost")), ValidationError);
  EXPECT_THROW(ModelConfig::parse(replaced("8 8 3 | ghost", "8 8 1 | ghost")), ValidationError);
  EXPECT_NO_THROW(ModelConfig::parse(replaced("8 8 3 | ghost", "8 8 1 | conv_only")));
}

TEST(ModelConfig, RejectsInconsistentGraphs) {
  const std::string base = tiny_config().to_text();
  auto replaced = [&](const std::string& from, const std::string& to) {
    std::string t = base;
    t.replace(t.find(from), from.size(), to);
    return t;
  };
  EXPECT_THROW(ModelConfig::parse(replaced("8 8 3 | ghost", "7 8 3 | ghost")), ValidationError);
  EXPECT_THROW(ModelConfig::parse(replaced("add act head", "add act missing")), ValidationError);
  EXPECT_THROW(ModelConfig::parse(replaced("add act head", "add act up")), ValidationError);
  EXPECT_THROW(ModelConfig::parse(replaced("8 12 3", "8 16 3")), ValidationError);
  EXPECT_THROW(ModelConfig::parse(replaced("scale 2", "scale 3")), ValidationError);
  EXPECT_THROW(ModelConfig::parse(replaced("act |", "head |")), ValidationError);
  EXPECT_THROW(ModelConfig::parse(replaced("| ghost", "| ghost(0.3)")), ValidationError);
  EXPECT_NO_THROW(ModelConfig::parse(replaced("| ghost", "| ghost(0.25)")));
}

TEST(ModelConfig, ParseErrorsNameTheLine) {
  try {
    (void)ModelConfig::parse("model x\nscale 2\nhead | warp input | 3 3 3 | conv_only\n");
    FAIL() << "expected a ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(ModelConfig, LoadConfigDistinguishesPresetsAndFiles) {
  EXPECT_EQ(load_config("toy-edsr").name, "toy-edsr");
  EXPECT_THROW(load_config("/nonexistent/config.txt"), NotFound);
  const auto path = std::filesystem::temp_directory_path() / "ghostsr_model_test.cfg";
  save_config(tiny_config(), path.string());
  EXPECT_EQ(load_config(path.string()).to_text(), tiny_config().to_text());
  std::filesystem::remove(path);
}

TEST(ModelConfig, NonIntegralGhostSplitIsRejected) {
  EXPECT_THROW(with_ghost_ratio(preset("toy-edsr"), 0.3), ValidationError);
  const ModelConfig g = with_ghost_ratio(preset("toy-edsr"), 0.5);
  EXPECT_TRUE(g.layer("body.0.conv1").converted());
  EXPECT_FALSE(g.layer("head").converted());
}

TEST(Network, ToyEdsrShapeLaw) {
  Rng rng(1);
  const Network net = Network::random_init(preset("toy-edsr"), rng);
  const Tensor<float> out = forward_sr(net, random_tensor<float>(Shape{1, 3, 24, 24}, rng, 0.0, 1.0));
  EXPECT_EQ(out.shape(), (Shape{1, 3, 48, 48}));
  for (float v : out.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Network, ToyCarnAndImdnRun) {
  Rng rng(2);
  const Network carn = Network::random_init(preset("toy-carn"), rng);
  EXPECT_EQ(forward_sr(carn, random_tensor<float>(Shape{1, 3, 6, 5}, rng, 0.0, 1.0)).shape(), (Shape{1, 3, 12, 10}));
  const Network imdn = Network::random_init(make_imdn(2, 3), rng);
  EXPECT_EQ(forward_sr(imdn, random_tensor<float>(Shape{1, 3, 4, 4}, rng, 0.0, 1.0)).shape(), (Shape{1, 3, 12, 12}));
}

TEST(Network, MultiScaleCarnSkipsInactiveUpsamplers) {
  Rng rng(3);
  const Network net = Network::random_init(make_carn(8, 1, 1, 3, true), rng);
  Tape<float> tape(true);
  Var x = tape.constant(random_tensor<float>(Shape{1, 3, 4, 4}, rng, 0.0, 1.0));
  const ForwardResult r = net.forward(tape, x, ForwardOptions{});
  EXPECT_EQ(tape.shape(r.output), (Shape{1, 3, 12, 12}));
  EXPECT_TRUE(r.params.contains("up.x3.conv.weight"));
  EXPECT_FALSE(r.params.contains("up.x2.conv.weight"));
  EXPECT_FALSE(r.params.contains("up.x4.0.conv.weight"));
}

TEST(Network, RejectsWrongChannelCount) {
  Rng rng(4);
  const Network net = Network::random_init(preset("toy-edsr"), rng);
  EXPECT_THROW(forward_sr(net, Tensor<float>(Shape{1, 1, 8, 8})), std::invalid_argument);
}

TEST(Network, MeanIsSubtractedAndAddedBack) {
  // With every weight zero, only the output-side mean survives.
  Rng rng(5);
  Network net = Network::random_init(tiny_config(), rng);
  for (const auto& l : net.config().layers) {
    if (!l.is_conv()) continue;
    net.params(l.name).weight.fill(0.0f);
    net.params(l.name).bias->fill(0.0f);
  }
  const Tensor<float> out = forward_sr(net, Tensor<float>(Shape{1, 3, 3, 3}, 0.7f));
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(out(0, c, 1, 1), static_cast<float>(net.config().rgb_mean[c]));
  }
}

TEST(Network, UnfrozenGhostNetworkRefusesInference) {
  Rng rng(6);
  const Network net = convert_to_ghost(Network::random_init(preset("toy-edsr"), rng), 0.5);
  EXPECT_FALSE(net.frozen());
  EXPECT_THROW(forward_sr(net, Tensor<float>(Shape{1, 3, 8, 8})), InvalidState);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(7);
  const Network net = convert_to_ghost(Network::random_init(preset("toy-edsr"), rng), 0.5);
  const Checkpoint ck = net.to_checkpoint();
  const Checkpoint back = Checkpoint::deserialize(ck.serialize());
  EXPECT_EQ(back, ck);
  EXPECT_EQ(back.serialize(), ck.serialize());

  const auto path = std::filesystem::temp_directory_path() / "ghostsr_model_test.gsr";
  ck.save(path.string());
  EXPECT_EQ(Checkpoint::load(path.string()), ck);
  std::filesystem::remove(path);

  const Network again = Network::from_checkpoint(back);
  for (const auto& [name, p] : net.layers()) expect_same(p.weight, again.params(name).weight);
}

TEST(Checkpoint, StartsWithMagicAndVersion) {
  Rng rng(8);
  const std::string bytes = Network::random_init(tiny_config(), rng).to_checkpoint().serialize();
  ASSERT_GE(bytes.size(), 8u);
  EXPECT_EQ(bytes.substr(0, 4), "GSR1");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 0);
}

TEST(Checkpoint, MissingFileIsNotFound) {
  try {
    (void)Checkpoint::load("/nonexistent/model.gsr");
    FAIL() << "expected NotFound";
  } catch (const NotFound& e) {
    EXPECT_NE(std::string(e.what()).find("checkpoint not found"), std::string::npos);
  }
}

TEST(Checkpoint, CorruptionIsRejected) {
  Rng rng(9);
  std::string bytes = Network::random_init(tiny_config(), rng).to_checkpoint().serialize();
  EXPECT_THROW(Checkpoint::deserialize(bytes.substr(0, bytes.size() - 3)), ValidationError);
  EXPECT_THROW(Checkpoint::deserialize(bytes + "x"), ValidationError);
  bytes[0] = 'X';
  EXPECT_THROW(Checkpoint::deserialize(bytes), ValidationError);
}

TEST(Checkpoint, ValidationAgainstConfig) {
  Rng rng(10);
  const Network net = Network::random_init(tiny_config(), rng);
  const Checkpoint ck = net.to_checkpoint();

  EXPECT_THROW(Network::from_checkpoint(preset("toy-edsr"), ck), ValidationError);

  Checkpoint missing;
  missing.meta = ck.meta;
  for (const auto& [name, e] : ck.entries()) {
    if (name != "body.weight") missing.put(name, e);
  }
  try {
    (void)Network::from_checkpoint(missing);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("body.weight"), std::string::npos) << e.what();
  }

  Checkpoint extra = ck;
  extra.put("stray.weight", Tensor<float>(Shape{1, 1, 1, 1}));
  EXPECT_THROW(Network::from_checkpoint(extra), ValidationError);
}

TEST(Checkpoint, ProxiesAndOffsetsAreExclusive) {
  Rng rng(11);
  const Network ghost = convert_to_ghost(Network::random_init(tiny_config(), rng), 0.5);
  const Network frozen = freeze(ghost);
  Checkpoint both = frozen.to_checkpoint();
  both.put("body.proxy", *ghost.params("body").proxy);
  EXPECT_THROW(Network::from_checkpoint(both), ValidationError);
  EXPECT_FALSE(frozen.to_checkpoint().contains("body.proxy"));
  EXPECT_TRUE(frozen.to_checkpoint().contains("body.offsets"));
}

TEST(Convert, ZeroRatioIsIdentity) {
  Rng rng(12);
  const Network net = Network::random_init(preset("toy-edsr"), rng);
  const Network same = convert_to_ghost(net, 0.0);
  EXPECT_EQ(same.to_checkpoint(), net.to_checkpoint());
}

TEST(Convert, InheritsWeightsAndCopiesDenseLayers) {
  Rng rng(13);
  const Network net = Network::random_init(preset("toy-edsr"), rng);
  const ConversionPlan plan = make_plan(net, 0.5, rng);
  const Network ghost = convert_to_ghost(net, 0.5, &plan);
  for (const auto& l : ghost.config().layers) {
    if (!l.is_conv()) continue;
    const LayerParams& before = net.params(l.name);
    const LayerParams& after = ghost.params(l.name);
    if (!l.converted()) {
      expect_same(after.weight, before.weight);
      continue;
    }
    const std::size_t k = l.conv.c_o / 2;
    ASSERT_EQ(after.weight.shape().n, k);
    const std::size_t per = l.conv.c_i * l.conv.s * l.conv.s;
    for (std::size_t i = 0; i < k; ++i) {
      const auto src = static_cast<std::size_t>(after.permutation[i]);
      for (std::size_t e = 0; e < per; ++e) ASSERT_EQ(after.weight.data()[i * per + e], before.weight.data()[src * per + e]);
      ASSERT_EQ(after.bias->values()[i], before.bias->values()[src]);
    }
    ASSERT_TRUE(after.proxy);
    for (float v : after.proxy->values()) EXPECT_EQ(v, 0.0f);
  }
}

TEST(Convert, EdsrLayersSplitInHalf) {
  const ModelConfig g = with_ghost_ratio(preset("edsr_x2"), 0.5);
  for (const auto& l : g.layers) {
    if (!l.is_conv()) continue;
    const bool block = l.name.starts_with("body.") && l.name != "body.conv";
    EXPECT_EQ(l.converted(), block) << l.name;
    if (block) {
      EXPECT_EQ(ghost_count(l.conv.c_o, *l.ghost_ratio), 128u);
    }
  }
}

TEST(Convert, PlanMismatchNamesTheLayer) {
  Rng rng(14);
  const Network net = Network::random_init(preset("toy-edsr"), rng);
  ConversionPlan plan = make_plan(net, 0.5, rng);
  plan.layers.front().name = "nope";
  try {
    (void)convert_to_ghost(net, 0.5, &plan);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("nope"), std::string::npos) << e.what();
  }
  const ConversionPlan other = make_plan(net, 0.25, rng);
  EXPECT_THROW(convert_to_ghost(net, 0.5, &other), ValidationError);
  EXPECT_THROW(convert_to_ghost(net, 0.3), ValidationError);
}

TEST(Convert, IdentityShiftMatchesChannelCopies) {
  Rng rng(15);
  const Network dense = Network::random_init(preset("toy-edsr"), rng);
  const ConversionPlan plan = make_plan(dense, 0.5, rng);
  const Network ghost = convert_to_ghost(dense, 0.5, &plan);

  std::map<std::string, LayerParams> frozen_params = ghost.layers();
  std::map<std::string, LayerParams> copy_params = dense.layers();
  for (const auto& l : ghost.config().layers) {
    if (!l.converted()) continue;
    LayerParams& g = frozen_params.at(l.name);
    g.proxy.reset();
    g.offsets = std::vector<Offset>(g.assignment.size(), Offset{0, 0});
    // Dense equivalent: every ghost channel is a copy of its source filter.
    LayerParams& c = copy_params.at(l.name);
    const std::size_t k = g.weight.shape().n;
    const std::size_t per = l.conv.c_i * l.conv.s * l.conv.s;
    for (std::size_t p = 0; p < l.conv.c_o; ++p) {
      const std::size_t src = p < k ? p : static_cast<std::size_t>(g.assignment[p - k]);
      const auto dst = static_cast<std::size_t>(g.permutation[p]);
      std::copy_n(g.weight.data() + src * per, per, c.weight.data() + dst * per);
      c.bias->values()[dst] = g.bias->values()[src];
    }
  }
  const Network shifted = Network::assemble(ghost.config(), frozen_params);
  const Network copies = Network::assemble(dense.config(), copy_params);
  for (int trial = 0; trial < 3; ++trial) {
    const Tensor<float> x = random_tensor<float>(Shape{1, 3, 10, 9}, rng, 0.0, 1.0);
    const Tensor<float> a = forward_sr(shifted, x);
    const Tensor<float> b = forward_sr(copies, x);
    ASSERT_EQ(a.shape(), b.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) ASSERT_NEAR(a.data()[i], b.data()[i], 1e-5f);
  }
}

TEST(Network, HardenedInferenceIsDeterministic) {
  Rng rng(16);
  Network ghost = convert_to_ghost(Network::random_init(preset("toy-edsr"), rng), 0.5);
  for (const auto& [name, p] : ghost.layers()) {
    if (p.proxy) ghost.params(name).proxy = random_tensor<float>(p.proxy->shape(), rng);
  }
  const Network frozen = freeze(ghost);
  const Tensor<float> x = random_tensor<float>(Shape{1, 3, 12, 12}, rng, 0.0, 1.0);
  expect_same(forward_sr(frozen, x), forward_sr(frozen, x));
  expect_same(forward_sr(Network::from_checkpoint(frozen.to_checkpoint()), x), forward_sr(frozen, x));
}

}  // namespace
}  // namespace ghostsr
