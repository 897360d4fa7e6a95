#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ghostsr/checkpoint.hpp"
#include "ghostsr/clustering.hpp"
#include "ghostsr/config.hpp"
#include "ghostsr/rng.hpp"
#include "ghostsr/shift.hpp"
#include "ghostsr/tape.hpp"

namespace ghostsr {

/// Parameters of one conv layer. For a converted layer the weight holds only
/// the intrinsic filters, in internal order.
struct LayerParams {
  Tensor<float> weight;
  std::optional<Tensor<float>> bias;
  std::vector<int> assignment;
  std::vector<int> permutation;
  std::optional<Tensor<float>> proxy;         // (shift count, 1, K, K) while training
  std::optional<std::vector<Offset>> offsets;  // after freeze
};

struct ForwardOptions {
  ShiftMode mode = ShiftMode::Inference;
  NoiseMode noise = NoiseMode::Sampled;
  Rng* rng = nullptr;  // required for sampled noise in Train and Soft modes
};

struct ForwardResult {
  Var output;
  /// "layer.weight", "layer.bias" and "layer.proxy" handles registered on the tape.
  std::map<std::string, Var> params;
};

class Network {
 public:
  /// Kaiming-uniform fan-in init; converted layers get the scratch assignment
  /// and zero shift proxies.
  static Network random_init(ModelConfig config, Rng& rng);
  /// Validates names, shapes and the config hash; throws ValidationError.
  static Network from_checkpoint(ModelConfig config, const Checkpoint& ck);
  /// Uses the config text stored in the checkpoint.
  static Network from_checkpoint(const Checkpoint& ck);

  /// Validated construction from explicit parameters.
  static Network assemble(ModelConfig config, std::map<std::string, LayerParams> params);

  [[nodiscard]] Checkpoint to_checkpoint() const;

  [[nodiscard]] const ModelConfig& config() const { return config_; }
  [[nodiscard]] const std::map<std::string, LayerParams>& layers() const { return params_; }
  [[nodiscard]] LayerParams& params(const std::string& layer);
  [[nodiscard]] const LayerParams& params(const std::string& layer) const;
  [[nodiscard]] GhostLayerSpec ghost_spec(const LayerDef& layer) const;

  /// True when no converted layer still carries a shift proxy.
  [[nodiscard]] bool frozen() const;
  /// Ghost ratio shared by the converted layers, 0 when none is converted.
  [[nodiscard]] double ratio() const;

  /// Mean-subtracted forward pass of an (n, 3, h, w) batch in [0, 1]; no clamping.
  ForwardResult forward(Tape<float>& tape, Var input, const ForwardOptions& options) const;

 private:
  Network(ModelConfig config, std::map<std::string, LayerParams> params);
  void check() const;

  ModelConfig config_;
  std::map<std::string, LayerParams> params_;
};

/// Inference on an LR batch; the result is clamped to [0, 1] at the very end.
Tensor<float> forward_sr(const Network& network, const Tensor<float>& lr);

/// Replaces every shift proxy by its argmax offsets (zero noise). Idempotent.
Network freeze(const Network& network);

/// Converts every ghost-annotated layer at the given ratio. The plan, when
/// given, supplies intrinsic filters and assignments; otherwise the scratch
/// ordering is used. Intrinsic weights are inherited and proxies start at zero.
Network convert_to_ghost(const Network& pretrained, double ratio, const ConversionPlan* plan = nullptr);

/// Clustering plan for every ghost-annotated layer of a dense network.
ConversionPlan make_plan(const Network& pretrained, double ratio, Rng& rng, int max_iters = 50);

}  // namespace ghostsr
