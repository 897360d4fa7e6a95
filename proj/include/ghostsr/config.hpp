#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ghostsr/ops.hpp"

namespace ghostsr {

enum class LayerKind { Conv, Relu, LeakyRelu, Add, Scale, Concat, Slice, PixelShuffle };

/// What conversion may do with a conv layer.
enum class Annotation {
  None,      // structural op
  ConvOnly,  // never converted
  Ghost,     // eligible; converted once ghost_ratio is set
  Inactive,  // carries parameters but is not executed at this scale
};

struct LayerDef {
  std::string name;
  LayerKind kind = LayerKind::Conv;
  std::vector<std::string> inputs;
  Annotation annotation = Annotation::None;
  ConvSpec conv;                      // Conv only
  std::optional<double> ghost_ratio;  // Ghost layers after conversion
  double value = 0.0;                 // Scale factor or LeakyRelu slope
  std::size_t start = 0;              // Slice
  std::size_t count = 0;              // Slice
  std::size_t factor = 1;             // PixelShuffle

  [[nodiscard]] bool is_conv() const { return kind == LayerKind::Conv; }
  [[nodiscard]] bool converted() const { return annotation == Annotation::Ghost && ghost_ratio && *ghost_ratio > 0; }
};

struct ShiftSettings {
  int d = 1;
  double tau = 1.0;
  bool shared = false;
  friend bool operator==(const ShiftSettings&, const ShiftSettings&) = default;
};

/// Inferred extent of one node: channels and resolution relative to the LR input.
struct NodeShape {
  std::size_t channels = 0;
  std::size_t upscale = 1;
};

/// Declarative network. Layers run in file order; "input" names the
/// mean-subtracted LR image and the output is the last layer unless set.
struct ModelConfig {
  std::string name;
  std::size_t scale = 2;
  std::array<double, 3> rgb_mean{0.4488, 0.4371, 0.4040};
  ShiftSettings shift;
  std::string output;
  std::vector<LayerDef> layers;

  [[nodiscard]] const std::string& output_name() const;
  [[nodiscard]] const LayerDef& layer(std::string_view layer_name) const;
  [[nodiscard]] const LayerDef* find(std::string_view layer_name) const;

  /// Shape inference and conversion rules; throws ValidationError.
  [[nodiscard]] std::vector<NodeShape> infer_shapes() const;
  void validate() const { (void)infer_shapes(); }

  [[nodiscard]] std::string to_text() const;
  static ModelConfig parse(std::string_view text);
  /// FNV-1a 64 of the canonical text.
  [[nodiscard]] std::uint64_t hash() const;
};

/// Copy with every ghost-annotated layer converted at ratio; layers whose
/// width gives no ghost channel stay dense. Throws ValidationError for a
/// non-integral split or an already converted config.
ModelConfig with_ghost_ratio(const ModelConfig& config, double ratio);

/// Built-in architectures: edsr_x{2,3,4}, rdn_x{2,3,4}, rdn_x2_appendix,
/// carn_x{2,3,4}, imdn_x{2,3,4}, toy-edsr, toy-carn.
std::vector<std::string> preset_names();
ModelConfig preset(const std::string& name);

/// A preset name or a config file path. Throws NotFound for neither.
ModelConfig load_config(const std::string& name_or_path);
void save_config(const ModelConfig& config, const std::string& path);

// Builders used by the presets; exposed for tests and experiments.
ModelConfig make_edsr(std::size_t blocks, std::size_t feats, std::size_t scale, double res_scale);
ModelConfig make_rdn(std::size_t blocks, std::size_t convs, std::size_t growth, std::size_t feats,
                     std::size_t scale);
ModelConfig make_carn(std::size_t feats, std::size_t blocks, std::size_t units, std::size_t scale,
                      bool multi_scale);
ModelConfig make_imdn(std::size_t modules, std::size_t scale);

}  // namespace ghostsr
