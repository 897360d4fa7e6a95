#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "ghostsr/tensor.hpp"

namespace ghostsr {

enum class DType : std::uint8_t { F32 = 0, F64 = 1, I32 = 2, I8 = 3 };

struct TensorEntry {
  std::vector<std::uint64_t> dims;
  std::variant<std::vector<float>, std::vector<double>, std::vector<std::int32_t>, std::vector<std::int8_t>> data;

  [[nodiscard]] DType dtype() const { return static_cast<DType>(data.index()); }
  [[nodiscard]] std::uint64_t numel() const;
  friend bool operator==(const TensorEntry&, const TensorEntry&) = default;
};

struct CheckpointMeta {
  std::uint64_t config_hash = 0;
  double ratio = 0.0;
  std::int32_t d = 1;
  std::uint32_t scale = 2;
  std::string model;
  std::string config_text;  // canonical text of the config the tensors belong to
  friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

/// Named tensors in a little-endian binary container with magic "GSR1".
/// Entries are written sorted by name so equal checkpoints are equal files.
class Checkpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;

  CheckpointMeta meta;

  void put(const std::string& name, const Tensor<float>& t);
  void put(const std::string& name, TensorEntry entry);
  [[nodiscard]] bool contains(const std::string& name) const { return entries_.contains(name); }
  /// Throws ValidationError naming the tensor when it is absent or not f32.
  [[nodiscard]] Tensor<float> get_float(const std::string& name) const;
  [[nodiscard]] const TensorEntry& entry(const std::string& name) const;
  [[nodiscard]] const std::map<std::string, TensorEntry>& entries() const { return entries_; }

  [[nodiscard]] std::string serialize() const;
  static Checkpoint deserialize(const std::string& bytes);

  void save(const std::string& path) const;
  /// NotFound for a missing file, ValidationError for a malformed one.
  static Checkpoint load(const std::string& path);

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;

 private:
  std::map<std::string, TensorEntry> entries_;
};

}  // namespace ghostsr
