#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace ghostsr {

/// Seeded generator with distribution code kept in-house so that draws are
/// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on the open interval (0, 1); both endpoints are unreachable.
  double uniform_open() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_open(); }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    auto i = static_cast<std::size_t>(uniform_open() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  bool coin() { return (next() >> 63) != 0; }

  /// Independent child stream; used to give every consumer of a run seed
  /// its own sequence.
  Rng fork(std::uint64_t stream) {
    std::uint64_t z = next() ^ (stream * 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return Rng(z ^ (z >> 31));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ghostsr
