#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ghostsr {

/// NCHW extents. Every dimension is at least 1.
struct Shape {
  std::size_t n = 1;
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  [[nodiscard]] std::size_t numel() const noexcept { return n * c * h * w; }
  [[nodiscard]] std::size_t plane() const noexcept { return h * w; }
  [[nodiscard]] std::string str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
           std::to_string(w);
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

inline void validate_shape(const Shape& s) {
  if (s.n == 0) throw std::invalid_argument("tensor batch dimension n must be >= 1");
  if (s.c == 0) throw std::invalid_argument("tensor channel dimension c must be >= 1");
  if (s.h == 0) throw std::invalid_argument("tensor height h must be >= 1");
  if (s.w == 0) throw std::invalid_argument("tensor width w must be >= 1");
}

/// Dense rank-4 array in row-major NCHW order.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : values_(1, T{0}) {}

  explicit Tensor(Shape shape, T fill = T{0}) : shape_(shape) {
    validate_shape(shape_);
    values_.assign(shape_.numel(), fill);
  }

  Tensor(Shape shape, std::vector<T> values) : shape_(shape), values_(std::move(values)) {
    validate_shape(shape_);
    if (values_.size() != shape_.numel()) {
      throw std::invalid_argument("tensor data length " + std::to_string(values_.size()) +
                                  " does not match shape " + shape_.str());
    }
  }

  static Tensor scalar(T v) { return Tensor(Shape{}, v); }

  [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t numel() const noexcept { return values_.size(); }

  [[nodiscard]] std::span<T> values() noexcept { return values_; }
  [[nodiscard]] std::span<const T> values() const noexcept { return values_; }
  [[nodiscard]] T* data() noexcept { return values_.data(); }
  [[nodiscard]] const T* data() const noexcept { return values_.data(); }

  [[nodiscard]] std::size_t offset(std::size_t n, std::size_t c, std::size_t y,
                                   std::size_t x) const noexcept {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  T& operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) noexcept {
    return values_[offset(n, c, y, x)];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return values_[offset(n, c, y, x)];
  }

  [[nodiscard]] T* plane(std::size_t n, std::size_t c) noexcept {
    return values_.data() + (n * shape_.c + c) * shape_.plane();
  }
  [[nodiscard]] const T* plane(std::size_t n, std::size_t c) const noexcept {
    return values_.data() + (n * shape_.c + c) * shape_.plane();
  }

  /// Scalar value of a 1x1x1x1 tensor.
  [[nodiscard]] T item() const {
    if (numel() != 1) throw std::invalid_argument("item() requires a single-element tensor");
    return values_[0];
  }

  template <typename U>
  [[nodiscard]] Tensor<U> cast() const {
    std::vector<U> out(values_.begin(), values_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

 private:
  Shape shape_;
  std::vector<T> values_;
};

using FeatureTensor = Tensor<float>;

}  // namespace ghostsr
