#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ghostsr/rng.hpp"
#include "ghostsr/tensor.hpp"

namespace ghostsr {

/// Planar image with values in [0, 1]; channel c, row y, column x at
/// data[(c * h + y) * w + x].
struct Image {
  std::size_t channels = 3;
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<float> data;

  Image() = default;
  Image(std::size_t c, std::size_t rows, std::size_t cols, float fill = 0.0f);

  float& at(std::size_t c, std::size_t y, std::size_t x) { return data[(c * h + y) * w + x]; }
  [[nodiscard]] float at(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * h + y) * w + x]; }

  /// (1, channels, h, w) tensor.
  [[nodiscard]] Tensor<float> to_tensor() const;
  /// Image n of a batch.
  static Image from_tensor(const Tensor<float>& t, std::size_t n = 0);
};

/// Reads 8- or 16-bit PNG (gray, palette and alpha are converted to RGB);
/// values map to [0, 1] by the format maximum. Throws NotFound or
/// ValidationError.
Image read_png(const std::string& path);
/// Clamps to [0, 1] and rounds to the nearest code at the given depth (8 or 16).
void write_png(const std::string& path, const Image& img, int bit_depth = 8);

/// Sorted *.png paths in a directory.
std::vector<std::string> list_pngs(const std::string& dir);

/// Separable cubic convolution (a = -0.5) with clamped edges. On downscale
/// the kernel widens by the inverse factor (antialiasing).
Image bicubic_resize(const Image& img, std::size_t out_h, std::size_t out_w);

/// Crops so both dimensions divide by scale.
Image modcrop(const Image& img, std::size_t scale);
Image crop(const Image& img, std::size_t y, std::size_t x, std::size_t h, std::size_t w);

struct Augment {
  bool hflip = false;
  int rot90 = 0;  // counter-clockwise quarter turns, 0..3
};

/// Horizontal flip first, then rotation.
Image apply_augment(const Image& img, Augment a);

struct PatchPair {
  Image lr;
  Image hr;
  std::size_t image = 0;  // index into the source list
  std::size_t y = 0;      // LR crop origin
  std::size_t x = 0;
  Augment augment;
};

/// Uniform scale-aligned crops. LR images are the bicubic downscale of the
/// mod-cropped HR images. Images smaller than scale * patch are skipped with
/// a warning on the given stream.
std::vector<PatchPair> sample_patches(std::span<const Image> hr_images, std::size_t scale, std::size_t patch,
                                      std::size_t count, Rng& rng, bool augment, std::ostream& warnings);

/// Procedural test image: a smooth background with rectangles, disks and
/// stripes of random colours.
Image synthetic_image(std::size_t h, std::size_t w, Rng& rng);

/// (n, c, h, w) batch from equally sized images.
Tensor<float> stack(std::span<const Image> images);

}  // namespace ghostsr
