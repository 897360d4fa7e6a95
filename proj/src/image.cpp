#include "ghostsr/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <numbers>
#include <ostream>

#include "ghostsr/errors.hpp"

namespace ghostsr {

Image::Image(std::size_t c, std::size_t rows, std::size_t cols, float fill)
    : channels(c), h(rows), w(cols), data(c * rows * cols, fill) {
  if (c == 0 || rows == 0 || cols == 0) throw std::invalid_argument("image dimensions must be >= 1");
}

Tensor<float> Image::to_tensor() const { return Tensor<float>(Shape{1, channels, h, w}, data); }

Image Image::from_tensor(const Tensor<float>& t, std::size_t n) {
  const Shape& s = t.shape();
  if (n >= s.n) throw std::invalid_argument("batch index out of range");
  Image img(s.c, s.h, s.w);
  std::copy_n(t.plane(n, 0), s.c * s.plane(), img.data.begin());
  return img;
}

// ---------------------------------------------------------------------------
// PNG

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

void png_error_to_jmp(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}

void png_warning_ignore(png_structp, png_const_charp) {}

}  // namespace

Image read_png(const std::string& path) {
  File f(std::fopen(path.c_str(), "rb"));
  if (!f) throw NotFound("image not found: " + path);
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw ValidationError("not a PNG file: " + path);
  }

  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_to_jmp, png_warning_ignore);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;
  Image img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError("corrupt PNG " + path + ": " + error);
  }
  if (!info) png_error(png, "png_create_info_struct failed");
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const std::size_t w = png_get_image_width(png, info);
  const std::size_t h = png_get_image_height(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t channels = png_get_channels(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  pixels.resize(rowbytes * h);
  rows.resize(h);
  for (std::size_t y = 0; y < h; ++y) rows[y] = pixels.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  img = Image(3, h, w);
  const bool wide = out_depth == 16;
  const float max = wide ? 65535.0f : 255.0f;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t i = (x * channels + c) * (wide ? 2 : 1);
        const unsigned v = wide ? (unsigned{rows[y][i]} << 8) | rows[y][i + 1] : rows[y][i];
        img.at(c, y, x) = std::clamp(static_cast<float>(v) / max, 0.0f, 1.0f);
      }
    }
  }
  return img;
}

void write_png(const std::string& path, const Image& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw std::invalid_argument("PNG bit depth must be 8 or 16");
  if (img.channels != 3 && img.channels != 1) throw std::invalid_argument("PNG output needs 1 or 3 channels");
  File f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot write " + path);

  const std::size_t bytes = bit_depth / 8;
  const double max = bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<unsigned char> pixels(img.h * img.w * img.channels * bytes);
  for (std::size_t y = 0; y < img.h; ++y) {
    for (std::size_t x = 0; x < img.w; ++x) {
      for (std::size_t c = 0; c < img.channels; ++c) {
        const double v = std::clamp(static_cast<double>(img.at(c, y, x)), 0.0, 1.0);
        const auto code = static_cast<unsigned>(std::lround(v * max));
        const std::size_t i = ((y * img.w + x) * img.channels + c) * bytes;
        if (bytes == 2) {
          pixels[i] = static_cast<unsigned char>(code >> 8);
          pixels[i + 1] = static_cast<unsigned char>(code & 0xFF);
        } else {
          pixels[i] = static_cast<unsigned char>(code);
        }
      }
    }
  }
  std::vector<png_bytep> rows(img.h);
  for (std::size_t y = 0; y < img.h; ++y) rows[y] = pixels.data() + y * img.w * img.channels * bytes;

  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_to_jmp, png_warning_ignore);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed writing PNG " + path + ": " + error);
  }
  if (!info) png_error(png, "png_create_info_struct failed");
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), bit_depth,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::vector<std::string> list_pngs(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) throw NotFound("directory not found: " + dir);
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Resampling

namespace {

double cubic(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

struct Taps {
  std::vector<std::size_t> index;  // clamped source index per tap
  std::vector<double> weight;
  std::size_t per = 0;             // taps per output sample
};

Taps make_taps(std::size_t in, std::size_t out) {
  const double scale = static_cast<double>(out) / static_cast<double>(in);
  const double kscale = std::min(scale, 1.0);
  const double support = 2.0 / kscale;
  Taps t;
  t.per = static_cast<std::size_t>(std::ceil(2.0 * support)) + 1;
  t.index.resize(out * t.per);
  t.weight.resize(out * t.per);
  for (std::size_t o = 0; o < out; ++o) {
    const double u = (static_cast<double>(o) + 0.5) / scale - 0.5;
    const auto left = static_cast<long>(std::floor(u - support));
    double sum = 0.0;
    for (std::size_t k = 0; k < t.per; ++k) {
      const long j = left + static_cast<long>(k);
      const double wgt = kscale * cubic(kscale * (u - static_cast<double>(j)));
      t.index[o * t.per + k] = static_cast<std::size_t>(std::clamp<long>(j, 0, static_cast<long>(in) - 1));
      t.weight[o * t.per + k] = wgt;
      sum += wgt;
    }
    for (std::size_t k = 0; k < t.per; ++k) t.weight[o * t.per + k] /= sum;
  }
  return t;
}

}  // namespace

Image bicubic_resize(const Image& img, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw std::invalid_argument("bicubic_resize: output dimensions must be >= 1");
  if (out_h == img.h && out_w == img.w) return img;
  const Taps th = make_taps(img.h, out_h);
  const Taps tw = make_taps(img.w, out_w);
  Image out(img.channels, out_h, out_w);
  std::vector<double> tmp(img.h * out_w);
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t y = 0; y < img.h; ++y) {
      for (std::size_t x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < tw.per; ++k) {
          acc += tw.weight[x * tw.per + k] * img.at(c, y, tw.index[x * tw.per + k]);
        }
        tmp[y * out_w + x] = acc;
      }
    }
    for (std::size_t y = 0; y < out_h; ++y) {
      for (std::size_t x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < th.per; ++k) {
          acc += th.weight[y * th.per + k] * tmp[th.index[y * th.per + k] * out_w + x];
        }
        out.at(c, y, x) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Image crop(const Image& img, std::size_t y, std::size_t x, std::size_t h, std::size_t w) {
  if (y + h > img.h || x + w > img.w) throw std::invalid_argument("crop window outside the image");
  Image out(img.channels, h, w);
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t r = 0; r < h; ++r) {
      std::copy_n(&img.data[(c * img.h + y + r) * img.w + x], w, &out.data[(c * h + r) * w]);
    }
  }
  return out;
}

Image modcrop(const Image& img, std::size_t scale) {
  if (scale == 0) throw std::invalid_argument("modcrop: scale must be >= 1");
  const std::size_t h = img.h - img.h % scale;
  const std::size_t w = img.w - img.w % scale;
  if (h == 0 || w == 0) throw std::invalid_argument("modcrop: image smaller than the scale factor");
  return crop(img, 0, 0, h, w);
}

Image apply_augment(const Image& img, Augment a) {
  Image cur = img;
  if (a.hflip) {
    for (std::size_t c = 0; c < cur.channels; ++c) {
      for (std::size_t y = 0; y < cur.h; ++y) {
        float* row = &cur.data[(c * cur.h + y) * cur.w];
        std::reverse(row, row + cur.w);
      }
    }
  }
  for (int r = 0; r < ((a.rot90 % 4) + 4) % 4; ++r) {
    Image next(cur.channels, cur.w, cur.h);
    for (std::size_t c = 0; c < cur.channels; ++c) {
      for (std::size_t y = 0; y < next.h; ++y) {
        for (std::size_t x = 0; x < next.w; ++x) next.at(c, y, x) = cur.at(c, x, cur.w - 1 - y);
      }
    }
    cur = std::move(next);
  }
  return cur;
}

std::vector<PatchPair> sample_patches(std::span<const Image> hr_images, std::size_t scale, std::size_t patch,
                                      std::size_t count, Rng& rng, bool augment, std::ostream& warnings) {
  if (scale == 0 || patch == 0) throw std::invalid_argument("sample_patches: scale and patch must be >= 1");
  std::vector<std::size_t> usable;
  std::vector<Image> hr;
  std::vector<Image> lr;
  for (std::size_t i = 0; i < hr_images.size(); ++i) {
    const Image& img = hr_images[i];
    if (img.h < scale * patch || img.w < scale * patch) {
      warnings << "warning: skipping image " << i << " (" << img.h << "x" << img.w << ") smaller than "
               << scale * patch << "x" << scale * patch << "\n";
      continue;
    }
    usable.push_back(i);
    hr.push_back(modcrop(img, scale));
    lr.push_back(bicubic_resize(hr.back(), hr.back().h / scale, hr.back().w / scale));
  }
  std::vector<PatchPair> out;
  if (usable.empty()) {
    if (count > 0) warnings << "warning: no image is large enough for " << patch << "px patches\n";
    return out;
  }
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t k = rng.index(usable.size());
    PatchPair p;
    p.image = usable[k];
    p.y = rng.index(lr[k].h - patch + 1);
    p.x = rng.index(lr[k].w - patch + 1);
    if (augment) {
      p.augment.hflip = rng.coin();
      p.augment.rot90 = static_cast<int>(rng.index(4));
    }
    p.lr = apply_augment(crop(lr[k], p.y, p.x, patch, patch), p.augment);
    p.hr = apply_augment(crop(hr[k], p.y * scale, p.x * scale, patch * scale, patch * scale), p.augment);
    out.push_back(std::move(p));
  }
  return out;
}

Image synthetic_image(std::size_t h, std::size_t w, Rng& rng) {
  Image img(3, h, w);
  float base[3];
  float grad[3][2];
  for (std::size_t c = 0; c < 3; ++c) {
    base[c] = static_cast<float>(rng.uniform(0.2, 0.8));
    grad[c][0] = static_cast<float>(rng.uniform(-0.3, 0.3));
    grad[c][1] = static_cast<float>(rng.uniform(-0.3, 0.3));
  }
  const auto fh = static_cast<float>(h);
  const auto fw = static_cast<float>(w);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        img.at(c, y, x) = base[c] + grad[c][0] * (static_cast<float>(y) / fh - 0.5f) +
                          grad[c][1] * (static_cast<float>(x) / fw - 0.5f);
      }
    }
  }
  const std::size_t shapes = 6 + rng.index(6);
  for (std::size_t s = 0; s < shapes; ++s) {
    float color[3];
    for (float& v : color) v = static_cast<float>(rng.uniform(0.0, 1.0));
    const double cy = rng.uniform(0.0, fh);
    const double cx = rng.uniform(0.0, fw);
    const double size = rng.uniform(0.08, 0.35) * std::min(fh, fw);
    const std::size_t kind = rng.index(3);
    const double period = rng.uniform(3.0, 9.0);
    const double angle = rng.uniform(0.0, std::numbers::pi);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double dy = static_cast<double>(y) - cy;
        const double dx = static_cast<double>(x) - cx;
        bool inside = false;
        if (kind == 0) {
          inside = std::abs(dy) < size * 0.6 && std::abs(dx) < size;
        } else if (kind == 1) {
          inside = dy * dy + dx * dx < size * size;
        } else {
          const double along = dx * std::cos(angle) + dy * std::sin(angle);
          inside = std::abs(dy) < size && std::abs(dx) < size && std::fmod(std::abs(along), period) < period / 2;
        }
        if (inside) {
          for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = color[c];
        }
      }
    }
  }
  for (float& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
  return img;
}

Tensor<float> stack(std::span<const Image> images) {
  if (images.empty()) throw std::invalid_argument("stack: no images");
  const Image& first = images.front();
  Tensor<float> out(Shape{images.size(), first.channels, first.h, first.w});
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = images[n];
    if (img.channels != first.channels || img.h != first.h || img.w != first.w) {
      throw std::invalid_argument("stack: images differ in size");
    }
    std::copy(img.data.begin(), img.data.end(), out.plane(n, 0));
  }
  return out;
}

}  // namespace ghostsr
