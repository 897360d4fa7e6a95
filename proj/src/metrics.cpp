#include "ghostsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace ghostsr {

namespace {

void require_same(const Image& a, const Image& b, const char* op) {
  if (a.channels != b.channels || a.h != b.h || a.w != b.w) {
    throw std::invalid_argument(std::string(op) + ": image shapes differ (" + std::to_string(a.h) + "x" +
                                std::to_string(a.w) + " vs " + std::to_string(b.h) + "x" + std::to_string(b.w) + ")");
  }
}

}  // namespace

Image rgb_to_y(const Image& rgb) {
  if (rgb.channels != 3) throw std::invalid_argument("rgb_to_y expects 3 channels");
  Image y(1, rgb.h, rgb.w);
  for (std::size_t r = 0; r < rgb.h; ++r) {
    for (std::size_t c = 0; c < rgb.w; ++c) {
      const double v = 16.0 + 65.481 * rgb.at(0, r, c) + 128.553 * rgb.at(1, r, c) + 24.966 * rgb.at(2, r, c);
      y.at(0, r, c) = static_cast<float>(v / 255.0);
    }
  }
  return y;
}

Image shave(const Image& img, std::size_t n) {
  if (2 * n >= img.h || 2 * n >= img.w) throw std::invalid_argument("shave removes the whole image");
  return crop(img, n, n, img.h - 2 * n, img.w - 2 * n);
}

double psnr(const Image& a, const Image& b, std::size_t border) {
  require_same(a, b, "psnr");
  const Image sa = border ? shave(a, border) : a;
  const Image sb = border ? shave(b, border) : b;
  double sum = 0.0;
  for (std::size_t i = 0; i < sa.data.size(); ++i) {
    const double d = static_cast<double>(sa.data[i]) - static_cast<double>(sb.data[i]);
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(sa.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b) {
  require_same(a, b, "ssim");
  constexpr double C1 = 0.01 * 0.01;
  constexpr double C2 = 0.03 * 0.03;
  std::size_t win = std::min<std::size_t>(11, std::min(a.h, a.w));
  if (win % 2 == 0) --win;
  std::vector<double> g(win);
  const double half = static_cast<double>(win / 2);
  double gsum = 0.0;
  for (std::size_t i = 0; i < win; ++i) {
    const double x = static_cast<double>(i) - half;
    g[i] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
    gsum += g[i];
  }
  for (double& v : g) v /= gsum;

  const std::size_t oh = a.h - win + 1;
  const std::size_t ow = a.w - win + 1;
  // Separable filtering of a, b, a^2, b^2, ab.
  auto filter = [&](std::size_t c, auto&& value) {
    std::vector<double> rows(a.h * ow);
    for (std::size_t y = 0; y < a.h; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < win; ++k) acc += g[k] * value(c, y, x + k);
        rows[y * ow + x] = acc;
      }
    }
    std::vector<double> out(oh * ow);
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < win; ++k) acc += g[k] * rows[(y + k) * ow + x];
        out[y * ow + x] = acc;
      }
    }
    return out;
  };

  double total = 0.0;
  for (std::size_t c = 0; c < a.channels; ++c) {
    auto va = [&](std::size_t ch, std::size_t y, std::size_t x) { return static_cast<double>(a.at(ch, y, x)); };
    auto vb = [&](std::size_t ch, std::size_t y, std::size_t x) { return static_cast<double>(b.at(ch, y, x)); };
    const auto mu_a = filter(c, va);
    const auto mu_b = filter(c, vb);
    const auto aa = filter(c, [&](std::size_t ch, std::size_t y, std::size_t x) { return va(ch, y, x) * va(ch, y, x); });
    const auto bb = filter(c, [&](std::size_t ch, std::size_t y, std::size_t x) { return vb(ch, y, x) * vb(ch, y, x); });
    const auto ab = filter(c, [&](std::size_t ch, std::size_t y, std::size_t x) { return va(ch, y, x) * vb(ch, y, x); });
    double sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double ma = mu_a[i];
      const double mb = mu_b[i];
      const double sa = aa[i] - ma * ma;
      const double sb = bb[i] - mb * mb;
      const double sab = ab[i] - ma * mb;
      sum += ((2.0 * ma * mb + C1) * (2.0 * sab + C2)) / ((ma * ma + mb * mb + C1) * (sa + sb + C2));
    }
    total += sum / static_cast<double>(mu_a.size());
  }
  return total / static_cast<double>(a.channels);
}

}  // namespace ghostsr
