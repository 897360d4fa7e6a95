#pragma once

#include <cstddef>

#include "ghostsr/image.hpp"

namespace ghostsr {

/// BT.601 studio-swing luma in [16/255, 235/255] as a one-channel image.
Image rgb_to_y(const Image& rgb);

/// Removes n pixels from every border.
Image shave(const Image& img, std::size_t n);

/// 10 log10(1 / MSE) on [0, 1] data after shaving the border; +inf when equal.
double psnr(const Image& a, const Image& b, std::size_t border);

/// Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5), C1 = 0.01^2,
/// C2 = 0.03^2. Images smaller than the window use the largest odd window
/// that fits.
double ssim(const Image& a, const Image& b);

}  // namespace ghostsr
