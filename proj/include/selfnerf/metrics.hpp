// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "selfnerf/image.hpp"

namespace selfnerf {

/// 10 log10(1 / MSE) over bbox pixels, images in [0,1]. Identical images
/// return +infinity (a sentinel, not an error).
double psnr(const Image& img, const Image& ref, const PixelRect& bbox);

/// Single-scale SSIM over the bbox: 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range 1. Channels are averaged. The bbox
/// must fit at least one full window.
double ssim(const Image& img, const Image& ref, const PixelRect& bbox);

}  // namespace selfnerf
