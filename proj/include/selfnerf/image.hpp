// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace selfnerf {

/// Row-major interleaved image, values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c) : width(w), height(h), channels(c), data(std::size_t(w) * h * c, 0.0) {}

  double& at(int x, int y, int c) { return data[(std::size_t(y) * width + x) * channels + c]; }
  double at(int x, int y, int c) const { return data[(std::size_t(y) * width + x) * channels + c]; }
  std::size_t pixel_count() const { return std::size_t(width) * height; }
};

/// Inclusive pixel rectangle.
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;

  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

/// 8-bit PNG round trip. Gray and RGB(A) files load with their native channel
/// count (palette expands to RGB, 16-bit narrows to 8, alpha is dropped).
Image load_png(const std::string& path);
void save_png(const std::string& path, const Image& img);

/// Raw float dump: three little-endian u32 (width, height, channels) followed
/// by width*height*channels little-endian f32, row-major interleaved.
void save_raw_float(const std::string& path, const Image& img);
Image load_raw_float(const std::string& path);

}  // namespace selfnerf
