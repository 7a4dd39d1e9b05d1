// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#include "selfnerf/metrics.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "selfnerf/common.hpp"

namespace selfnerf {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

void check_pair(const Image& img, const Image& ref, const PixelRect& bbox) {
  if (img.width != ref.width || img.height != ref.height || img.channels != ref.channels)
    throw ValidationError("metrics: image size mismatch");
  if (bbox.x0 < 0 || bbox.y0 < 0 || bbox.x1 >= img.width || bbox.y1 >= img.height ||
      bbox.width() < 1 || bbox.height() < 1)
    throw ValidationError("metrics: bbox outside image");
}

std::vector<double> gaussian_kernel() {
  std::vector<double> k(kWindow);
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    double d = i - (kWindow - 1) / 2.0;
    k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Valid-mode separable Gaussian filter of a (h x w) buffer.
MatX blur_valid(const MatX& in, const std::vector<double>& k) {
  const auto h = in.rows(), w = in.cols();
  MatX tmp(h, w - kWindow + 1);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x + kWindow <= w; ++x) {
      double s = 0.0;
      for (int i = 0; i < kWindow; ++i) s += k[i] * in(y, x + i);
      tmp(y, x) = s;
    }
  MatX out(h - kWindow + 1, tmp.cols());
  for (Eigen::Index x = 0; x < tmp.cols(); ++x)
    for (Eigen::Index y = 0; y + kWindow <= h; ++y) {
      double s = 0.0;
      for (int i = 0; i < kWindow; ++i) s += k[i] * tmp(y + i, x);
      out(y, x) = s;
    }
  return out;
}

MatX channel_region(const Image& img, const PixelRect& b, int c) {
  MatX m(b.height(), b.width());
  for (int y = 0; y < b.height(); ++y)
    for (int x = 0; x < b.width(); ++x) m(y, x) = img.at(b.x0 + x, b.y0 + y, c);
  return m;
}

}  // namespace

double psnr(const Image& img, const Image& ref, const PixelRect& bbox) {
  check_pair(img, ref, bbox);
  double se = 0.0;
  std::size_t n = 0;
  for (int y = bbox.y0; y <= bbox.y1; ++y)
    for (int x = bbox.x0; x <= bbox.x1; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double d = img.at(x, y, c) - ref.at(x, y, c);
        se += d * d;
        ++n;
      }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(double(n) / se);
}

double ssim(const Image& img, const Image& ref, const PixelRect& bbox) {
  check_pair(img, ref, bbox);
  if (bbox.width() < kWindow || bbox.height() < kWindow)
    throw ValidationError("ssim: bbox smaller than the 11x11 window");

  const std::vector<double> kernel = gaussian_kernel();
  const double c1 = kK1 * kK1;
  const double c2 = kK2 * kK2;

  double total = 0.0;
  for (int c = 0; c < img.channels; ++c) {
    MatX a = channel_region(img, bbox, c);
    MatX b = channel_region(ref, bbox, c);
    MatX mu1 = blur_valid(a, kernel);
    MatX mu2 = blur_valid(b, kernel);
    MatX s11 = blur_valid(a.cwiseProduct(a), kernel) - mu1.cwiseProduct(mu1);
    MatX s22 = blur_valid(b.cwiseProduct(b), kernel) - mu2.cwiseProduct(mu2);
    MatX s12 = blur_valid(a.cwiseProduct(b), kernel) - mu1.cwiseProduct(mu2);

    double sum = 0.0;
    for (Eigen::Index y = 0; y < mu1.rows(); ++y)
      for (Eigen::Index x = 0; x < mu1.cols(); ++x) {
        double num = (2.0 * mu1(y, x) * mu2(y, x) + c1) * (2.0 * s12(y, x) + c2);
        double den = (mu1(y, x) * mu1(y, x) + mu2(y, x) * mu2(y, x) + c1) *
                     (s11(y, x) + s22(y, x) + c2);
        sum += num / den;
      }
    total += sum / double(mu1.size());
  }
  return total / img.channels;
}

}  // namespace selfnerf
