// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#include "selfnerf/volume_renderer.hpp"

#include <algorithm>
#include <cmath>

namespace selfnerf {

void Camera::validate() const {
  if (width < 1 || height < 1) throw ValidationError("camera: non-positive image size");
  if (std::abs(K.determinant()) < 1e-12) throw ValidationError("camera: singular intrinsics");
  Mat3 err = R.transpose() * R - Mat3::Identity();
  if (err.cwiseAbs().maxCoeff() > 1e-6)
    throw ValidationError("camera: non-orthonormal rotation");
}

Vec2 Camera::project(const Vec3& x_world) const {
  Vec3 xc = R * x_world + t;
  Vec3 p = K * xc;
  return Vec2(p[0] / p[2], p[1] / p[2]);
}

Ray generate_ray(const Camera& cam, int px, int py) {
  if (px < 0 || py < 0 || px >= cam.width || py >= cam.height)
    throw ValidationError("generate_ray: pixel outside image");
  Vec3 pix(px + 0.5, py + 0.5, 1.0);
  Vec3 dir_cam = cam.K.inverse() * pix;
  Vec3 dir_world = cam.R.transpose() * dir_cam;
  return Ray{cam.center(), dir_world.normalized()};
}

double anneal_factor(int iteration, double eta0, int anneal_iters) {
  if (anneal_iters <= 0) return 1.0;
  double eta = eta0 + (1.0 - eta0) * double(iteration) / double(anneal_iters);
  return std::min(1.0, eta);
}

std::vector<double> sample_depths(double near, double far, int n, double eta, Rng& rng) {
  const double m = 0.5 * (near + far);
  const double lo = m - eta * (m - near);
  const double hi = m + eta * (far - m);
  const double stratum = (hi - lo) / n;
  std::vector<double> u(n);
  for (int i = 0; i < n; ++i) u[i] = lo + (i + rng.uniform()) * stratum;
  for (int i = 1; i < n; ++i)
    if (u[i] <= u[i - 1]) u[i] = std::nextafter(u[i - 1], hi);
  return u;
}

void composite(const VecX& sigma, const MatX& color, const VecX& delta, Vec3& out_color,
               double& out_weight_sum, CompositeCache& cache) {
  const auto n = sigma.size();
  cache.alpha.resize(n);
  cache.trans.resize(n);
  out_color.setZero();
  out_weight_sum = 0.0;
  double trans = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = 1.0 - std::exp(-sigma[i] * delta[i]);
    cache.alpha[i] = a;
    cache.trans[i] = trans;
    const double w = trans * a;
    out_color += w * color.col(i);
    out_weight_sum += w;
    trans *= 1.0 - a;
  }
  // mathematically W = 1 - prod(1 - alpha_i) <= 1; guard the fp sum
  out_weight_sum = std::clamp(out_weight_sum, 0.0, 1.0);
}

void composite_backward(const VecX& sigma, const MatX& color, const VecX& delta,
                        const CompositeCache& cache, const Vec3& d_out_color,
                        double d_out_weight_sum, VecX& d_sigma, MatX& d_color) {
  const auto n = sigma.size();
  // Backward sweep: suffix = sum_{j>i} (dC . c_j + dW) T_j alpha_j, and
  // d sigma_i = delta_i * (g_i T_{i+1} - suffix), which never divides by
  // (1 - alpha) and so stays finite as alpha -> 1.
  double suffix = 0.0;
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    const double g = d_out_color.dot(color.col(i)) + d_out_weight_sum;
    const double w = cache.trans[i] * cache.alpha[i];
    d_color.col(i) = w * d_out_color;
    const double trans_next = cache.trans[i] * (1.0 - cache.alpha[i]);
    d_sigma[i] = delta[i] * (g * trans_next - suffix);
    suffix += g * w;
  }
}

}  // namespace selfnerf
