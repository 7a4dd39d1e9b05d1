// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "selfnerf/common.hpp"
#include "selfnerf/rng.hpp"

namespace selfnerf {

/// Pinhole camera: x_cam = R x_world + t, pixel = K x_cam / z.
struct Camera {
  Mat3 K = Mat3::Identity();
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  int width = 0;
  int height = 0;

  void validate() const;  // K invertible, R orthonormal within 1e-6
  Vec3 center() const { return -R.transpose() * t; }
  /// Projects a world point to pixel coordinates (origin at the corner of
  /// pixel (0,0); pixel centers sit at half-integer coordinates).
  Vec2 project(const Vec3& x_world) const;
};

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit
};

/// Ray through the center of pixel (px, py). Pixel must be inside the image.
Ray generate_ray(const Camera& cam, int px, int py);

/// Sample-space annealing factor: min(1, eta0 + (1 - eta0) * i / n_anneal).
double anneal_factor(int iteration, double eta0, int anneal_iters);

/// Stratified depths over the annealed interval around the ray midpoint
/// [m - eta (m - near), m + eta (far - m)], m = (near + far) / 2.
/// Strictly increasing, one sample per stratum.
std::vector<double> sample_depths(double near, double far, int n, double eta, Rng& rng);

struct CompositeCache {
  VecX alpha;  // 1 - exp(-sigma_i delta_i)
  VecX trans;  // transmittance before sample i
};

/// Discrete compositing: C = sum_i T_i alpha_i c_i, W = sum_i T_i alpha_i.
/// color is 3 x N, columns are samples ordered front to back.
void composite(const VecX& sigma, const MatX& color, const VecX& delta, Vec3& out_color,
               double& out_weight_sum, CompositeCache& cache);

/// Reverse pass of composite. d_sigma / d_color must be presized (N, 3 x N);
/// gradients are written, not accumulated.
void composite_backward(const VecX& sigma, const MatX& color, const VecX& delta,
                        const CompositeCache& cache, const Vec3& d_out_color,
                        double d_out_weight_sum, VecX& d_sigma, MatX& d_color);

}  // namespace selfnerf
