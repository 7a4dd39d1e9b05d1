// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "selfnerf/common.hpp"

namespace selfnerf {

/// Small fully-connected field head: (blended feature, per-frame latent)
/// -> (density, radiance). ReLU hidden layers, softplus density head,
/// sigmoid color head.
struct FieldConfig {
  int hidden_layers = 2;
  int hidden_width = 64;
  int latent_dim = 16;
  int feature_dim = 32;
  bool use_view_dirs = false;  // appends a frequency-encoded view direction
  int view_freq_bands = 4;

  int view_dim() const { return use_view_dirs ? 6 * view_freq_bands : 0; }
  int input_dim() const { return feature_dim + latent_dim + view_dim(); }
  void validate() const;
};

struct Mlp {
  std::vector<MatX> weights;
  std::vector<VecX> biases;

  void set_zero();
  bool all_finite() const;
};

/// Every learnable of the field: MLP weights plus one latent per frame.
struct FieldParams {
  Mlp mlp;
  std::vector<VecX> latents;

  bool all_finite() const;
};

/// Deterministic init: fan-in-scaled uniform weights, zero biases and latents.
FieldParams init_params(const FieldConfig& cfg, int frame_count, std::uint64_t seed);

/// Zero-shaped gradient twin of `params`.
FieldParams zero_like(const FieldParams& params);

/// Cached activations for one forward batch (columns are samples).
struct MlpCache {
  MatX input;               // input_dim x N
  std::vector<MatX> hidden; // post-ReLU activations per hidden layer
  MatX out_pre;             // 4 x N, pre-activation heads
};

/// Batched forward: X is input_dim x N. sigma >= 0, color in [0,1]^3.
void field_forward(const FieldConfig& cfg, const Mlp& mlp, const MatX& X, MlpCache& cache,
                   VecX& sigma, MatX& color);

/// Batched reverse pass. d_input receives d(loss)/d(input) (input_dim x N);
/// weight/bias gradients accumulate into `grad`.
void field_backward(const FieldConfig& cfg, const Mlp& mlp, const MlpCache& cache,
                    const VecX& d_sigma, const MatX& d_color, Mlp& grad, MatX& d_input);

/// sin/cos bands of a (unit) direction, 6 * bands values.
void encode_view_dir(const Vec3& v, int bands, std::span<double> out);

double softplus(double x);
double sigmoid(double x);

}  // namespace selfnerf
