// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#include "selfnerf/radiance_field.hpp"

#include <cmath>

#include "selfnerf/rng.hpp"

namespace selfnerf {

void FieldConfig::validate() const {
  if (hidden_layers < 1) throw ValidationError("field: hidden_layers must be >= 1");
  if (hidden_width < 1) throw ValidationError("field: hidden_width must be >= 1");
  if (latent_dim < 1) throw ValidationError("field: latent_dim must be >= 1");
  if (feature_dim < 1) throw ValidationError("field: feature_dim must be >= 1");
}

void Mlp::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

bool Mlp::all_finite() const {
  for (const auto& w : weights)
    if (!w.allFinite()) return false;
  for (const auto& b : biases)
    if (!b.allFinite()) return false;
  return true;
}

bool FieldParams::all_finite() const {
  if (!mlp.all_finite()) return false;
  for (const auto& l : latents)
    if (!l.allFinite()) return false;
  return true;
}

FieldParams init_params(const FieldConfig& cfg, int frame_count, std::uint64_t seed) {
  cfg.validate();
  FieldParams p;
  Rng rng(seed);
  std::vector<int> dims;
  dims.push_back(cfg.input_dim());
  for (int i = 0; i < cfg.hidden_layers; ++i) dims.push_back(cfg.hidden_width);
  dims.push_back(4);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    MatX w(dims[l + 1], dims[l]);
    double limit = std::sqrt(6.0 / dims[l]);
    for (int r = 0; r < w.rows(); ++r)
      for (int c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
    p.mlp.weights.push_back(std::move(w));
    p.mlp.biases.push_back(VecX::Zero(dims[l + 1]));
  }
  p.latents.assign(frame_count, VecX::Zero(cfg.latent_dim));
  return p;
}

FieldParams zero_like(const FieldParams& params) {
  FieldParams g;
  g.mlp.weights.reserve(params.mlp.weights.size());
  g.mlp.biases.reserve(params.mlp.biases.size());
  for (const auto& w : params.mlp.weights) g.mlp.weights.push_back(MatX::Zero(w.rows(), w.cols()));
  for (const auto& b : params.mlp.biases) g.mlp.biases.push_back(VecX::Zero(b.size()));
  for (const auto& l : params.latents) g.latents.push_back(VecX::Zero(l.size()));
  return g;
}

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

void field_forward(const FieldConfig& cfg, const Mlp& mlp, const MatX& X, MlpCache& cache,
                   VecX& sigma, MatX& color) {
  const auto n = X.cols();
  cache.input = X;
  cache.hidden.resize(cfg.hidden_layers);
  const MatX* prev = &cache.input;
  for (int l = 0; l < cfg.hidden_layers; ++l) {
    cache.hidden[l] = ((mlp.weights[l] * (*prev)).colwise() + mlp.biases[l]).cwiseMax(0.0);
    prev = &cache.hidden[l];
  }
  cache.out_pre = (mlp.weights.back() * (*prev)).colwise() + mlp.biases.back();

  sigma.resize(n);
  color.resize(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sigma[i] = softplus(cache.out_pre(0, i));
    for (int c = 0; c < 3; ++c) color(c, i) = sigmoid(cache.out_pre(c + 1, i));
  }
}

void field_backward(const FieldConfig& cfg, const Mlp& mlp, const MlpCache& cache,
                    const VecX& d_sigma, const MatX& d_color, Mlp& grad, MatX& d_input) {
  const auto n = cache.input.cols();
  MatX delta(4, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    delta(0, i) = d_sigma[i] * sigmoid(cache.out_pre(0, i));  // softplus'
    for (int c = 0; c < 3; ++c) {
      double s = sigmoid(cache.out_pre(c + 1, i));
      delta(c + 1, i) = d_color(c, i) * s * (1.0 - s);
    }
  }

  const int last = cfg.hidden_layers;
  const MatX& last_act = cfg.hidden_layers > 0 ? cache.hidden.back() : cache.input;
  grad.weights[last].noalias() += delta * last_act.transpose();
  grad.biases[last] += delta.rowwise().sum();

  MatX d_act = mlp.weights[last].transpose() * delta;
  for (int l = cfg.hidden_layers - 1; l >= 0; --l) {
    MatX d_pre = d_act.cwiseProduct((cache.hidden[l].array() > 0.0).cast<double>().matrix());
    const MatX& below = l > 0 ? cache.hidden[l - 1] : cache.input;
    grad.weights[l].noalias() += d_pre * below.transpose();
    grad.biases[l] += d_pre.rowwise().sum();
    d_act = mlp.weights[l].transpose() * d_pre;
  }
  d_input = std::move(d_act);
}

void encode_view_dir(const Vec3& v, int bands, std::span<double> out) {
  constexpr double pi = 3.14159265358979323846;
  std::size_t i = 0;
  double scale = pi;
  for (int b = 0; b < bands; ++b) {
    for (int d = 0; d < 3; ++d) {
      out[i++] = std::sin(scale * v[d]);
      out[i++] = std::cos(scale * v[d]);
    }
    scale *= 2.0;
  }
}

}  // namespace selfnerf
