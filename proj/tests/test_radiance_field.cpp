// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#include "selfnerf/radiance_field.hpp"

#include <cmath>

#include "doctest.h"
#include "selfnerf/rng.hpp"

using namespace selfnerf;

namespace {

FieldConfig tiny_cfg() {
  FieldConfig cfg;
  cfg.hidden_layers = 2;
  cfg.hidden_width = 8;
  cfg.latent_dim = 4;
  cfg.feature_dim = 6;
  return cfg;
}

MatX random_input(const FieldConfig& cfg, int n, Rng& rng) {
  MatX X(cfg.input_dim(), n);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-1.0, 1.0);
  return X;
}

}  // namespace

TEST_CASE("init_params is deterministic, fan-in scaled, zero latents") {
  FieldConfig cfg = tiny_cfg();
  FieldParams a = init_params(cfg, 10, 42);
  FieldParams b = init_params(cfg, 10, 42);
  FieldParams c = init_params(cfg, 10, 43);

  REQUIRE(a.latents.size() == 10);
  for (const auto& l : a.latents) {
    CHECK(l.size() == 4);
    CHECK(l.isZero());
  }
  for (std::size_t l = 0; l < a.mlp.weights.size(); ++l)
    CHECK(a.mlp.weights[l] == b.mlp.weights[l]);
  bool any_diff = false;
  for (std::size_t l = 0; l < a.mlp.weights.size(); ++l)
    any_diff = any_diff || a.mlp.weights[l] != c.mlp.weights[l];
  CHECK(any_diff);

  double limit0 = std::sqrt(6.0 / cfg.input_dim());
  CHECK(a.mlp.weights[0].cwiseAbs().maxCoeff() <= limit0);
}

TEST_CASE("zero parameters give the constant field") {
  FieldConfig cfg = tiny_cfg();
  FieldParams p = init_params(cfg, 2, 1);
  p.mlp.set_zero();
  Rng rng(3);
  MatX X = random_input(cfg, 5, rng);
  MlpCache cache;
  VecX sigma;
  MatX color;
  field_forward(cfg, p.mlp, X, cache, sigma, color);
  for (int i = 0; i < 5; ++i) {
    CHECK(sigma[i] == doctest::Approx(std::log(2.0)).epsilon(1e-12));  // softplus(0)
    for (int c = 0; c < 3; ++c) CHECK(color(c, i) == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("outputs stay in range for arbitrary parameters") {
  FieldConfig cfg = tiny_cfg();
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    FieldParams p = init_params(cfg, 1, rng.next_u64());
    for (auto& w : p.mlp.weights) w *= rng.uniform(0.1, 30.0);
    MatX X = random_input(cfg, 16, rng) * 10.0;
    MlpCache cache;
    VecX sigma;
    MatX color;
    field_forward(cfg, p.mlp, X, cache, sigma, color);
    for (int i = 0; i < 16; ++i) {
      CHECK(sigma[i] >= 0.0);
      for (int c = 0; c < 3; ++c) {
        CHECK(color(c, i) >= 0.0);
        CHECK(color(c, i) <= 1.0);
      }
    }
  }
}

TEST_CASE("forward is deterministic") {
  FieldConfig cfg = tiny_cfg();
  FieldParams p = init_params(cfg, 1, 5);
  Rng rng(6);
  MatX X = random_input(cfg, 3, rng);
  MlpCache ca, cb;
  VecX sa, sb;
  MatX cca, ccb;
  field_forward(cfg, p.mlp, X, ca, sa, cca);
  field_forward(cfg, p.mlp, X, cb, sb, ccb);
  CHECK(sa == sb);
  CHECK(cca == ccb);
}

TEST_CASE("field_backward matches central finite differences") {
  FieldConfig cfg = tiny_cfg();
  Rng rng(11);
  FieldParams p = init_params(cfg, 1, 17);
  const int n = 4;
  MatX X = random_input(cfg, n, rng);
  VecX d_sigma(n);
  MatX d_color(3, n);
  for (int i = 0; i < n; ++i) {
    d_sigma[i] = rng.uniform(-1, 1);
    for (int c = 0; c < 3; ++c) d_color(c, i) = rng.uniform(-1, 1);
  }

  auto objective = [&]() {
    MlpCache cache;
    VecX sigma;
    MatX color;
    field_forward(cfg, p.mlp, X, cache, sigma, color);
    double val = 0.0;
    for (int i = 0; i < n; ++i) {
      val += d_sigma[i] * sigma[i];
      for (int c = 0; c < 3; ++c) val += d_color(c, i) * color(c, i);
    }
    return val;
  };

  MlpCache cache;
  VecX sigma;
  MatX color;
  field_forward(cfg, p.mlp, X, cache, sigma, color);
  Mlp grad;
  for (const auto& w : p.mlp.weights) grad.weights.push_back(MatX::Zero(w.rows(), w.cols()));
  for (const auto& b : p.mlp.biases) grad.biases.push_back(VecX::Zero(b.size()));
  MatX d_input;
  field_backward(cfg, p.mlp, cache, d_sigma, d_color, grad, d_input);

  const double h = 1e-6;
  auto check_param = [&](double* ptr, double analytic) {
    double saved = *ptr;
    *ptr = saved + h;
    double fp = objective();
    *ptr = saved - h;
    double fm = objective();
    *ptr = saved;
    double fd = (fp - fm) / (2.0 * h);
    CHECK(analytic == doctest::Approx(fd).epsilon(1e-5));
  };
  for (std::size_t l = 0; l < p.mlp.weights.size(); ++l) {
    for (int i = 0; i < p.mlp.weights[l].size(); i += 3)
      check_param(p.mlp.weights[l].data() + i, grad.weights[l].data()[i]);
    for (int i = 0; i < p.mlp.biases[l].size(); ++i)
      check_param(p.mlp.biases[l].data() + i, grad.biases[l].data()[i]);
  }
  // input cotangents too (they feed the encoder backward)
  for (int i = 0; i < X.size(); i += 5) check_param(X.data() + i, d_input.data()[i]);
}

TEST_CASE("zero upstream gives zero gradients") {
  FieldConfig cfg = tiny_cfg();
  FieldParams p = init_params(cfg, 1, 9);
  Rng rng(2);
  MatX X = random_input(cfg, 4, rng);
  MlpCache cache;
  VecX sigma;
  MatX color;
  field_forward(cfg, p.mlp, X, cache, sigma, color);
  Mlp grad;
  for (const auto& w : p.mlp.weights) grad.weights.push_back(MatX::Zero(w.rows(), w.cols()));
  for (const auto& b : p.mlp.biases) grad.biases.push_back(VecX::Zero(b.size()));
  MatX d_input;
  field_backward(cfg, p.mlp, cache, VecX::Zero(4), MatX::Zero(3, 4), grad, d_input);
  for (const auto& w : grad.weights) CHECK(w.isZero(0.0));
  for (const auto& b : grad.biases) CHECK(b.isZero(0.0));
  CHECK(d_input.isZero(0.0));
}
