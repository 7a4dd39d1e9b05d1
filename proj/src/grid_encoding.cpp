// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#include "selfnerf/grid_encoding.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>

#include "selfnerf/rng.hpp"

namespace selfnerf {

namespace {

std::atomic<bool> g_clamp_warned{false};

void warn_clamp_once() {
  if (!g_clamp_warned.exchange(true))
    std::fprintf(stderr, "warning: encode input outside [0,1]^4, clamping (reported once per run)\n");
}

Vec4 prepare_input(const Vec4& z, const HashGridConfig& cfg) {
  bool inside = true;
  for (int d = 0; d < 4; ++d) inside = inside && z[d] >= 0.0 && z[d] <= 1.0;
  if (inside) return z;
  if (cfg.reject_out_of_range) throw ValidationError("encode input outside [0,1]^4");
  warn_clamp_once();
  Vec4 c;
  for (int d = 0; d < 4; ++d) c[d] = std::clamp(z[d], 0.0, 1.0);
  return c;
}

struct CellBasis {
  std::array<std::uint32_t, 4> base;
  std::array<double, 4> frac;
};

CellBasis cell_basis(const Vec4& z, int resolution) {
  CellBasis cb;
  for (int d = 0; d < 4; ++d) {
    double p = z[d] * resolution;
    double f = std::floor(p);
    cb.base[d] = static_cast<std::uint32_t>(f);
    cb.frac[d] = p - f;
  }
  return cb;
}

/// Precomputed per-level corner machinery: the hash of corner c is the xor
/// of per-dimension premultiplied terms, its weight a product of two pair
/// tables. Equivalent to spatial_hash() on every corner, term by term.
struct CornerBasis {
  std::uint32_t hd[4][2];
  double w01[4], w23[4];

  CornerBasis(const CellBasis& cb, const HashGridConfig& cfg) {
    for (int d = 0; d < 4; ++d) {
      hd[d][0] = cb.base[d] * cfg.primes[d];
      hd[d][1] = (cb.base[d] + 1u) * cfg.primes[d];
    }
    const double f0 = cb.frac[0], f1 = cb.frac[1], f2 = cb.frac[2], f3 = cb.frac[3];
    w01[0] = (1.0 - f0) * (1.0 - f1);
    w01[1] = f0 * (1.0 - f1);
    w01[2] = (1.0 - f0) * f1;
    w01[3] = f0 * f1;
    w23[0] = (1.0 - f2) * (1.0 - f3);
    w23[1] = f2 * (1.0 - f3);
    w23[2] = (1.0 - f2) * f3;
    w23[3] = f2 * f3;
  }

  std::uint32_t hash(int corner) const {
    return hd[0][corner & 1] ^ hd[1][(corner >> 1) & 1] ^ hd[2][(corner >> 2) & 1] ^
           hd[3][corner >> 3];
  }
  double weight(int corner) const { return w01[corner & 3] * w23[corner >> 2]; }
};

std::uint32_t table_reduce(std::uint32_t h, std::uint32_t table_size) {
  // power-of-two tables mask instead of dividing
  if ((table_size & (table_size - 1)) == 0) return h & (table_size - 1);
  return h % table_size;
}

}  // namespace

void HashGridConfig::validate() const {
  if (levels < 1) throw ValidationError("hash grid: levels must be >= 1");
  if (features < 1) throw ValidationError("hash grid: features must be >= 1");
  if (table_size < 1) throw ValidationError("hash grid: table_size must be >= 1");
  if (n_min < 1) throw ValidationError("hash grid: n_min must be >= 1");
  if (n_max < n_min) throw ValidationError("hash grid: n_max must be >= n_min");
  if (levels == 1 && n_max != n_min)
    throw ValidationError("hash grid: single level requires n_max == n_min");
  if (levels > 1 && n_max == n_min)
    throw ValidationError("hash grid: multiple levels require n_max > n_min");
}

std::vector<int> level_resolutions(const HashGridConfig& cfg) {
  cfg.validate();
  std::vector<int> res(cfg.levels);
  if (cfg.levels == 1) {
    res[0] = cfg.n_min;
    return res;
  }
  double step = (std::log(double(cfg.n_max)) - std::log(double(cfg.n_min))) / (cfg.levels - 1);
  int prev = cfg.n_min;
  for (int l = 0; l < cfg.levels; ++l) {
    // epsilon before floor: mathematically-integer products must land exactly
    double v = cfg.n_min * std::exp(l * step);
    int n = static_cast<int>(std::floor(v + 1e-6));
    res[l] = std::max(n, prev);
    prev = res[l];
  }
  res.front() = cfg.n_min;
  res.back() = cfg.n_max;
  return res;
}

std::uint32_t spatial_hash(const std::array<std::uint32_t, 4>& z_int, const HashGridConfig& cfg) {
  std::uint32_t h = 0;
  for (int d = 0; d < 4; ++d) h ^= z_int[d] * cfg.primes[d];
  return h % static_cast<std::uint32_t>(cfg.table_size);
}

HashGrid make_hash_grid(const HashGridConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  HashGrid grid;
  grid.cfg = cfg;
  grid.resolutions = level_resolutions(cfg);
  grid.data.resize(std::size_t(cfg.levels) * cfg.table_size * cfg.features);
  Rng rng(seed);
  for (double& v : grid.data) v = rng.uniform(-1e-4, 1e-4);
  return grid;
}

void encode(const Vec4& z, const HashGrid& grid, std::span<double> out) {
  const Vec4 q = prepare_input(z, grid.cfg);
  const int F = grid.cfg.features;
  const std::uint32_t T = static_cast<std::uint32_t>(grid.cfg.table_size);
  for (int l = 0; l < grid.cfg.levels; ++l) {
    const CornerBasis corners(cell_basis(q, grid.resolutions[l]), grid.cfg);
    const double* level_data = grid.data.data() + std::size_t(l) * T * F;
    double* slot = out.data() + std::size_t(l) * F;
    for (int f = 0; f < F; ++f) slot[f] = 0.0;
    for (int corner = 0; corner < 16; ++corner) {
      const double w = corners.weight(corner);
      const double* entry = level_data + std::size_t(table_reduce(corners.hash(corner), T)) * F;
      for (int f = 0; f < F; ++f) slot[f] += w * entry[f];
    }
  }
}

void encode_backward(const Vec4& z, const HashGrid& grid, std::span<const double> upstream,
                     std::span<double> grad) {
  const Vec4 q = prepare_input(z, grid.cfg);
  const int F = grid.cfg.features;
  const std::uint32_t T = static_cast<std::uint32_t>(grid.cfg.table_size);
  for (int l = 0; l < grid.cfg.levels; ++l) {
    const CornerBasis corners(cell_basis(q, grid.resolutions[l]), grid.cfg);
    double* level_grad = grad.data() + std::size_t(l) * T * F;
    const double* up = upstream.data() + std::size_t(l) * F;
    for (int corner = 0; corner < 16; ++corner) {
      const double w = corners.weight(corner);
      if (w == 0.0) continue;
      double* entry = level_grad + std::size_t(table_reduce(corners.hash(corner), T)) * F;
      for (int f = 0; f < F; ++f) entry[f] += w * up[f];
    }
  }
}

void frequency_encode(const Vec4& z, int bands, std::span<double> out) {
  constexpr double pi = 3.14159265358979323846;
  std::size_t i = 0;
  double scale = pi;
  for (int b = 0; b < bands; ++b) {
    for (int d = 0; d < 4; ++d) {
      out[i++] = std::sin(scale * z[d]);
      out[i++] = std::cos(scale * z[d]);
    }
    scale *= 2.0;
  }
}

void VertexBankConfig::validate() const {
  if (num_vertices < 1) throw ValidationError("vertex bank: num_vertices must be >= 1");
  if (half_bins < 0) throw ValidationError("vertex bank: half_bins must be >= 0");
  if (feature_dim < 1) throw ValidationError("vertex bank: feature_dim must be >= 1");
  if (d_max <= 0.0) throw ValidationError("vertex bank: d_max must be > 0");
}

int VertexBank::bin_of(double d) const {
  if (cfg.half_bins == 0) return 0;
  double b = std::round(d / cfg.d_max * cfg.half_bins);
  return static_cast<int>(std::clamp(b, -double(cfg.half_bins), double(cfg.half_bins)));
}

VertexBank make_vertex_bank(const VertexBankConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  VertexBank bank;
  bank.cfg = cfg;
  bank.data.resize(std::size_t(cfg.num_vertices) * cfg.bins_total() * cfg.feature_dim);
  Rng rng(seed);
  for (double& v : bank.data) v = rng.uniform(-1e-4, 1e-4);
  return bank;
}

}  // namespace selfnerf
