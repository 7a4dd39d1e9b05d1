// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "selfnerf/common.hpp"

namespace selfnerf {

/// Multi-resolution hash grid over normalized 4D inputs (3 canonical
/// coordinates + 1 normalized signed distance).
struct HashGridConfig {
  int levels = 16;
  int features = 2;        // per table entry
  int table_size = 1 << 15;  // entries per level
  int n_min = 16;
  int n_max = 512;
  // Per-dimension hash constants. The first is 1 so that the lowest
  // dimension indexes linearly, matching common hash-grid practice.
  std::array<std::uint32_t, 4> primes{1u, 2654435761u, 805459861u, 3674653429u};
  bool reject_out_of_range = false;  // default: clamp inputs to [0,1]^4

  void validate() const;
};

/// Geometric level resolutions N_l = floor(n_min * b^(l-1)),
/// b = exp((ln n_max - ln n_min) / (levels - 1)). Nondecreasing, endpoints
/// pinned to n_min / n_max.
std::vector<int> level_resolutions(const HashGridConfig& cfg);

/// hash(z) = (xor_i z_i * primes_i) mod table_size, in wrapping u32 arithmetic.
std::uint32_t spatial_hash(const std::array<std::uint32_t, 4>& z_int, const HashGridConfig& cfg);

/// Config, cached resolutions and the learnable tables in one bundle.
/// Storage is level-major, row-major entries: data[(l * T + entry) * F + f].
struct HashGrid {
  HashGridConfig cfg;
  std::vector<int> resolutions;
  std::vector<double> data;

  int feature_dim() const { return cfg.levels * cfg.features; }
  std::size_t entry_offset(int level, std::uint32_t entry) const {
    return (std::size_t(level) * cfg.table_size + entry) * cfg.features;
  }
};

/// Tables initialized uniform in [-1e-4, 1e-4] from the given seed.
HashGrid make_hash_grid(const HashGridConfig& cfg, std::uint64_t seed);

/// Quadrilinear interpolation of the hashed corner entries at every level,
/// concatenated level-major into `out` (length levels * features).
void encode(const Vec4& z, const HashGrid& grid, std::span<double> out);

/// Accumulates d(loss)/d(table entries) for one query into `grad` (same
/// layout and size as grid.data). Touches at most 16 entries per level.
void encode_backward(const Vec4& z, const HashGrid& grid, std::span<const double> upstream,
                     std::span<double> grad);

/// sin/cos positional encoding of a 4-vector: for band j in [0, bands) and
/// dimension d, emits sin(2^j pi z_d), cos(2^j pi z_d). Output length 8*bands.
void frequency_encode(const Vec4& z, int bands, std::span<double> out);

/// Per-vertex banks of independently optimizable features indexed by a
/// quantized signed distance. Ablation baseline for the hash encoding:
/// no hashing, no multi-resolution, no feature sharing between vertices.
struct VertexBankConfig {
  int num_vertices = 0;
  int half_bins = 48;   // logical bins run -half_bins..+half_bins, 0 at d = 0
  int feature_dim = 32;
  double d_max = 0.1;   // distances beyond +-d_max clamp to the boundary bin

  int bins_total() const { return 2 * half_bins + 1; }
  void validate() const;
};

struct VertexBank {
  VertexBankConfig cfg;
  std::vector<double> data;  // [vertex][bin][feature]

  /// Logical bin of a signed distance, clamped to the boundary bins.
  int bin_of(double d) const;
  std::size_t offset(int vertex, int logical_bin) const {
    return (std::size_t(vertex) * cfg.bins_total() + (logical_bin + cfg.half_bins)) * cfg.feature_dim;
  }
  std::span<const double> feature(int vertex, int logical_bin) const {
    return {data.data() + offset(vertex, logical_bin), std::size_t(cfg.feature_dim)};
  }
};

VertexBank make_vertex_bank(const VertexBankConfig& cfg, std::uint64_t seed);

}  // namespace selfnerf
