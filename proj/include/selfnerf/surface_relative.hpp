// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "selfnerf/common.hpp"
#include "selfnerf/grid_encoding.hpp"

namespace selfnerf {

/// One frame of the deforming surface. Vertex index i corresponds to index i
/// in every other frame and in the canonical surface.
struct SurfaceFrame {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // unit length
  int frame_index = 0;

  void validate() const;  // sizes match, normals unit within 1e-6
};

/// Frame-0 template whose vertex coordinates anchor features across frames.
struct CanonicalSurface {
  std::vector<Vec3> points;
};

/// Exact k-nearest-neighbor index (kd-tree). Queries match a brute-force
/// scan bit-for-bit: candidates are ordered by (squared distance, vertex
/// index), so equidistant neighbors resolve to the lower index.
class KnnIndex {
 public:
  explicit KnnIndex(const std::vector<Vec3>& points);

  /// k nearest points, ascending (distance, index). k must be <= size().
  void query(const Vec3& q, int k, std::vector<int>& indices, std::vector<double>& distances) const;

  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    int axis = -1;        // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf range into order_
  };

  int build(int begin, int end);
  void search(int node, const Vec3& q, int k, std::vector<std::pair<double, int>>& best) const;

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

/// The k tuples (canonical anchor, signed distance) plus blend weights that
/// stand in for a spatial query point.
struct RelativeSample {
  std::vector<int> indices;        // surface vertex ids, |d| nondecreasing
  std::vector<Vec3> canonical;     // anchors in the template surface
  std::vector<double> signed_d;    // signed distance to each current-frame vertex
  std::vector<double> weights;     // in [0,1], degenerate rule applied
  std::vector<Vec4> z;             // normalized inputs, filled by normalize()

  int k() const { return static_cast<int>(indices.size()); }
  double weight_sum() const;
};

/// Distance from p to x with the sign of (x - p) . n: positive on the
/// outward-normal side. |result| equals the Euclidean distance exactly.
double signed_distance(const Vec3& x, const Vec3& p, const Vec3& n);

/// |cos(x - p, n)| in [0,1]. The degenerate x == p returns 1.
double blend_weight(const Vec3& x, const Vec3& p, const Vec3& n);

/// k nearest current-frame vertices paired with their canonical anchors,
/// current-frame signed distances and blend weights. If every raw weight is
/// below 1e-8 the weights are replaced by uniform ones.
RelativeSample relative_set(const Vec3& x, const SurfaceFrame& frame, const KnnIndex& index,
                            const CanonicalSurface& canonical, int k);

/// Affine map of canonical coordinates by `box` and of signed distance by
/// [-d_max, +d_max] into [0,1]^4. Out-of-range distances clamp.
struct RelNormalizer {
  Aabb box;
  double d_max = 0.1;

  void validate() const;  // box must have positive extent on every axis
  Vec4 map(const Vec3& canonical_point, double d) const;
  void apply(RelativeSample& rs) const;  // fills rs.z
};

Vec4 normalize_rep(const Vec3& canonical_point, double d, const Aabb& scene_bounds, double d_max);

/// Which encoding backs the blended per-neighbor features.
enum class EncoderKind { kHash, kVertexBaseline, kFrequency };

struct EncoderRef {
  EncoderKind kind = EncoderKind::kHash;
  const HashGrid* grid = nullptr;
  const VertexBank* bank = nullptr;
  int freq_bands = 4;

  int feature_dim() const;
};

/// Blend of per-neighbor encodings: sum_i w_i enc(i) / sum_i w_i.
/// rs.z must be filled for hash/frequency encoders.
void blended_feature(const RelativeSample& rs, const EncoderRef& enc, std::span<double> out);

/// Routes d(loss)/d(feature) back to the encoder's learnable storage
/// (hash tables or vertex bank; the frequency encoder has none).
void blended_feature_backward(const RelativeSample& rs, const EncoderRef& enc,
                              std::span<const double> upstream, std::span<double> grad);

/// Full surface-relative hash feature of a query point.
void rel_feature(const Vec3& x, const SurfaceFrame& frame, const KnnIndex& index,
                 const CanonicalSurface& canonical, int k, const RelNormalizer& norm,
                 const HashGrid& grid, std::span<double> out);

/// Ablation baseline: blend of per-nearest-vertex features at the quantized
/// signed-distance bin.
void vertex_baseline_encode(const Vec3& x, const SurfaceFrame& frame, const KnnIndex& index,
                            int k, const VertexBank& bank, std::span<double> out);

}  // namespace selfnerf
