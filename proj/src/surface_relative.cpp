// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#include "selfnerf/surface_relative.hpp"

#include <algorithm>
#include <cmath>

namespace selfnerf {

namespace {

constexpr int kLeafSize = 8;

/// Keeps the k smallest (squared distance, index) pairs, sorted ascending.
void consider(std::vector<std::pair<double, int>>& best, int k, double d2, int idx) {
  std::pair<double, int> cand{d2, idx};
  if (static_cast<int>(best.size()) == k && cand >= best.back()) return;
  auto pos = std::lower_bound(best.begin(), best.end(), cand);
  best.insert(pos, cand);
  if (static_cast<int>(best.size()) > k) best.pop_back();
}

}  // namespace

void SurfaceFrame::validate() const {
  if (points.empty()) throw ValidationError("surface frame has no points");
  if (points.size() != normals.size())
    throw ValidationError("surface frame: point/normal count mismatch");
  for (std::size_t i = 0; i < normals.size(); ++i) {
    if (std::abs(normals[i].norm() - 1.0) > 1e-6)
      throw ValidationError("surface frame: non-unit normal at vertex " + std::to_string(i));
  }
}

KnnIndex::KnnIndex(const std::vector<Vec3>& points) : points_(points) {
  if (points_.empty()) throw ValidationError("knn index: empty point cloud");
  order_.resize(points_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  root_ = build(0, static_cast<int>(points_.size()));
}

int KnnIndex::build(int begin, int end) {
  int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  Aabb box;
  for (int i = begin; i < end; ++i) box.expand(points_[order_[i]]);
  int axis = 0;
  Vec3 ext = box.extent();
  if (ext[1] > ext[axis]) axis = 1;
  if (ext[2] > ext[axis]) axis = 2;

  int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     double pa = points_[a][axis], pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  double split = points_[order_[mid]][axis];

  int left = build(begin, mid);
  int right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KnnIndex::search(int node, const Vec3& q, int k, std::vector<std::pair<double, int>>& best) const {
  const Node& n = nodes_[node];
  if (n.axis < 0) {
    for (int i = n.begin; i < n.end; ++i) {
      int idx = order_[i];
      consider(best, k, (q - points_[idx]).squaredNorm(), idx);
    }
    return;
  }
  double delta = q[n.axis] - n.split;
  int near = delta < 0.0 ? n.left : n.right;
  int far = delta < 0.0 ? n.right : n.left;
  search(near, q, k, best);
  // <= keeps ties exact: an equidistant lower-index point may sit beyond the plane
  if (static_cast<int>(best.size()) < k || delta * delta <= best.back().first)
    search(far, q, k, best);
}

void KnnIndex::query(const Vec3& q, int k, std::vector<int>& indices, std::vector<double>& distances) const {
  if (k < 1) throw ValidationError("knn query: k must be >= 1");
  if (static_cast<std::size_t>(k) > points_.size())
    throw ValidationError("knn query: k exceeds point count");
  static thread_local std::vector<std::pair<double, int>> best;
  best.clear();
  best.reserve(k + 1);
  search(root_, q, k, best);
  indices.resize(k);
  distances.resize(k);
  for (int i = 0; i < k; ++i) {
    indices[i] = best[i].second;
    distances[i] = std::sqrt(best[i].first);
  }
}

double RelativeSample::weight_sum() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

double signed_distance(const Vec3& x, const Vec3& p, const Vec3& n) {
  Vec3 delta = x - p;
  double dist = delta.norm();
  if (dist == 0.0) return 0.0;
  return delta.dot(n) >= 0.0 ? dist : -dist;
}

double blend_weight(const Vec3& x, const Vec3& p, const Vec3& n) {
  Vec3 delta = x - p;
  double dist = delta.norm();
  if (dist == 0.0) return 1.0;
  return std::clamp(std::abs(delta.dot(n)) / dist, 0.0, 1.0);
}

RelativeSample relative_set(const Vec3& x, const SurfaceFrame& frame, const KnnIndex& index,
                            const CanonicalSurface& canonical, int k) {
  RelativeSample rs;
  std::vector<int> idx;
  std::vector<double> dist;
  index.query(x, k, idx, dist);
  rs.indices = idx;
  rs.canonical.resize(k);
  rs.signed_d.resize(k);
  rs.weights.resize(k);
  for (int i = 0; i < k; ++i) {
    const Vec3& p = frame.points[idx[i]];
    const Vec3& n = frame.normals[idx[i]];
    rs.canonical[i] = canonical.points[idx[i]];
    rs.signed_d[i] = signed_distance(x, p, n);
    rs.weights[i] = blend_weight(x, p, n);
  }
  double wmax = *std::max_element(rs.weights.begin(), rs.weights.end());
  if (wmax < 1e-8)
    std::fill(rs.weights.begin(), rs.weights.end(), 1.0);
  return rs;
}

void RelNormalizer::validate() const {
  if (box.empty()) throw ValidationError("normalizer: empty bounds");
  for (int a = 0; a < 3; ++a)
    if (box.hi[a] - box.lo[a] <= 0.0)
      throw ValidationError("normalizer: degenerate bounds on axis " + std::to_string(a));
  if (d_max <= 0.0) throw ValidationError("normalizer: d_max must be > 0");
}

Vec4 RelNormalizer::map(const Vec3& p, double d) const {
  Vec4 z;
  for (int a = 0; a < 3; ++a)
    z[a] = std::clamp((p[a] - box.lo[a]) / (box.hi[a] - box.lo[a]), 0.0, 1.0);
  z[3] = std::clamp((d + d_max) / (2.0 * d_max), 0.0, 1.0);
  return z;
}

void RelNormalizer::apply(RelativeSample& rs) const {
  rs.z.resize(rs.canonical.size());
  for (std::size_t i = 0; i < rs.canonical.size(); ++i)
    rs.z[i] = map(rs.canonical[i], rs.signed_d[i]);
}

Vec4 normalize_rep(const Vec3& canonical_point, double d, const Aabb& scene_bounds, double d_max) {
  RelNormalizer norm{scene_bounds, d_max};
  norm.validate();
  return norm.map(canonical_point, d);
}

int EncoderRef::feature_dim() const {
  switch (kind) {
    case EncoderKind::kHash: return grid->feature_dim();
    case EncoderKind::kVertexBaseline: return bank->cfg.feature_dim;
    case EncoderKind::kFrequency: return 8 * freq_bands;
  }
  return 0;
}

void blended_feature(const RelativeSample& rs, const EncoderRef& enc, std::span<double> out) {
  const int dim = enc.feature_dim();
  const double wsum = rs.weight_sum();
  std::fill(out.begin(), out.end(), 0.0);
  static thread_local std::vector<double> tmp;
  tmp.resize(dim);
  for (int i = 0; i < rs.k(); ++i) {
    switch (enc.kind) {
      case EncoderKind::kHash:
        encode(rs.z[i], *enc.grid, tmp);
        break;
      case EncoderKind::kFrequency:
        frequency_encode(rs.z[i], enc.freq_bands, tmp);
        break;
      case EncoderKind::kVertexBaseline: {
        auto f = enc.bank->feature(rs.indices[i], enc.bank->bin_of(rs.signed_d[i]));
        std::copy(f.begin(), f.end(), tmp.begin());
        break;
      }
    }
    const double w = rs.weights[i] / wsum;
    for (int j = 0; j < dim; ++j) out[j] += w * tmp[j];
  }
}

void blended_feature_backward(const RelativeSample& rs, const EncoderRef& enc,
                              std::span<const double> upstream, std::span<double> grad) {
  if (enc.kind == EncoderKind::kFrequency) return;  // no learnable storage
  const int dim = enc.feature_dim();
  const double wsum = rs.weight_sum();
  static thread_local std::vector<double> scaled;
  scaled.resize(dim);
  for (int i = 0; i < rs.k(); ++i) {
    const double w = rs.weights[i] / wsum;
    if (w == 0.0) continue;
    for (int j = 0; j < dim; ++j) scaled[j] = w * upstream[j];
    if (enc.kind == EncoderKind::kHash) {
      encode_backward(rs.z[i], *enc.grid, scaled, grad);
    } else {
      double* g = grad.data() + enc.bank->offset(rs.indices[i], enc.bank->bin_of(rs.signed_d[i]));
      for (int j = 0; j < dim; ++j) g[j] += scaled[j];
    }
  }
}

void rel_feature(const Vec3& x, const SurfaceFrame& frame, const KnnIndex& index,
                 const CanonicalSurface& canonical, int k, const RelNormalizer& norm,
                 const HashGrid& grid, std::span<double> out) {
  RelativeSample rs = relative_set(x, frame, index, canonical, k);
  norm.apply(rs);
  EncoderRef enc{EncoderKind::kHash, &grid, nullptr, 0};
  blended_feature(rs, enc, out);
}

void vertex_baseline_encode(const Vec3& x, const SurfaceFrame& frame, const KnnIndex& index,
                            int k, const VertexBank& bank, std::span<double> out) {
  CanonicalSurface dummy;
  dummy.points = frame.points;  // anchors unused by the bank route
  RelativeSample rs = relative_set(x, frame, index, dummy, k);
  EncoderRef enc{EncoderKind::kVertexBaseline, nullptr, &bank, 0};
  blended_feature(rs, enc, out);
}

}  // namespace selfnerf
