// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#include "selfnerf/surface_relative.hpp"

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "selfnerf/rng.hpp"

using namespace selfnerf;

namespace {

std::vector<Vec3> random_points(int n, Rng& rng, double scale = 1.0) {
  std::vector<Vec3> pts(n);
  for (auto& p : pts)
    p = scale * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  return pts;
}

SurfaceFrame random_frame(int n, Rng& rng) {
  SurfaceFrame f;
  f.points = random_points(n, rng);
  f.normals.resize(n);
  for (auto& nv : f.normals) {
    Vec3 v(rng.normal(), rng.normal(), rng.normal());
    nv = v.normalized();
  }
  return f;
}

/// Brute-force oracle: sort every candidate by (squared distance, index).
void brute_knn(const std::vector<Vec3>& pts, const Vec3& q, int k, std::vector<int>& idx,
               std::vector<double>& dist) {
  std::vector<std::pair<double, int>> all(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    all[i] = {(q - pts[i]).squaredNorm(), static_cast<int>(i)};
  std::sort(all.begin(), all.end());
  idx.resize(k);
  dist.resize(k);
  for (int i = 0; i < k; ++i) {
    idx[i] = all[i].second;
    dist[i] = std::sqrt(all[i].first);
  }
}

/// Random rotation from a normalized quaternion.
Mat3 random_rotation(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace

TEST_CASE("knn index handles the degenerate cases") {
  Rng rng(1);
  std::vector<Vec3> one = {Vec3(0.5, -0.25, 1.0)};
  KnnIndex index(one);
  std::vector<int> idx;
  std::vector<double> dist;
  index.query(Vec3(3, 3, 3), 1, idx, dist);
  CHECK(idx[0] == 0);

  index.query(one[0], 1, idx, dist);
  CHECK(dist[0] == 0.0);

  CHECK_THROWS_AS(index.query(Vec3::Zero(), 2, idx, dist), ValidationError);
  CHECK_THROWS_AS(KnnIndex(std::vector<Vec3>{}), ValidationError);
}

TEST_CASE("knn index matches the brute-force oracle exactly") {
  Rng rng(99);
  for (int config = 0; config < 20; ++config) {
    int m = 50 + int(rng.below(450));
    std::vector<Vec3> pts = random_points(m, rng);
    KnnIndex index(pts);
    int k = 1 + int(rng.below(8));
    std::vector<int> idx, bidx;
    std::vector<double> dist, bdist;
    for (int q = 0; q < 25; ++q) {
      Vec3 query(rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2));
      index.query(query, k, idx, dist);
      brute_knn(pts, query, k, bidx, bdist);
      CHECK(idx == bidx);
      CHECK(dist == bdist);
    }
  }
}

TEST_CASE("knn ties resolve to the lower vertex index") {
  // grid of duplicated distances: 8 points on a cube around the origin
  std::vector<Vec3> pts;
  for (int s = 0; s < 8; ++s)
    pts.emplace_back(s & 1 ? 1 : -1, s & 2 ? 1 : -1, s & 4 ? 1 : -1);
  // duplicate point to force an exact tie at rank 1
  pts.push_back(pts[3]);
  KnnIndex index(pts);
  std::vector<int> idx;
  std::vector<double> dist;
  index.query(pts[3], 2, idx, dist);
  CHECK(idx[0] == 3);
  CHECK(idx[1] == 8);
  CHECK(dist[0] == 0.0);
  CHECK(dist[1] == 0.0);

  std::vector<int> bidx;
  std::vector<double> bdist;
  brute_knn(pts, Vec3::Zero(), 8, bidx, bdist);
  index.query(Vec3::Zero(), 8, idx, dist);
  CHECK(idx == bidx);  // all equidistant: pure index order
}

TEST_CASE("signed distance: magnitude exact, sign from the normal side") {
  Vec3 p(0.2, -0.1, 0.4);
  Vec3 n = Vec3(1, 2, -1).normalized();
  CHECK(signed_distance(p, p, n) == 0.0);
  CHECK(signed_distance(p + 0.5 * n, p, n) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(signed_distance(p - 0.5 * n, p, n) == doctest::Approx(-0.5).epsilon(1e-15));

  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    Vec3 x(rng.normal(), rng.normal(), rng.normal());
    double d = signed_distance(x, p, n);
    CHECK(std::abs(d) == (x - p).norm());
    // mirroring through the tangent plane flips the sign
    Vec3 delta = x - p;
    Vec3 mirrored = p + delta - 2.0 * delta.dot(n) * n;
    if (std::abs(delta.dot(n)) > 1e-12)
      CHECK(signed_distance(mirrored, p, n) == doctest::Approx(-d).epsilon(1e-9));
  }
}

TEST_CASE("blend weight is |cos| with the degenerate point rule") {
  Vec3 p(0.0, 0.0, 0.0);
  Vec3 n(0, 0, 1);
  CHECK(blend_weight(p + Vec3(0, 0, 2.5), p, n) == doctest::Approx(1.0));
  CHECK(blend_weight(p + Vec3(1.5, 0, 0), p, n) == doctest::Approx(0.0));
  CHECK(blend_weight(p, p, n) == 1.0);
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    Vec3 x(rng.normal(), rng.normal(), rng.normal());
    double w = blend_weight(x, p, n);
    CHECK(w >= 0.0);
    CHECK(w <= 1.0);
  }
}

TEST_CASE("relative_set pairs canonical anchors with current-frame distances") {
  Rng rng(15);
  SurfaceFrame frame = random_frame(200, rng);
  frame.frame_index = 0;
  CanonicalSurface canonical{frame.points};
  KnnIndex index(frame.points);

  SUBCASE("identity frame returns the knn points themselves") {
    Vec3 x(0.1, 0.2, -0.3);
    RelativeSample rs = relative_set(x, frame, index, canonical, 4);
    for (int i = 0; i < rs.k(); ++i) {
      CHECK(rs.canonical[i] == frame.points[rs.indices[i]]);
      CHECK(std::abs(rs.signed_d[i]) == doctest::Approx((x - frame.points[rs.indices[i]]).norm()));
    }
    for (int i = 0; i + 1 < rs.k(); ++i)
      CHECK(std::abs(rs.signed_d[i]) <= std::abs(rs.signed_d[i + 1]));
  }

  SUBCASE("k = 1 on the outward normal of an isolated vertex") {
    SurfaceFrame lone;
    lone.points = {Vec3(0.3, 0.4, 0.5), Vec3(10, 10, 10)};
    lone.normals = {Vec3(0, 0, 1), Vec3(1, 0, 0)};
    CanonicalSurface lone_c{lone.points};
    KnnIndex lone_idx(lone.points);
    Vec3 x = lone.points[0] + 0.3 * lone.normals[0];
    RelativeSample rs = relative_set(x, lone, lone_idx, lone_c, 1);
    CHECK(rs.indices[0] == 0);
    CHECK(rs.signed_d[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(rs.weights[0] == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("weights fall in [0,1] and the degenerate rule leaves support") {
    for (int i = 0; i < 100; ++i) {
      Vec3 x(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      RelativeSample rs = relative_set(x, frame, index, canonical, 4);
      double wmax = 0.0;
      for (double w : rs.weights) {
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
        wmax = std::max(wmax, w);
      }
      CHECK(wmax > 0.0);
    }
  }
}

TEST_CASE("rigid motions leave the relative sample unchanged") {
  Rng rng(21);
  SurfaceFrame frame = random_frame(500, rng);
  CanonicalSurface canonical{frame.points};
  KnnIndex index(frame.points);

  for (int trial = 0; trial < 20; ++trial) {
    Mat3 R = random_rotation(rng);
    Vec3 tau(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));

    SurfaceFrame moved;
    moved.frame_index = 1;
    moved.points.resize(frame.points.size());
    moved.normals.resize(frame.normals.size());
    for (std::size_t i = 0; i < frame.points.size(); ++i) {
      moved.points[i] = R * frame.points[i] + tau;
      moved.normals[i] = R * frame.normals[i];
    }
    KnnIndex moved_index(moved.points);

    for (int q = 0; q < 5; ++q) {
      Vec3 x(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      RelativeSample a = relative_set(x, frame, index, canonical, 4);
      RelativeSample b = relative_set(R * x + tau, moved, moved_index, canonical, 4);
      REQUIRE(a.indices == b.indices);
      for (int i = 0; i < a.k(); ++i) {
        CHECK(a.canonical[i] == b.canonical[i]);
        CHECK(a.signed_d[i] == doctest::Approx(b.signed_d[i]).epsilon(1e-5));
        CHECK(a.weights[i] == doctest::Approx(b.weights[i]).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("locality: vertices outside the knn set do not matter") {
  Rng rng(33);
  SurfaceFrame frame = random_frame(300, rng);
  CanonicalSurface canonical{frame.points};
  KnnIndex index(frame.points);
  Vec3 x(0.05, -0.1, 0.2);
  RelativeSample before = relative_set(x, frame, index, canonical, 4);

  // push the farthest vertex even farther
  int far_idx = 0;
  double far_d = -1.0;
  for (std::size_t i = 0; i < frame.points.size(); ++i) {
    double d = (frame.points[i] - x).norm();
    if (d > far_d) {
      far_d = d;
      far_idx = static_cast<int>(i);
    }
  }
  SurfaceFrame moved = frame;
  moved.points[far_idx] += Vec3(5, 5, 5);
  KnnIndex moved_index(moved.points);
  RelativeSample after = relative_set(x, moved, moved_index, canonical, 4);
  CHECK(before.indices == after.indices);
  CHECK(before.signed_d == after.signed_d);
  CHECK(before.weights == after.weights);
}

TEST_CASE("normalize_rep maps the box and distance range onto [0,1]^4") {
  Aabb box{Vec3(-1, -2, -3), Vec3(1, 2, 3)};
  double d_max = 0.5;

  Vec4 z = normalize_rep(box.lo, -d_max, box, d_max);
  CHECK(z.isApprox(Vec4(0, 0, 0, 0)));
  z = normalize_rep(box.center(), 0.0, box, d_max);
  CHECK(z.isApprox(Vec4(0.5, 0.5, 0.5, 0.5)));
  z = normalize_rep(box.center(), 2.0 * d_max, box, d_max);
  CHECK(z[3] == 1.0);  // clamps

  Aabb degenerate{Vec3(0, 0, 0), Vec3(1, 0, 1)};
  CHECK_THROWS_AS(normalize_rep(Vec3::Zero(), 0.0, degenerate, d_max), ValidationError);
}

TEST_CASE("rel_feature blends per-neighbor encodings convexly") {
  Rng rng(55);
  SurfaceFrame frame = random_frame(120, rng);
  CanonicalSurface canonical{frame.points};
  KnnIndex index(frame.points);

  HashGridConfig gcfg;
  gcfg.levels = 3;
  gcfg.features = 2;
  gcfg.table_size = 256;
  gcfg.n_min = 4;
  gcfg.n_max = 16;
  HashGrid grid = make_hash_grid(gcfg, 2);
  for (double& v : grid.data) v *= 1e4;

  RelNormalizer norm;
  norm.box = Aabb{Vec3(-1.5, -1.5, -1.5), Vec3(1.5, 1.5, 1.5)};
  norm.d_max = 0.5;

  SUBCASE("k = 1 equals the plain encoding of the single neighbor") {
    Vec3 x(0.2, 0.1, 0.0);
    RelativeSample rs = relative_set(x, frame, index, canonical, 1);
    norm.apply(rs);
    std::vector<double> expected(grid.feature_dim());
    encode(rs.z[0], grid, expected);
    std::vector<double> got(grid.feature_dim());
    rel_feature(x, frame, index, canonical, 1, norm, grid, got);
    CHECK(got == expected);
  }

  SUBCASE("equal encodings pass through regardless of weights") {
    HashGrid constant = grid;
    std::fill(constant.data.begin(), constant.data.end(), -1.75);
    std::vector<double> got(grid.feature_dim());
    rel_feature(Vec3(0.3, -0.2, 0.5), frame, index, canonical, 4, norm, constant, got);
    for (double v : got) CHECK(v == doctest::Approx(-1.75).epsilon(1e-12));
  }

  SUBCASE("rigidly co-moving query and surface produce identical features") {
    Mat3 R = random_rotation(rng);
    Vec3 tau(0.4, -0.7, 0.2);
    SurfaceFrame moved;
    moved.points.resize(frame.points.size());
    moved.normals.resize(frame.normals.size());
    for (std::size_t i = 0; i < frame.points.size(); ++i) {
      moved.points[i] = R * frame.points[i] + tau;
      moved.normals[i] = R * frame.normals[i];
    }
    KnnIndex moved_index(moved.points);
    std::vector<double> a(grid.feature_dim()), b(grid.feature_dim());
    for (int q = 0; q < 20; ++q) {
      Vec3 x(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      rel_feature(x, frame, index, canonical, 4, norm, grid, a);
      rel_feature(R * x + tau, moved, moved_index, canonical, 4, norm, grid, b);
      for (int j = 0; j < grid.feature_dim(); ++j)
        CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-5));
    }
  }
}

TEST_CASE("vertex baseline encode returns bank features") {
  SurfaceFrame frame;
  frame.points = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  frame.normals = {Vec3(0, 0, 1), Vec3(0, 0, 1), Vec3(0, 0, 1)};
  KnnIndex index(frame.points);

  VertexBankConfig bcfg;
  bcfg.num_vertices = 3;
  bcfg.half_bins = 8;
  bcfg.feature_dim = 4;
  bcfg.d_max = 0.5;
  VertexBank bank = make_vertex_bank(bcfg, 5);

  SUBCASE("query on a vertex with k = 1 hits that vertex's bin-0 feature") {
    std::vector<double> out(4);
    vertex_baseline_encode(frame.points[1], frame, index, 1, bank, out);
    auto expected = bank.feature(1, 0);
    for (int j = 0; j < 4; ++j) CHECK(out[j] == expected[j]);
  }

  SUBCASE("constant bank passes through the blend") {
    std::fill(bank.data.begin(), bank.data.end(), 0.42);
    std::vector<double> out(4);
    vertex_baseline_encode(Vec3(0.4, 0.3, 0.7), frame, index, 3, bank, out);
    for (double v : out) CHECK(v == doctest::Approx(0.42).epsilon(1e-12));
  }

  SUBCASE("equidistant candidates use the index tie-break deterministically") {
    // query equidistant from vertices 1 and 2, closer than to vertex 0
    Vec3 x(0.6, 0.6, 0.0);
    std::vector<double> a(4), b(4);
    vertex_baseline_encode(x, frame, index, 1, bank, a);
    vertex_baseline_encode(x, frame, index, 1, bank, b);
    CHECK(a == b);
    RelativeSample rs = relative_set(x, frame, index, CanonicalSurface{frame.points}, 1);
    CHECK(rs.indices[0] == 1);  // lower index of the tied pair
  }
}
