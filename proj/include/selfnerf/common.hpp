// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace selfnerf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

/// Input/config/dataset problems. CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values during optimization. CLI maps these to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void expand(const Vec3& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }

  bool empty() const { return (hi.array() < lo.array()).any(); }
  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 extent() const { return hi - lo; }
  double max_extent() const { return extent().maxCoeff(); }

  /// Box grown by `frac` of its extent on every side.
  Aabb dilated(double frac) const {
    Vec3 m = frac * extent();
    return Aabb{lo - m, hi + m};
  }

  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }

  /// Slab test. Returns false on a miss; otherwise [t_near, t_far] with
  /// t_near clamped to 0 (origin inside the box counts as a hit).
  bool intersect_ray(const Vec3& o, const Vec3& dir, double& t_near, double& t_far) const {
    double t0 = 0.0;
    double t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (dir[a] == 0.0) {
        if (o[a] < lo[a] || o[a] > hi[a]) return false;
        continue;
      }
      double inv = 1.0 / dir[a];
      double ta = (lo[a] - o[a]) * inv;
      double tb = (hi[a] - o[a]) * inv;
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return false;
    }
    t_near = t0;
    t_far = t1;
    return true;
  }
};

/// Worker count: SELFNERF_THREADS caps it, unset means hardware parallelism.
inline int worker_count() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("SELFNERF_THREADS")) {
    int cap = std::atoi(env);
    if (cap >= 1) return std::min(hw, cap);
  }
  return hw;
}

/// Runs fn(begin, end) over static contiguous chunks, one per worker.
/// Chunk boundaries depend only on (n, workers), so any accumulation that
/// is reduced in chunk order is reproducible for a fixed worker count.
template <typename Fn>
void parallel_chunks(std::size_t n, int workers, Fn&& fn) {
  if (n == 0) return;
  workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (workers == 1) {
    fn(0, std::size_t{0}, n);
    return;
  }
  std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    std::size_t b = std::min(n, w * chunk);
    std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, w, b, e] { fn(w, b, e); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace selfnerf
