// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "selfnerf/common.hpp"
#include "selfnerf/image.hpp"
#include "selfnerf/surface_relative.hpp"
#include "selfnerf/volume_renderer.hpp"

namespace selfnerf {

/// Tight bounding rectangle of the mask's support. Empty mask is an error.
PixelRect mask_bbox(const Image& mask);

struct DatasetFrame {
  Image image;        // H x W x 3 in [0,1]
  Image mask;         // H x W x 1, values exactly 0 or 1
  Camera camera;
  SurfaceFrame surface;
};

struct DatasetMetadata {
  std::string units = "scene";
  double frame_rate = 30.0;
};

/// On-disk layout: frames/%04d.png, masks/%04d.png, cameras.json,
/// surface/%04d.ply, canonical.ply.
struct Dataset {
  std::vector<DatasetFrame> frames;
  CanonicalSurface canonical;
  DatasetMetadata metadata;

  int width() const { return frames.empty() ? 0 : frames[0].image.width; }
  int height() const { return frames.empty() ? 0 : frames[0].image.height; }
  std::size_t vertex_count() const { return canonical.points.size(); }
  Aabb canonical_bounds() const;
};

/// Loads and eagerly validates a dataset directory. Every violated invariant
/// raises a ValidationError naming the frame.
Dataset load_dataset(const std::string& path);

/// Point cloud with normals. Binary little-endian by default; the reader also
/// accepts ASCII. Properties per vertex: x y z nx ny nz (float or double).
void save_ply(const std::string& path, const std::vector<Vec3>& points,
              const std::vector<Vec3>& normals);
void load_ply(const std::string& path, std::vector<Vec3>& points, std::vector<Vec3>& normals);

void write_cameras_json(const std::string& path, const std::vector<Camera>& cams,
                        const DatasetMetadata& meta);

/// Deforming textured sphere rendered by exact analytic ray tracing.
/// Deformation is a radial harmonic r(u, t) = R (1 + A s(t) h(u)) with
/// h(u) = 2 u_x u_z, which keeps the surface star-shaped for A < 1 and
/// makes normals and per-vertex trajectories closed-form.
struct SyntheticSceneConfig {
  int width = 96;
  int height = 96;
  int frame_count = 10;
  double sphere_radius = 0.35;
  double deform_amplitude = 0.25;     // A, relative radial amplitude
  std::string texture = "checker-gradient";  // checker | gradient | checker-gradient
  double camera_radius = 3.0;
  double camera_elevation = 0.15;     // radians above the equator
  double orbit_fraction = 1.0;        // fraction of a full turn over the sequence
  int icosphere_subdiv = 4;           // 4 -> 2562 vertices
  double noise_level = 0.0;           // stddev of per-pixel Gaussian noise
  double focal = 0.0;                 // pixels; 0 derives one from the geometry
  std::uint64_t seed = 1;

  void validate() const;
};

/// Ground-truth handle: can re-render any pose exactly and maps points
/// between frames through the radial material correspondence.
class SyntheticOracle {
 public:
  explicit SyntheticOracle(const SyntheticSceneConfig& cfg);

  const SyntheticSceneConfig& config() const { return cfg_; }
  int frame_count() const { return cfg_.frame_count; }

  double deform_scale(int t) const;                   // s(t)
  double radius(const Vec3& u, int t) const;          // r(u, t), u unit
  Vec3 surface_point(int vertex, int t) const;
  Vec3 surface_normal(int vertex, int t) const;
  const std::vector<Vec3>& directions() const { return dirs_; }

  Camera training_camera(int t) const;
  Camera orbit_camera(double azimuth) const;

  /// First surface hit along the ray, or false. Root-isolated by marching
  /// and then bisected to double precision.
  bool trace(const Ray& ray, int t, double& t_hit) const;

  Vec3 shade(const Vec3& x_surface) const;  // texture, anchored to direction
  void render(const Camera& cam, int t, Image& rgb, Image& mask) const;

  /// Radial material correspondence x (frame t) -> canonical frame.
  Vec3 to_canonical(const Vec3& x, int t) const;

  SurfaceFrame surface_frame(int t) const;

 private:
  Vec3 pole_free_normal(const Vec3& u, int t) const;
  SyntheticSceneConfig cfg_;
  std::vector<Vec3> dirs_;  // unit vertex directions, fixed order
  double focal_ = 0.0;
};

/// Writes the dataset to `out_path` and returns the oracle handle.
SyntheticOracle synthesize_scene(const SyntheticSceneConfig& cfg, const std::string& out_path);

}  // namespace selfnerf
