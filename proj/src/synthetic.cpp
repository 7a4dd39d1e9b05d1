// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <map>

#include "selfnerf/scene_io.hpp"

namespace selfnerf {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

/// Radial bump direction profile, |h| <= 1, polynomial in the unit direction
/// so poles need no special casing.
double bump(const Vec3& u) { return 2.0 * u[0] * u[2]; }
Vec3 bump_grad(const Vec3& u) { return Vec3(2.0 * u[2], 0.0, 2.0 * u[0]); }

/// Icosphere vertex directions with a deterministic order shared by every
/// frame; vertex i at frame t is always the same material point.
std::vector<Vec3> icosphere_directions(int subdivisions) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {
      {-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<std::array<int, 3>> f = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      int idx = static_cast<int>(v.size());
      v.push_back(((v[a] + v[b]) * 0.5).normalized());
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(4 * f.size());
    for (const auto& tri : f) {
      int a = mid(tri[0], tri[1]);
      int b = mid(tri[1], tri[2]);
      int c = mid(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  return v;
}

Camera look_at_camera(const Vec3& pos, const Vec3& target, double focal, int w, int h) {
  Vec3 fwd = (target - pos).normalized();
  Vec3 right = fwd.cross(Vec3(0, 0, 1)).normalized();
  Vec3 down = fwd.cross(right);
  Camera cam;
  cam.R.row(0) = right.transpose();
  cam.R.row(1) = down.transpose();
  cam.R.row(2) = fwd.transpose();
  cam.t = -cam.R * pos;
  cam.K << focal, 0, 0.5 * w, 0, focal, 0.5 * h, 0, 0, 1;
  cam.width = w;
  cam.height = h;
  return cam;
}

}  // namespace

void SyntheticSceneConfig::validate() const {
  if (width < 8 || height < 8) throw ValidationError("synthetic scene: image too small");
  if (frame_count < 1) throw ValidationError("synthetic scene: frame_count must be >= 1");
  if (sphere_radius <= 0.0) throw ValidationError("synthetic scene: radius must be > 0");
  if (deform_amplitude < 0.0 || deform_amplitude >= 0.9)
    throw ValidationError("synthetic scene: amplitude must be in [0, 0.9) to stay star-shaped");
  if (icosphere_subdiv < 0 || icosphere_subdiv > 6)
    throw ValidationError("synthetic scene: icosphere_subdiv out of range");
  if (camera_radius <= sphere_radius * (1.0 + deform_amplitude))
    throw ValidationError("synthetic scene: camera inside the surface");
  if (texture != "checker" && texture != "gradient" && texture != "checker-gradient")
    throw ValidationError("synthetic scene: unknown texture '" + texture + "'");
}

SyntheticOracle::SyntheticOracle(const SyntheticSceneConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  dirs_ = icosphere_directions(cfg_.icosphere_subdiv);
  focal_ = cfg_.focal > 0.0
               ? cfg_.focal
               : 0.62 * (0.5 * cfg_.width) * cfg_.camera_radius /
                     (cfg_.sphere_radius * (1.0 + cfg_.deform_amplitude));
}

double SyntheticOracle::deform_scale(int t) const {
  if (cfg_.frame_count <= 1) return 0.0;
  return std::sin(2.0 * kPi * t / cfg_.frame_count);
}

double SyntheticOracle::radius(const Vec3& u, int t) const {
  return cfg_.sphere_radius * (1.0 + cfg_.deform_amplitude * deform_scale(t) * bump(u));
}

Vec3 SyntheticOracle::surface_point(int vertex, int t) const {
  const Vec3& u = dirs_[vertex];
  return radius(u, t) * u;
}

Vec3 SyntheticOracle::pole_free_normal(const Vec3& u, int t) const {
  // Gradient of F(x) = |x| - r(x/|x|, t), evaluated on the surface.
  const double rho = radius(u, t);
  const double coef = cfg_.sphere_radius * cfg_.deform_amplitude * deform_scale(t) / rho;
  Vec3 g = bump_grad(u);
  Vec3 tangential = g - u.dot(g) * u;
  return (u - coef * tangential).normalized();
}

Vec3 SyntheticOracle::surface_normal(int vertex, int t) const {
  return pole_free_normal(dirs_[vertex], t);
}

Camera SyntheticOracle::training_camera(int t) const {
  double az = 2.0 * kPi * cfg_.orbit_fraction * t / cfg_.frame_count;
  return orbit_camera(az);
}

Camera SyntheticOracle::orbit_camera(double azimuth) const {
  double e = cfg_.camera_elevation;
  Vec3 pos = cfg_.camera_radius *
             Vec3(std::cos(e) * std::cos(azimuth), std::cos(e) * std::sin(azimuth), std::sin(e));
  return look_at_camera(pos, Vec3::Zero(), focal_, cfg_.width, cfg_.height);
}

bool SyntheticOracle::trace(const Ray& ray, int t, double& t_hit) const {
  // Bracket inside the outer bounding sphere, then march + bisect.
  const double r_outer = cfg_.sphere_radius * (1.0 + cfg_.deform_amplitude) * (1.0 + 1e-9);
  const double b = ray.origin.dot(ray.dir);
  const double c = ray.origin.squaredNorm() - r_outer * r_outer;
  const double disc = b * b - c;
  if (disc <= 0.0) return false;
  const double sq = std::sqrt(disc);
  double t0 = std::max(-b - sq, 0.0);
  double t1 = -b + sq;
  if (t1 <= t0) return false;

  auto f = [&](double tau) {
    Vec3 x = ray.origin + tau * ray.dir;
    double rho = x.norm();
    return rho - radius(x / rho, t);
  };

  constexpr int kSteps = 256;
  double prev_tau = t0;
  double prev_f = f(t0);
  for (int i = 1; i <= kSteps; ++i) {
    double tau = t0 + (t1 - t0) * i / kSteps;
    double fv = f(tau);
    if (prev_f > 0.0 && fv <= 0.0) {
      double lo = prev_tau, hi = tau;
      for (int it = 0; it < 80; ++it) {
        double mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) lo = mid;
        else hi = mid;
      }
      t_hit = 0.5 * (lo + hi);
      return true;
    }
    prev_tau = tau;
    prev_f = fv;
  }
  return false;
}

Vec3 SyntheticOracle::shade(const Vec3& x_surface) const {
  const Vec3 u = x_surface.normalized();
  const Vec3 gradient = Vec3(0.5, 0.5, 0.5) + 0.42 * u;
  const double theta = std::acos(std::clamp(u[2], -1.0, 1.0));
  const double phi = std::atan2(u[1], u[0]);
  const int cell = int(std::floor(6.0 * theta / kPi)) + int(std::floor(6.0 * (phi + kPi) / kPi));
  const bool odd = cell & 1;
  const Vec3 tone = odd ? Vec3(0.88, 0.82, 0.25) : Vec3(0.16, 0.24, 0.83);
  if (cfg_.texture == "gradient") return gradient;
  if (cfg_.texture == "checker") return tone;
  return 0.62 * gradient + 0.38 * tone;
}

void SyntheticOracle::render(const Camera& cam, int t, Image& rgb, Image& mask) const {
  rgb = Image(cam.width, cam.height, 3);
  mask = Image(cam.width, cam.height, 1);
  Rng noise(mix_seed(cfg_.seed, 0x6e6f6973ULL, std::uint64_t(t)));
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      Ray ray = generate_ray(cam, x, y);
      double t_hit;
      if (!trace(ray, t, t_hit)) continue;
      mask.at(x, y, 0) = 1.0;
      Vec3 color = shade(ray.origin + t_hit * ray.dir);
      if (cfg_.noise_level > 0.0)
        for (int ch = 0; ch < 3; ++ch) color[ch] += cfg_.noise_level * noise.normal();
      for (int ch = 0; ch < 3; ++ch) rgb.at(x, y, ch) = std::clamp(color[ch], 0.0, 1.0);
    }
  }
}

Vec3 SyntheticOracle::to_canonical(const Vec3& x, int t) const {
  double rho = x.norm();
  if (rho == 0.0) return x;
  Vec3 u = x / rho;
  return u * rho * (radius(u, 0) / radius(u, t));
}

SurfaceFrame SyntheticOracle::surface_frame(int t) const {
  SurfaceFrame fr;
  fr.frame_index = t;
  fr.points.resize(dirs_.size());
  fr.normals.resize(dirs_.size());
  for (std::size_t i = 0; i < dirs_.size(); ++i) {
    fr.points[i] = surface_point(static_cast<int>(i), t);
    fr.normals[i] = surface_normal(static_cast<int>(i), t);
  }
  return fr;
}

SyntheticOracle synthesize_scene(const SyntheticSceneConfig& cfg, const std::string& out_path) {
  SyntheticOracle oracle(cfg);
  const fs::path root(out_path);
  fs::create_directories(root / "frames");
  fs::create_directories(root / "masks");
  fs::create_directories(root / "surface");

  std::vector<Camera> cams;
  for (int t = 0; t < cfg.frame_count; ++t) {
    char name[16];
    std::snprintf(name, sizeof(name), "%04d", t);
    Camera cam = oracle.training_camera(t);
    cams.push_back(cam);

    Image rgb, mask;
    oracle.render(cam, t, rgb, mask);
    bool any = false;
    for (double v : mask.data) any = any || v != 0.0;
    if (!any) throw ValidationError("synthetic scene: surface not visible at frame " + std::to_string(t));
    save_png((root / "frames" / (std::string(name) + ".png")).string(), rgb);
    save_png((root / "masks" / (std::string(name) + ".png")).string(), mask);

    SurfaceFrame fr = oracle.surface_frame(t);
    save_ply((root / "surface" / (std::string(name) + ".ply")).string(), fr.points, fr.normals);
    if (t == 0)
      save_ply((root / "canonical.ply").string(), fr.points, fr.normals);
  }
  write_cameras_json((root / "cameras.json").string(), cams, DatasetMetadata{});
  return oracle;
}

}  // namespace selfnerf
