// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#include "selfnerf/scene_io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "selfnerf/rng.hpp"

using namespace selfnerf;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("selfnerf_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SyntheticSceneConfig tiny_scene() {
  SyntheticSceneConfig cfg;
  cfg.width = 40;
  cfg.height = 40;
  cfg.frame_count = 3;
  cfg.icosphere_subdiv = 2;  // 162 vertices
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("ply round trip preserves points and normals") {
  fs::path dir = temp_dir("ply");
  Rng rng(3);
  std::vector<Vec3> pts(64), nrm(64);
  for (int i = 0; i < 64; ++i) {
    pts[i] = Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    nrm[i] = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
  }
  std::string path = (dir / "cloud.ply").string();
  save_ply(path, pts, nrm);
  std::vector<Vec3> rpts, rnrm;
  load_ply(path, rpts, rnrm);
  REQUIRE(rpts.size() == 64);
  for (int i = 0; i < 64; ++i) {
    CHECK((rpts[i] - pts[i]).norm() <= 1e-6);  // f32 quantization
    CHECK((rnrm[i] - nrm[i]).norm() <= 1e-6);
  }
}

TEST_CASE("ply reader accepts ascii and rejects malformed files") {
  fs::path dir = temp_dir("ply_ascii");
  {
    std::ofstream out(dir / "a.ply");
    out << "ply\nformat ascii 1.0\nelement vertex 2\n"
        << "property float x\nproperty float y\nproperty float z\n"
        << "property float nx\nproperty float ny\nproperty float nz\n"
        << "end_header\n"
        << "0 0 0 0 0 1\n1 2 3 1 0 0\n";
  }
  std::vector<Vec3> pts, nrm;
  load_ply((dir / "a.ply").string(), pts, nrm);
  REQUIRE(pts.size() == 2);
  CHECK(pts[1] == Vec3(1, 2, 3));
  CHECK(nrm[0] == Vec3(0, 0, 1));

  {
    std::ofstream out(dir / "b.ply");
    out << "ply\nformat ascii 1.0\nelement vertex 1\n"
        << "property float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n";
  }
  CHECK_THROWS_AS(load_ply((dir / "b.ply").string(), pts, nrm), ValidationError);
  CHECK_THROWS_AS(load_ply((dir / "missing.ply").string(), pts, nrm), ValidationError);
}

TEST_CASE("mask_bbox finds the tight support rectangle") {
  Image mask(32, 20, 1);
  CHECK_THROWS_AS(mask_bbox(mask), ValidationError);  // empty

  std::fill(mask.data.begin(), mask.data.end(), 1.0);
  PixelRect full = mask_bbox(mask);
  CHECK(full.x0 == 0);
  CHECK(full.y0 == 0);
  CHECK(full.x1 == 31);
  CHECK(full.y1 == 19);

  Image single(32, 25, 1);
  single.at(10, 20, 0) = 1.0;
  PixelRect r = mask_bbox(single);
  CHECK(r.x0 == 10);
  CHECK(r.x1 == 10);
  CHECK(r.y0 == 20);
  CHECK(r.y1 == 20);

  Image two(16, 16, 1);
  two.at(0, 0, 0) = 1.0;
  two.at(5, 7, 0) = 1.0;
  r = mask_bbox(two);
  CHECK(r.x0 == 0);
  CHECK(r.y0 == 0);
  CHECK(r.x1 == 5);
  CHECK(r.y1 == 7);
}

TEST_CASE("synthetic vertices follow the closed-form deformation") {
  SyntheticSceneConfig cfg = tiny_scene();
  SyntheticOracle oracle(cfg);
  const auto& dirs = oracle.directions();
  REQUIRE(dirs.size() == 162);
  for (int t = 0; t < cfg.frame_count; ++t) {
    double s = std::sin(2.0 * 3.14159265358979323846 * t / cfg.frame_count);
    for (int i = 0; i < 162; i += 7) {
      const Vec3& u = dirs[i];
      double r = cfg.sphere_radius * (1.0 + cfg.deform_amplitude * s * (2.0 * u[0] * u[2]));
      Vec3 expected = r * u;
      CHECK((oracle.surface_point(i, t) - expected).norm() <= 1e-12);
    }
  }
}

TEST_CASE("zero amplitude keeps every frame equal to the canonical surface") {
  SyntheticSceneConfig cfg = tiny_scene();
  cfg.deform_amplitude = 0.0;
  SyntheticOracle oracle(cfg);
  SurfaceFrame f0 = oracle.surface_frame(0);
  for (int t = 1; t < cfg.frame_count; ++t) {
    SurfaceFrame ft = oracle.surface_frame(t);
    for (std::size_t i = 0; i < f0.points.size(); ++i) {
      CHECK(f0.points[i] == ft.points[i]);
      CHECK(f0.normals[i] == ft.normals[i]);
    }
  }
}

TEST_CASE("surface normals agree with a numerical gradient") {
  SyntheticSceneConfig cfg = tiny_scene();
  SyntheticOracle oracle(cfg);
  const int t = 1;
  auto f = [&](const Vec3& x) { return x.norm() - oracle.radius(x.normalized(), t); };
  for (int i = 0; i < 162; i += 13) {
    Vec3 x = oracle.surface_point(i, t);
    Vec3 n = oracle.surface_normal(i, t);
    CHECK(n.norm() == doctest::Approx(1.0).epsilon(1e-9));
    Vec3 num;
    const double h = 1e-7;
    for (int a = 0; a < 3; ++a) {
      Vec3 dx = Vec3::Zero();
      dx[a] = h;
      num[a] = (f(x + dx) - f(x - dx)) / (2 * h);
    }
    num.normalize();
    CHECK((n - num).norm() <= 1e-5);
  }
}

TEST_CASE("mask is set exactly where the traced ray hits") {
  SyntheticSceneConfig cfg = tiny_scene();
  SyntheticOracle oracle(cfg);
  Camera cam = oracle.training_camera(1);
  Image rgb, mask;
  oracle.render(cam, 1, rgb, mask);
  int hits = 0;
  for (int y = 0; y < cfg.height; ++y)
    for (int x = 0; x < cfg.width; ++x) {
      double t_hit;
      bool hit = oracle.trace(generate_ray(cam, x, y), 1, t_hit);
      CHECK(mask.at(x, y, 0) == (hit ? 1.0 : 0.0));
      hits += hit;
    }
  CHECK(hits > 50);  // the sphere is visible
}

TEST_CASE("synthesize -> load round trip validates and is repeatable") {
  fs::path dir = temp_dir("scene");
  SyntheticSceneConfig cfg = tiny_scene();
  synthesize_scene(cfg, dir.string());

  Dataset a = load_dataset(dir.string());
  Dataset b = load_dataset(dir.string());
  REQUIRE(a.frames.size() == 3);
  CHECK(a.vertex_count() == 162);
  CHECK(a.width() == 40);

  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    CHECK(a.frames[t].image.data == b.frames[t].image.data);
    CHECK(a.frames[t].mask.data == b.frames[t].mask.data);
    CHECK(a.frames[t].surface.points == b.frames[t].surface.points);
    a.frames[t].surface.validate();
    a.frames[t].camera.validate();
    for (double v : a.frames[t].mask.data) CHECK((v == 0.0 || v == 1.0));
  }
  // fixed correspondence: same vertex count everywhere
  for (const auto& f : a.frames) CHECK(f.surface.points.size() == a.vertex_count());
}

TEST_CASE("oracle re-render reproduces the stored images bit-exactly") {
  fs::path dir = temp_dir("scene_oracle");
  SyntheticSceneConfig cfg = tiny_scene();
  SyntheticOracle oracle = synthesize_scene(cfg, dir.string());
  Dataset ds = load_dataset(dir.string());

  for (int t = 0; t < cfg.frame_count; ++t) {
    Image rgb, mask;
    oracle.render(oracle.training_camera(t), t, rgb, mask);
    // stored images are 8-bit; compare at stored precision
    fs::path tmp = dir / "roundtrip.png";
    save_png(tmp.string(), rgb);
    Image re = load_png(tmp.string());
    CHECK(re.data == ds.frames[t].image.data);
    save_png(tmp.string(), mask);
    re = load_png(tmp.string());
    CHECK(re.data == ds.frames[t].mask.data);
  }
}

TEST_CASE("loader reports distinct, frame-indexed validation errors") {
  SyntheticSceneConfig cfg = tiny_scene();

  SUBCASE("vertex-count mismatch") {
    fs::path dir = temp_dir("scene_badvtx");
    SyntheticOracle oracle = synthesize_scene(cfg, dir.string());
    SurfaceFrame f = oracle.surface_frame(2);
    f.points.pop_back();
    f.normals.pop_back();
    save_ply((dir / "surface" / "0002.ply").string(), f.points, f.normals);
    CHECK_THROWS_WITH_AS(load_dataset(dir.string()), "vertex-count mismatch at frame 2",
                         ValidationError);
  }

  SUBCASE("missing frame image") {
    fs::path dir = temp_dir("scene_missing");
    synthesize_scene(cfg, dir.string());
    fs::remove(dir / "frames" / "0001.png");
    CHECK_THROWS_AS(load_dataset(dir.string()), ValidationError);
  }

  SUBCASE("size mismatch") {
    fs::path dir = temp_dir("scene_badsize");
    synthesize_scene(cfg, dir.string());
    Image small(8, 8, 3);
    save_png((dir / "frames" / "0001.png").string(), small);
    CHECK_THROWS_WITH_AS(load_dataset(dir.string()), "size mismatch at frame 1", ValidationError);
  }

  SUBCASE("gray mask with soft values binarizes at 0.5") {
    fs::path dir = temp_dir("scene_softmask");
    synthesize_scene(cfg, dir.string());
    Image soft = load_png((dir / "masks" / "0000.png").string());
    for (double& v : soft.data) v = v > 0.5 ? 0.8 : 0.3;
    save_png((dir / "masks" / "0000.png").string(), soft);
    Dataset ds = load_dataset(dir.string());
    for (double v : ds.frames[0].mask.data) CHECK((v == 0.0 || v == 1.0));
  }

  SUBCASE("non-orthonormal rotation") {
    fs::path dir = temp_dir("scene_badrot");
    synthesize_scene(cfg, dir.string());
    Dataset ds = load_dataset(dir.string());
    std::vector<Camera> cams;
    for (auto& f : ds.frames) cams.push_back(f.camera);
    cams[1].R *= 1.1;
    write_cameras_json((dir / "cameras.json").string(), cams, ds.metadata);
    CHECK_THROWS_WITH_AS(load_dataset(dir.string()),
                         "camera: non-orthonormal rotation at frame 1", ValidationError);
  }
}

TEST_CASE("non-rigid correspondence holds approximately at small amplitude") {
  SyntheticSceneConfig cfg = tiny_scene();
  cfg.deform_amplitude = 0.03;
  SyntheticOracle oracle(cfg);
  SurfaceFrame f0 = oracle.surface_frame(0);
  SurfaceFrame f1 = oracle.surface_frame(1);
  CanonicalSurface canonical{f0.points};
  KnnIndex idx0(f0.points);
  KnnIndex idx1(f1.points);

  Rng rng(19);
  double worst_d = 0.0;
  int anchor_agree = 0, anchor_total = 0;
  for (int trial = 0; trial < 200; ++trial) {
    // near-surface query at frame 1
    Vec3 u = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    double rho = oracle.radius(u, 1) + rng.uniform(-0.05, 0.05);
    Vec3 x1 = rho * u;
    Vec3 x0 = oracle.to_canonical(x1, 1);

    RelativeSample a = relative_set(x1, f1, idx1, canonical, 3);
    RelativeSample b = relative_set(x0, f0, idx0, canonical, 3);
    for (int i = 0; i < 3; ++i) {
      // distance magnitudes; signs flip only at near-tangent geometry,
      // which the blend weights suppress
      worst_d = std::max(worst_d, std::abs(std::abs(a.signed_d[i]) - std::abs(b.signed_d[i])));
      anchor_total++;
      for (int j = 0; j < 3; ++j) anchor_agree += a.indices[i] == b.indices[j];
    }
  }
  CHECK(worst_d <= 0.03 * cfg.sphere_radius);
  CHECK(anchor_agree >= int(0.95 * anchor_total));
}
