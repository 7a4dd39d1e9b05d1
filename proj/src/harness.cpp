// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#include "selfnerf/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace selfnerf {

namespace fs = std::filesystem;
using nlohmann::json;

EvalReport evaluate(const Model& model, const Dataset& ds, const std::vector<FrameContext>& fctx,
                    const RenderConfig& rcfg, const std::vector<int>& frame_ids,
                    std::uint64_t seed) {
  EvalReport report;
  double psnr_sum = 0.0, ssim_sum = 0.0;
  for (int t : frame_ids) {
    if (t < 0 || t >= static_cast<int>(ds.frames.size()))
      throw ValidationError("evaluate: frame " + std::to_string(t) + " outside dataset");
    const DatasetFrame& fr = ds.frames[t];
    Image rendered = render_image(model, fctx[t], t, fr.camera, seed, rcfg);
    EvalFrame ef;
    ef.frame = t;
    ef.bbox = mask_bbox(fr.mask);
    ef.psnr = psnr(rendered, fr.image, ef.bbox);
    ef.ssim = ssim(rendered, fr.image, ef.bbox);
    psnr_sum += ef.psnr;
    ssim_sum += ef.ssim;
    report.frames.push_back(ef);
  }
  if (!report.frames.empty()) {
    report.mean_psnr = psnr_sum / report.frames.size();
    report.mean_ssim = ssim_sum / report.frames.size();
  }
  return report;
}

std::string format_eval_text(const EvalReport& r) {
  std::ostringstream out;
  out << "frame  psnr_db  ssim     bbox\n";
  char line[160];
  for (const EvalFrame& f : r.frames) {
    std::snprintf(line, sizeof(line), "%5d  %7.3f  %7.5f  [%d,%d]x[%d,%d]\n", f.frame, f.psnr,
                  f.ssim, f.bbox.x0, f.bbox.x1, f.bbox.y0, f.bbox.y1);
    out << line;
  }
  std::snprintf(line, sizeof(line), "mean   %7.3f  %7.5f\n", r.mean_psnr, r.mean_ssim);
  out << line;
  return out.str();
}

namespace {

json finite_or_string(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(v);
}

}  // namespace

void write_eval_json(const std::string& path, const EvalReport& r) {
  json doc;
  doc["frames"] = json::array();
  for (const EvalFrame& f : r.frames)
    doc["frames"].push_back({{"frame", f.frame},
                             {"psnr", finite_or_string(f.psnr)},
                             {"ssim", f.ssim},
                             {"bbox", {f.bbox.x0, f.bbox.y0, f.bbox.x1, f.bbox.y1}}});
  doc["mean_psnr"] = finite_or_string(r.mean_psnr);
  doc["mean_ssim"] = r.mean_ssim;
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for write: " + path);
  out << doc.dump(1) << "\n";
}

EncoderKind encoder_kind_from_string(const std::string& name) {
  if (name == "hash") return EncoderKind::kHash;
  if (name == "vertex-baseline") return EncoderKind::kVertexBaseline;
  if (name == "frequency-encoding" || name == "frequency") return EncoderKind::kFrequency;
  throw ValidationError("unknown encoder variant '" + name + "'");
}

std::string encoder_kind_to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::kHash: return "hash";
    case EncoderKind::kVertexBaseline: return "vertex-baseline";
    case EncoderKind::kFrequency: return "frequency-encoding";
  }
  return "hash";
}

namespace {

struct ProbePixel {
  int frame, px, py;
  Vec3 gt;
};

/// Fixed seeded probe set of in-mask pixels, shared across variants.
std::vector<ProbePixel> make_probe_set(const Dataset& ds, int count, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x70726f6265ULL));
  std::vector<std::vector<int>> in_mask(ds.frames.size());
  for (std::size_t t = 0; t < ds.frames.size(); ++t) {
    const Image& m = ds.frames[t].mask;
    for (int y = 0; y < m.height; ++y)
      for (int x = 0; x < m.width; ++x)
        if (m.at(x, y, 0) != 0.0) in_mask[t].push_back(y * m.width + x);
  }
  std::vector<ProbePixel> probes(count);
  for (auto& p : probes) {
    p.frame = static_cast<int>(rng.below(ds.frames.size()));
    int flat = in_mask[p.frame][rng.below(in_mask[p.frame].size())];
    p.px = flat % ds.width();
    p.py = flat / ds.width();
    const Image& img = ds.frames[p.frame].image;
    p.gt = Vec3(img.at(p.px, p.py, 0), img.at(p.px, p.py, 1), img.at(p.px, p.py, 2));
  }
  return probes;
}

double probe_psnr(const Model& model, const Dataset& ds, const std::vector<FrameContext>& fctx,
                  const RenderConfig& rcfg, const std::vector<ProbePixel>& probes,
                  std::uint64_t seed) {
  double se = 0.0;
  for (const ProbePixel& p : probes) {
    PixelRender pr = render_pixel(model, fctx[p.frame], p.frame, ds.frames[p.frame].camera, p.px,
                                  p.py, 1 << 30, seed, rcfg);
    se += (pr.color - p.gt).squaredNorm();
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(double(probes.size() * 3) / se);
}

}  // namespace

AblationCurve ablation_run(const Dataset& ds, EncoderKind variant, const AblationConfig& cfg) {
  Model model = make_model(ds, variant, cfg.grid, cfg.bank, cfg.field, cfg.knn_k,
                           cfg.render.box_dilation, cfg.train.seed);
  TrainConfig tc = cfg.train;
  tc.iterations = cfg.budget_iters;
  tc.checkpoint_every = 0;

  TrainLoop loop(ds, model, tc, cfg.render);
  std::vector<ProbePixel> probes = make_probe_set(ds, cfg.psnr_probe_pixels, cfg.train.seed);

  AblationCurve curve;
  curve.variant = encoder_kind_to_string(variant);
  for (int i = 0; i < cfg.budget_iters; ++i) {
    LossReport report = loop.step();
    if ((i + 1) % cfg.cadence == 0 || i + 1 == cfg.budget_iters) {
      AblationPoint pt;
      pt.step = i + 1;
      pt.loss = report;
      pt.train_psnr = probe_psnr(model, ds, loop.frames(), cfg.render, probes, cfg.train.seed);
      curve.points.push_back(pt);
    }
  }
  return curve;
}

void write_curves_csv(const std::string& path, const std::vector<AblationCurve>& curves) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for write: " + path);
  out << "variant,step,rgb,mask,dist,geo,total,train_psnr\n";
  char line[320];
  for (const AblationCurve& c : curves)
    for (const AblationPoint& p : c.points) {
      std::snprintf(line, sizeof(line), "%s,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", c.variant.c_str(),
                    p.step, p.loss.rgb, p.loss.mask, p.loss.dist, p.loss.geo, p.loss.total,
                    p.train_psnr);
      out << line;
    }
}

void write_curves_plot(const std::string& path, const std::vector<AblationCurve>& curves) {
  const int w = 640, h = 360, margin = 32;
  Image canvas(w, h, 3);
  std::fill(canvas.data.begin(), canvas.data.end(), 1.0);

  double max_step = 1.0, min_v = 1e30, max_v = -1e30;
  for (const auto& c : curves)
    for (const auto& p : c.points) {
      if (!std::isfinite(p.train_psnr)) continue;
      max_step = std::max(max_step, double(p.step));
      min_v = std::min(min_v, p.train_psnr);
      max_v = std::max(max_v, p.train_psnr);
    }
  if (max_v <= min_v) max_v = min_v + 1.0;

  auto put = [&](int x, int y, const Vec3& c) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    for (int ch = 0; ch < 3; ++ch) canvas.at(x, y, ch) = c[ch];
  };
  auto line = [&](double x0, double y0, double x1, double y1, const Vec3& c) {
    int n = int(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
    for (int i = 0; i <= n; ++i) {
      double f = double(i) / n;
      put(int(std::lround(x0 + f * (x1 - x0))), int(std::lround(y0 + f * (y1 - y0))), c);
    }
  };

  const Vec3 axis(0.2, 0.2, 0.2);
  line(margin, h - margin, w - margin, h - margin, axis);
  line(margin, margin, margin, h - margin, axis);

  const Vec3 palette[3] = {{0.85, 0.2, 0.15}, {0.1, 0.35, 0.8}, {0.1, 0.6, 0.25}};
  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const Vec3& col = palette[ci % 3];
    double lx = -1, ly = -1;
    for (const auto& p : curves[ci].points) {
      if (!std::isfinite(p.train_psnr)) continue;
      double x = margin + (w - 2 * margin) * p.step / max_step;
      double y = h - margin - (h - 2 * margin) * (p.train_psnr - min_v) / (max_v - min_v);
      if (lx >= 0) line(lx, ly, x, y, col);
      lx = x;
      ly = y;
    }
  }
  save_png(path, canvas);
}

CameraPathSpec parse_camera_path(const std::string& spec) {
  CameraPathSpec p;
  if (spec == "training") {
    p.kind = CameraPathSpec::Kind::kTraining;
  } else if (spec.rfind("orbit:", 0) == 0) {
    p.kind = CameraPathSpec::Kind::kOrbit;
    p.orbit_count = std::stoi(spec.substr(6));
    if (p.orbit_count < 1) throw ValidationError("camera path: orbit count must be >= 1");
  } else if (spec.rfind("file:", 0) == 0) {
    p.kind = CameraPathSpec::Kind::kFile;
    p.file = spec.substr(5);
  } else {
    throw ValidationError("camera path: expected training | orbit:N | file:<json>, got '" + spec +
                          "'");
  }
  return p;
}

void render_sequence(const Model& model, const Dataset& ds, const std::vector<FrameContext>& fctx,
                     const RenderConfig& rcfg, const CameraPathSpec& path, int frame_begin,
                     int frame_end, const std::string& out_dir, bool hdr, std::uint64_t seed,
                     int latent_override) {
  if (frame_end <= frame_begin) return;  // empty range is a success
  if (frame_begin < 0 || frame_end > static_cast<int>(ds.frames.size()))
    throw ValidationError("render: frame range outside dataset");
  if (latent_override >= model.frame_count())
    throw ValidationError("render: latent override outside trained range");

  std::vector<Camera> poses;
  switch (path.kind) {
    case CameraPathSpec::Kind::kTraining:
      break;  // per-frame training camera
    case CameraPathSpec::Kind::kOrbit: {
      // poses resolved per frame index below
      break;
    }
    case CameraPathSpec::Kind::kFile: {
      std::ifstream in(path.file);
      if (!in) throw ValidationError("missing file: " + path.file);
      json doc;  // same schema as cameras.json
      in >> doc;
      for (const auto& jf : doc.at("frames")) {
        Camera cam;
        cam.width = jf.at("width").get<int>();
        cam.height = jf.at("height").get<int>();
        const auto& K = jf.at("K");
        const auto& W = jf.at("w2c");
        for (int r = 0; r < 3; ++r) {
          for (int c = 0; c < 3; ++c) {
            cam.K(r, c) = K[r][c].get<double>();
            cam.R(r, c) = W[r][c].get<double>();
          }
          cam.t[r] = W[r][3].get<double>();
        }
        cam.validate();
        poses.push_back(cam);
      }
      if (poses.empty()) throw ValidationError("camera path file has no frames");
      break;
    }
  }

  fs::create_directories(out_dir);
  constexpr double kTwoPi = 6.283185307179586;
  for (int t = frame_begin; t < frame_end; ++t) {
    if (latent_override < 0 && t >= model.frame_count())
      throw ValidationError("render: frame " + std::to_string(t) +
                            " outside trained latent range (use an explicit latent override)");
    const int latent_frame = latent_override >= 0 ? latent_override : t;

    Camera cam;
    switch (path.kind) {
      case CameraPathSpec::Kind::kTraining:
        cam = ds.frames[t].camera;
        break;
      case CameraPathSpec::Kind::kOrbit: {
        // an orbit around the scene center at the training cameras' radius
        const Camera& c0 = ds.frames[0].camera;
        Vec3 center0 = c0.center();
        double radius = center0.norm();
        double elev = std::asin(std::clamp(center0[2] / radius, -1.0, 1.0));
        double az = kTwoPi * (t - frame_begin) / std::max(1, path.orbit_count);
        Vec3 pos = radius * Vec3(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az),
                                 std::sin(elev));
        Vec3 fwd = (-pos).normalized();
        Vec3 right = fwd.cross(Vec3(0, 0, 1)).normalized();
        Vec3 down = fwd.cross(right);
        cam.R.row(0) = right.transpose();
        cam.R.row(1) = down.transpose();
        cam.R.row(2) = fwd.transpose();
        cam.t = -cam.R * pos;
        cam.K = c0.K;
        cam.width = c0.width;
        cam.height = c0.height;
        break;
      }
      case CameraPathSpec::Kind::kFile:
        cam = poses[(t - frame_begin) % poses.size()];
        break;
    }

    Image img = render_image(model, fctx[t], latent_frame, cam, seed, rcfg);
    char name[32];
    std::snprintf(name, sizeof(name), "%04d", t);
    if (hdr)
      save_raw_float((fs::path(out_dir) / (std::string(name) + ".raw")).string(), img);
    else
      save_png((fs::path(out_dir) / (std::string(name) + ".png")).string(), img);
  }
}

}  // namespace selfnerf
