// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "selfnerf/radiance_field.hpp"
#include "selfnerf/scene_io.hpp"
#include "selfnerf/surface_relative.hpp"
#include "selfnerf/volume_renderer.hpp"

namespace selfnerf {

struct RenderConfig {
  int samples_per_ray = 64;
  double anneal_eta0 = 0.1;
  int anneal_iters = 256;
  double box_dilation = 0.10;   // surface bounds dilation for near/far
  bool white_background = false;  // visualization only
};

/// The optimizable state plus the fixed encoding geometry.
struct Model {
  EncoderKind encoder = EncoderKind::kHash;
  HashGridConfig grid_cfg;
  HashGrid grid;
  VertexBankConfig bank_cfg;
  VertexBank bank;
  int freq_bands = 4;
  FieldConfig field_cfg;
  FieldParams field;
  CanonicalSurface canonical;
  RelNormalizer norm;
  int knn_k = 4;

  EncoderRef encoder_ref() const;
  int frame_count() const { return static_cast<int>(field.latents.size()); }
};

/// d_max rule: 1.5x the sampling shell half-width, i.e. the margin the
/// dilated surface box adds around the tight canonical bounds.
double default_d_max(const Aabb& canonical_bounds, double box_dilation);

/// Per-frame immutable render resources (surface copy, knn index, dilated box).
struct FrameContext {
  SurfaceFrame surface;
  KnnIndex index;
  Aabb box;

  FrameContext(SurfaceFrame s, double dilation);
};

std::vector<FrameContext> build_frame_contexts(const Dataset& ds, double dilation);

/// Builds a model sized for the dataset: hash tables (or vertex bank),
/// field params, normalization box (canonical bounds + 10%) and d_max.
Model make_model(const Dataset& ds, EncoderKind encoder, const HashGridConfig& grid_cfg,
                 const VertexBankConfig& bank_cfg_template, const FieldConfig& field_cfg,
                 int knn_k, double box_dilation, std::uint64_t seed);

/// Density and radiance of one point at frame t (Eq.-style conditioned
/// field). view_dir is consumed only when the config appends view encodings.
void field_query(const Model& model, const FrameContext& fctx, int t, const Vec3& x,
                 double& sigma, Vec3& color, const Vec3* view_dir = nullptr);

/// Everything cached while rendering one ray, enough for an exact reverse pass.
struct RayTrace {
  bool hit = false;  // dilated-box hit; miss means no field queries at all
  Ray ray;
  double near = 0.0, far = 0.0;
  std::vector<double> depths;
  VecX deltas;
  std::vector<RelativeSample> rel;  // per sample
  MlpCache cache;
  VecX sigma;
  MatX color;  // 3 x N
  CompositeCache comp;
  Vec3 out_color = Vec3::Zero();
  double weight_sum = 0.0;
};

void forward_ray(const Model& model, const FrameContext& fctx, int t, const Camera& cam, int px,
                 int py, int iteration, std::uint64_t seed, const RenderConfig& rcfg,
                 RayTrace& trace);

/// Gradient accumulator covering every learnable the model owns.
struct GradSet {
  std::vector<double> grid;  // layout of HashGrid::data
  std::vector<double> bank;  // layout of VertexBank::data
  FieldParams field;

  static GradSet like(const Model& model);
  void set_zero();
  void add(const GradSet& other);
  bool all_finite_named(std::string& offending_group) const;
};

/// Reverse pass of forward_ray. d_sigma_direct adds per-sample density
/// cotangents that bypass compositing (the distance loss term).
void backward_ray(const Model& model, int t, const RayTrace& trace, const Vec3& d_out_color,
                  double d_weight_sum, const VecX* d_sigma_direct, GradSet& grad);

struct PixelRender {
  Vec3 color = Vec3::Zero();
  double weight_sum = 0.0;
};

PixelRender render_pixel(const Model& model, const FrameContext& fctx, int t, const Camera& cam,
                         int px, int py, int iteration, std::uint64_t seed,
                         const RenderConfig& rcfg);

/// Full-frame render (parallel over rows). weight_out may be null.
Image render_image(const Model& model, const FrameContext& fctx, int t, const Camera& cam,
                   std::uint64_t seed, const RenderConfig& rcfg, Image* weight_out = nullptr);

}  // namespace selfnerf
