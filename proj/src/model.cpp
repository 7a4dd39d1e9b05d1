// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#include "selfnerf/model.hpp"

#include <cmath>

namespace selfnerf {

EncoderRef Model::encoder_ref() const {
  EncoderRef ref;
  ref.kind = encoder;
  ref.grid = &grid;
  ref.bank = &bank;
  ref.freq_bands = freq_bands;
  return ref;
}

double default_d_max(const Aabb& canonical_bounds, double box_dilation) {
  return 1.5 * box_dilation * canonical_bounds.max_extent();
}

FrameContext::FrameContext(SurfaceFrame s, double dilation)
    : surface(std::move(s)), index(surface.points) {
  Aabb tight;
  for (const Vec3& p : surface.points) tight.expand(p);
  box = tight.dilated(dilation);
}

std::vector<FrameContext> build_frame_contexts(const Dataset& ds, double dilation) {
  std::vector<FrameContext> out;
  out.reserve(ds.frames.size());
  for (const DatasetFrame& f : ds.frames) out.emplace_back(f.surface, dilation);
  return out;
}

Model make_model(const Dataset& ds, EncoderKind encoder, const HashGridConfig& grid_cfg,
                 const VertexBankConfig& bank_cfg_template, const FieldConfig& field_cfg,
                 int knn_k, double box_dilation, std::uint64_t seed) {
  if (knn_k < 1 || static_cast<std::size_t>(knn_k) > ds.vertex_count())
    throw ValidationError("model: knn k out of range");
  Model m;
  m.encoder = encoder;
  m.grid_cfg = grid_cfg;
  m.bank_cfg = bank_cfg_template;
  m.bank_cfg.num_vertices = static_cast<int>(ds.vertex_count());
  m.field_cfg = field_cfg;
  m.knn_k = knn_k;
  m.freq_bands = 4;

  m.canonical = ds.canonical;
  Aabb canonical = ds.canonical_bounds();
  m.norm.box = canonical.dilated(0.10);
  m.norm.d_max = default_d_max(canonical, box_dilation);
  m.bank_cfg.d_max = m.norm.d_max;
  m.norm.validate();

  switch (encoder) {
    case EncoderKind::kHash:
      m.grid = make_hash_grid(grid_cfg, mix_seed(seed, 0x67726964ULL));
      m.field_cfg.feature_dim = m.grid.feature_dim();
      break;
    case EncoderKind::kVertexBaseline:
      m.bank = make_vertex_bank(m.bank_cfg, mix_seed(seed, 0x62616e6bULL));
      m.field_cfg.feature_dim = m.bank_cfg.feature_dim;
      break;
    case EncoderKind::kFrequency:
      m.field_cfg.feature_dim = 8 * m.freq_bands;
      break;
  }
  m.field = init_params(m.field_cfg, static_cast<int>(ds.frames.size()), mix_seed(seed, 0x6d6c70ULL));
  return m;
}

namespace {

/// Assembles the MLP input column for one sample: [feature; latent; view enc].
void fill_input_column(const Model& model, int t, const RelativeSample& rs, const Vec3* view_dir,
                       MatX& X, Eigen::Index col, std::vector<double>& scratch) {
  const int fd = model.field_cfg.feature_dim;
  scratch.resize(fd);
  blended_feature(rs, model.encoder_ref(), scratch);
  for (int j = 0; j < fd; ++j) X(j, col) = scratch[j];
  const VecX& latent = model.field.latents[t];
  for (int j = 0; j < model.field_cfg.latent_dim; ++j) X(fd + j, col) = latent[j];
  if (model.field_cfg.use_view_dirs) {
    std::vector<double> venc(model.field_cfg.view_dim(), 0.0);
    if (view_dir) encode_view_dir(*view_dir, model.field_cfg.view_freq_bands, venc);
    const int base = fd + model.field_cfg.latent_dim;
    for (int j = 0; j < model.field_cfg.view_dim(); ++j) X(base + j, col) = venc[j];
  }
}

}  // namespace

void field_query(const Model& model, const FrameContext& fctx, int t, const Vec3& x,
                 double& sigma, Vec3& color, const Vec3* view_dir) {
  if (t < 0 || t >= model.frame_count())
    throw ValidationError("unknown frame index " + std::to_string(t));
  RelativeSample rs = relative_set(x, fctx.surface, fctx.index, model.canonical, model.knn_k);
  model.norm.apply(rs);
  MatX X(model.field_cfg.input_dim(), 1);
  std::vector<double> scratch;
  fill_input_column(model, t, rs, view_dir, X, 0, scratch);
  MlpCache cache;
  VecX sig;
  MatX col;
  field_forward(model.field_cfg, model.field.mlp, X, cache, sig, col);
  sigma = sig[0];
  color = col.col(0);
}

void forward_ray(const Model& model, const FrameContext& fctx, int t, const Camera& cam, int px,
                 int py, int iteration, std::uint64_t seed, const RenderConfig& rcfg,
                 RayTrace& trace) {
  if (t < 0 || t >= model.frame_count())
    throw ValidationError("unknown frame index " + std::to_string(t));
  trace = RayTrace{};
  trace.ray = generate_ray(cam, px, py);
  double tn, tf;
  if (!fctx.box.intersect_ray(trace.ray.origin, trace.ray.dir, tn, tf) || tf <= tn) return;
  trace.hit = true;
  trace.near = tn;
  trace.far = tf;

  const double eta = anneal_factor(iteration, rcfg.anneal_eta0, rcfg.anneal_iters);
  Rng ray_rng(mix_seed(seed, std::uint64_t(t), std::uint64_t(py) * cam.width + px,
                       std::uint64_t(iteration)));
  trace.depths = sample_depths(tn, tf, rcfg.samples_per_ray, eta, ray_rng);

  const int n = rcfg.samples_per_ray;
  trace.deltas.resize(n);
  for (int i = 0; i + 1 < n; ++i) trace.deltas[i] = trace.depths[i + 1] - trace.depths[i];
  trace.deltas[n - 1] = tf - trace.depths[n - 1];
  if (trace.deltas[n - 1] <= 0.0) trace.deltas[n - 1] = 1e-12;

  trace.rel.resize(n);
  MatX X(model.field_cfg.input_dim(), n);
  std::vector<double> scratch;
  for (int i = 0; i < n; ++i) {
    Vec3 x = trace.ray.origin + trace.depths[i] * trace.ray.dir;
    trace.rel[i] = relative_set(x, fctx.surface, fctx.index, model.canonical, model.knn_k);
    model.norm.apply(trace.rel[i]);
    fill_input_column(model, t, trace.rel[i], &trace.ray.dir, X, i, scratch);
  }
  field_forward(model.field_cfg, model.field.mlp, X, trace.cache, trace.sigma, trace.color);
  composite(trace.sigma, trace.color, trace.deltas, trace.out_color, trace.weight_sum, trace.comp);
}

GradSet GradSet::like(const Model& model) {
  GradSet g;
  g.grid.assign(model.grid.data.size(), 0.0);
  g.bank.assign(model.bank.data.size(), 0.0);
  g.field = zero_like(model.field);
  return g;
}

void GradSet::set_zero() {
  std::fill(grid.begin(), grid.end(), 0.0);
  std::fill(bank.begin(), bank.end(), 0.0);
  field.mlp.set_zero();
  for (auto& l : field.latents) l.setZero();
}

bool GradSet::all_finite_named(std::string& offending_group) const {
  for (double v : grid)
    if (!std::isfinite(v)) {
      offending_group = "hash_tables";
      return false;
    }
  for (double v : bank)
    if (!std::isfinite(v)) {
      offending_group = "vertex_bank";
      return false;
    }
  if (!field.mlp.all_finite()) {
    offending_group = "mlp";
    return false;
  }
  for (const auto& l : field.latents)
    if (!l.allFinite()) {
      offending_group = "latents";
      return false;
    }
  return true;
}

void GradSet::add(const GradSet& other) {
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] += other.grid[i];
  for (std::size_t i = 0; i < bank.size(); ++i) bank[i] += other.bank[i];
  for (std::size_t l = 0; l < field.mlp.weights.size(); ++l) {
    field.mlp.weights[l] += other.field.mlp.weights[l];
    field.mlp.biases[l] += other.field.mlp.biases[l];
  }
  for (std::size_t t = 0; t < field.latents.size(); ++t) field.latents[t] += other.field.latents[t];
}

void backward_ray(const Model& model, int t, const RayTrace& trace, const Vec3& d_out_color,
                  double d_weight_sum, const VecX* d_sigma_direct, GradSet& grad) {
  if (!trace.hit) return;
  const auto n = trace.sigma.size();
  VecX d_sigma(n);
  MatX d_color(3, n);
  composite_backward(trace.sigma, trace.color, trace.deltas, trace.comp, d_out_color,
                     d_weight_sum, d_sigma, d_color);
  if (d_sigma_direct) d_sigma += *d_sigma_direct;

  MatX d_input;
  field_backward(model.field_cfg, model.field.mlp, trace.cache, d_sigma, d_color, grad.field.mlp,
                 d_input);

  const int fd = model.field_cfg.feature_dim;
  const int ld = model.field_cfg.latent_dim;
  std::vector<double> dfeat(fd);
  std::span<double> enc_grad = model.encoder == EncoderKind::kHash
                                   ? std::span<double>(grad.grid)
                                   : std::span<double>(grad.bank);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < fd; ++j) dfeat[j] = d_input(j, i);
    blended_feature_backward(trace.rel[i], model.encoder_ref(), dfeat, enc_grad);
    grad.field.latents[t] += d_input.block(fd, i, ld, 1);
  }
}

PixelRender render_pixel(const Model& model, const FrameContext& fctx, int t, const Camera& cam,
                         int px, int py, int iteration, std::uint64_t seed,
                         const RenderConfig& rcfg) {
  RayTrace trace;
  forward_ray(model, fctx, t, cam, px, py, iteration, seed, rcfg, trace);
  return PixelRender{trace.out_color, trace.weight_sum};
}

Image render_image(const Model& model, const FrameContext& fctx, int t, const Camera& cam,
                   std::uint64_t seed, const RenderConfig& rcfg, Image* weight_out) {
  Image img(cam.width, cam.height, 3);
  if (weight_out) *weight_out = Image(cam.width, cam.height, 1);
  parallel_chunks(cam.height, worker_count(), [&](int, std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        PixelRender pr = render_pixel(model, fctx, t, cam, x, int(y), 1 << 30, seed, rcfg);
        Vec3 c = pr.color;
        if (rcfg.white_background) c += (1.0 - pr.weight_sum) * Vec3::Ones();
        for (int ch = 0; ch < 3; ++ch) img.at(x, int(y), ch) = std::clamp(c[ch], 0.0, 1.0);
        if (weight_out) weight_out->at(x, int(y), 0) = pr.weight_sum;
      }
    }
  });
  return img;
}

}  // namespace selfnerf
