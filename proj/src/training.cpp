// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#include "selfnerf/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace selfnerf {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (iterations < 0) throw ValidationError("train: iterations must be >= 0");
  if (rays_per_batch < 1) throw ValidationError("train: rays_per_batch must be >= 1");
  if (!(lr_start >= lr_end) || !(lr_end > 0.0))
    throw ValidationError("train: require lr_start >= lr_end > 0");
  if (lambda_switch_iter > iterations)
    throw ValidationError("train: lambda switch iteration exceeds iterations");
  if (beta < 0.0) throw ValidationError("train: beta must be >= 0");
  if (in_mask_fraction < 0.0 || in_mask_fraction > 1.0)
    throw ValidationError("train: in_mask_fraction must be in [0,1]");
}

double loss_rgb(const std::vector<Vec3>& rendered, const std::vector<Vec3>& reference) {
  if (rendered.size() != reference.size()) throw ValidationError("loss_rgb: batch length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < rendered.size(); ++i) sum += (rendered[i] - reference[i]).norm();
  return sum;
}

double loss_mask(const std::vector<double>& weight_sums, const std::vector<double>& mask_values) {
  if (weight_sums.size() != mask_values.size())
    throw ValidationError("loss_mask: batch length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < weight_sums.size(); ++i) {
    double w = weight_sums[i], m = mask_values[i];
    sum += w * (1.0 - m) + (1.0 - w) * m;
  }
  return sum;
}

namespace {

/// exp factor of the distance penalty, with the exponent clamped at 20 so
/// far samples cannot overflow 32-bit downstream consumers.
double dist_factor(double d1, double beta, bool inside_free) {
  if (inside_free && d1 <= 0.0) return 0.0;
  double e = std::min(beta * std::max(d1, 0.0), 20.0);
  return std::exp(e);
}

}  // namespace

double loss_dist(const std::vector<double>& sigmas, const std::vector<double>& nearest_signed,
                 double beta, bool inside_free) {
  if (sigmas.size() != nearest_signed.size()) throw ValidationError("loss_dist: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < sigmas.size(); ++i)
    sum += sigmas[i] * dist_factor(nearest_signed[i], beta, inside_free);
  return sum;
}

double lambda_at(int iteration, const TrainConfig& cfg) {
  return iteration < cfg.lambda_switch_iter ? cfg.lambda_early : cfg.lambda_late;
}

double loss_total(LossReport& parts, int iteration, const TrainConfig& cfg) {
  parts.geo = cfg.lambda_mask * parts.mask + cfg.lambda_dist * parts.dist;
  parts.total = parts.rgb + lambda_at(iteration, cfg) * parts.geo;
  return parts.total;
}

double lr_at(int iteration, const TrainConfig& cfg) {
  if (iteration < 0 || iteration > cfg.iterations) throw ValidationError("lr_at: iteration out of range");
  if (iteration == 0 || cfg.iterations == 0) return cfg.lr_start;
  if (iteration == cfg.iterations) return cfg.lr_end;  // exact endpoint
  double frac = double(iteration) / double(cfg.iterations);
  return cfg.lr_start * std::pow(cfg.lr_end / cfg.lr_start, frac);
}

namespace {

/// Bias-corrected update over a raw view into a group's moment buffers.
void adam_update_raw(double* params, const double* grads, double* m, double* v, std::size_t n,
                     int step, double lr, const TrainConfig& cfg, const std::string& group) {
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, step);
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, step);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    if (!std::isfinite(g))
      throw NumericalError("non-finite gradient in parameter group '" + group + "'");
    m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g;
    v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g * g;
    params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps);
  }
}

}  // namespace

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               int step, double lr, const TrainConfig& cfg, const std::string& group) {
  if (params.size() != grads.size()) throw ValidationError("adam_step: shape mismatch");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  adam_update_raw(params.data(), grads.data(), state.m.data(), state.v.data(), params.size(),
                  step, lr, cfg, group);
}

Optimizer Optimizer::like(const Model& model) {
  Optimizer opt;
  opt.encoder_state.m.assign(
      model.encoder == EncoderKind::kHash ? model.grid.data.size()
      : model.encoder == EncoderKind::kVertexBaseline ? model.bank.data.size()
                                                      : 0,
      0.0);
  opt.encoder_state.v = opt.encoder_state.m;
  std::size_t mlp_total = 0;
  for (const auto& w : model.field.mlp.weights) mlp_total += w.size();
  for (const auto& b : model.field.mlp.biases) mlp_total += b.size();
  opt.mlp_state.m.assign(mlp_total, 0.0);
  opt.mlp_state.v.assign(mlp_total, 0.0);
  std::size_t latent_total = 0;
  for (const auto& l : model.field.latents) latent_total += l.size();
  opt.latent_state.m.assign(latent_total, 0.0);
  opt.latent_state.v.assign(latent_total, 0.0);
  return opt;
}

void Optimizer::apply(Model& model, const GradSet& grad, double lr, const TrainConfig& cfg) {
  const int step = ++steps_taken;
  if (model.encoder == EncoderKind::kHash) {
    adam_step(model.grid.data, grad.grid, encoder_state, step, lr, cfg, "hash_tables");
  } else if (model.encoder == EncoderKind::kVertexBaseline) {
    adam_step(model.bank.data, grad.bank, encoder_state, step, lr, cfg, "vertex_bank");
  }

  std::size_t off = 0;
  for (std::size_t l = 0; l < model.field.mlp.weights.size(); ++l) {
    MatX& w = model.field.mlp.weights[l];
    adam_update_raw(w.data(), grad.field.mlp.weights[l].data(), mlp_state.m.data() + off,
                    mlp_state.v.data() + off, w.size(), step, lr, cfg, "mlp");
    off += w.size();
    VecX& b = model.field.mlp.biases[l];
    adam_update_raw(b.data(), grad.field.mlp.biases[l].data(), mlp_state.m.data() + off,
                    mlp_state.v.data() + off, b.size(), step, lr, cfg, "mlp");
    off += b.size();
  }

  std::size_t loff = 0;
  for (std::size_t t = 0; t < model.field.latents.size(); ++t) {
    VecX& lat = model.field.latents[t];
    adam_update_raw(lat.data(), grad.field.latents[t].data(), latent_state.m.data() + loff,
                    latent_state.v.data() + loff, lat.size(), step, lr, cfg, "latents");
    loff += lat.size();
  }
}

TrainLoop::TrainLoop(const Dataset& dataset, Model& model, const TrainConfig& cfg,
                     const RenderConfig& rcfg)
    : dataset_(dataset), model_(model), cfg_(cfg), rcfg_(rcfg) {
  cfg_.validate();
  if (model_.frame_count() != static_cast<int>(dataset_.frames.size()))
    throw ValidationError("train: model frame count does not match dataset");
  frames_ = build_frame_contexts(dataset_, rcfg_.box_dilation);
  bboxes_.reserve(dataset_.frames.size());
  in_mask_pixels_.reserve(dataset_.frames.size());
  for (const auto& f : dataset_.frames) {
    bboxes_.push_back(mask_bbox(f.mask));
    std::vector<int> in;
    for (int y = 0; y < f.mask.height; ++y)
      for (int x = 0; x < f.mask.width; ++x)
        if (f.mask.at(x, y, 0) != 0.0) in.push_back(y * f.mask.width + x);
    in_mask_pixels_.push_back(std::move(in));
  }
  workers_ = cfg_.threads > 0 ? cfg_.threads : worker_count();
  grad_buffers_.reserve(workers_);
  for (int w = 0; w < workers_; ++w) grad_buffers_.push_back(GradSet::like(model_));
  opt_ = Optimizer::like(model_);
}

LossSums accumulate_batch(const Dataset& ds, const std::vector<FrameContext>& fctx,
                          const Model& model, const TrainConfig& cfg, const RenderConfig& rcfg,
                          std::span<const BatchRaySpec> rays, int iteration, GradSet& grad) {
  const double lambda = lambda_at(iteration, cfg);
  LossSums sums;
  RayTrace trace;
  VecX d_sigma_direct;
  for (const BatchRaySpec& s : rays) {
    const DatasetFrame& frame = ds.frames[s.frame];
    forward_ray(model, fctx[s.frame], s.frame, frame.camera, s.px, s.py, iteration, cfg.seed,
                rcfg, trace);

    Vec3 gt(frame.image.at(s.px, s.py, 0), frame.image.at(s.px, s.py, 1),
            frame.image.at(s.px, s.py, 2));
    const double m = frame.mask.at(s.px, s.py, 0);

    Vec3 residual = trace.out_color - gt;
    double rnorm = residual.norm();
    sums.rgb += rnorm;
    sums.mask += trace.weight_sum * (1.0 - m) + (1.0 - trace.weight_sum) * m;

    if (!trace.hit) continue;  // constants contribute no gradient

    Vec3 d_color = rnorm > 1e-12 ? Vec3(residual / rnorm) : Vec3(Vec3::Zero());
    double d_weight = lambda * cfg.lambda_mask * (1.0 - 2.0 * m);

    const auto n = trace.sigma.size();
    d_sigma_direct.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      double factor = dist_factor(trace.rel[k].signed_d[0], cfg.beta, cfg.dist_inside_free);
      sums.dist += trace.sigma[k] * factor;
      d_sigma_direct[k] = lambda * cfg.lambda_dist * factor;
    }
    backward_ray(model, s.frame, trace, d_color, d_weight, &d_sigma_direct, grad);
  }
  return sums;
}

std::vector<BatchRaySpec> TrainLoop::sample_batch() {
  Rng rng(mix_seed(cfg_.seed, 0x626174636830ULL, std::uint64_t(iter_)));
  std::vector<BatchRaySpec> specs(cfg_.rays_per_batch);
  const int n_frames = static_cast<int>(dataset_.frames.size());
  const int width = dataset_.width();
  for (auto& s : specs) {
    s.frame = static_cast<int>(rng.below(n_frames));
    if (rng.uniform() < cfg_.in_mask_fraction) {
      const auto& in = in_mask_pixels_[s.frame];
      int flat = in[rng.below(in.size())];
      s.px = flat % width;
      s.py = flat / width;
    } else {
      const PixelRect& bb = bboxes_[s.frame];
      s.px = bb.x0 + static_cast<int>(rng.below(bb.width()));
      s.py = bb.y0 + static_cast<int>(rng.below(bb.height()));
    }
  }
  return specs;
}

LossReport TrainLoop::step() {
  const std::vector<BatchRaySpec> specs = sample_batch();
  const double lr = lr_at(iter_, cfg_);

  std::vector<LossSums> sums(workers_);
  for (auto& g : grad_buffers_) g.set_zero();

  parallel_chunks(specs.size(), workers_, [&](int w, std::size_t b, std::size_t e) {
    sums[w] = accumulate_batch(dataset_, frames_, model_, cfg_, rcfg_,
                               {specs.data() + b, e - b}, iter_, grad_buffers_[w]);
  });

  // fixed-order reduction: worker 0 then 1 then ... regardless of finish order
  for (int w = 1; w < workers_; ++w) grad_buffers_[0].add(grad_buffers_[w]);
  LossSums total_sums;
  for (const auto& s : sums) total_sums += s;

  LossReport report;
  const double inv = 1.0 / cfg_.rays_per_batch;
  report.rgb = total_sums.rgb * inv;
  report.mask = total_sums.mask * inv;
  report.dist = total_sums.dist * inv;
  loss_total(report, iter_, cfg_);
  if (!std::isfinite(report.total))
    throw NumericalError("NaN loss at step " + std::to_string(iter_) + " (rgb=" +
                         std::to_string(report.rgb) + " mask=" + std::to_string(report.mask) +
                         " dist=" + std::to_string(report.dist) + ")");

  opt_.apply(model_, grad_buffers_[0], lr, cfg_);
  ++iter_;
  return report;
}

std::string format_loss_line(int step, double lr, double lambda, const LossReport& r, double ms) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "step=%d lr=%.17g lambda=%.17g rgb=%.17g mask=%.17g dist=%.17g geo=%.17g "
                "total=%.17g ms=%.3f",
                step, lr, lambda, r.rgb, r.mask, r.dist, r.geo, r.total, ms);
  return buf;
}

TrainResult train(const Dataset& dataset, Model& model, const TrainConfig& cfg,
                  const RenderConfig& rcfg, const std::string& out_dir,
                  const std::function<void(int, const Model&)>& step_hook) {
  fs::create_directories(out_dir);
  TrainLoop loop(dataset, model, cfg, rcfg);

  TrainResult result;
  result.log_path = (fs::path(out_dir) / "loss_log.txt").string();
  std::ofstream log(result.log_path);
  if (!log) throw ValidationError("cannot open for write: " + result.log_path);

  auto checkpoint_name = [&](const std::string& tag) {
    return (fs::path(out_dir) / ("checkpoint_" + tag + ".snrf")).string();
  };

  for (int i = 0; i < cfg.iterations; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    LossReport report = loop.step();
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (cfg.deterministic) ms = 0.0;  // keeps logs byte-identical across runs
    log << format_loss_line(i, lr_at(i, cfg), lambda_at(i, cfg), report, ms) << "\n";
    result.reports.push_back(report);
    if (step_hook) step_hook(i + 1, model);
    if (cfg.checkpoint_every > 0 && (i + 1) % cfg.checkpoint_every == 0 && i + 1 < cfg.iterations) {
      char tag[16];
      std::snprintf(tag, sizeof(tag), "%06d", i + 1);
      save_checkpoint(checkpoint_name(tag), model, loop.optimizer(), cfg, rcfg, i + 1);
    }
  }
  log.flush();
  result.checkpoint_path = checkpoint_name("final");
  save_checkpoint(result.checkpoint_path, model, loop.optimizer(), cfg, rcfg, cfg.iterations);
  return result;
}

}  // namespace selfnerf
