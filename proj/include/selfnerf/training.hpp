// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "selfnerf/model.hpp"

namespace selfnerf {

struct TrainConfig {
  int iterations = 2000;
  int rays_per_batch = 4096;
  double lambda_mask = 1.0;
  double lambda_dist = 1.0;
  double beta = 10.0;              // distance-loss exponent rate
  int lambda_switch_iter = 400;    // lambda_early before, lambda_late from here on
  double lambda_early = 1.0;
  double lambda_late = 0.1;
  double lr_start = 2e-3;
  double lr_end = 2e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.99;
  double adam_eps = 1e-15;
  std::uint64_t seed = 0;
  double in_mask_fraction = 0.5;   // share of batch rays forced inside the mask
  int checkpoint_every = 500;
  bool deterministic = false;      // also zeroes the ms column of the loss log
  bool dist_inside_free = false;   // zero the distance penalty where d_1 <= 0
  int threads = 0;                 // 0: worker_count()

  void validate() const;
};

/// Per-step loss components, normalized per ray so magnitudes are
/// batch-size independent. total = rgb + lambda * geo exactly.
struct LossReport {
  double rgb = 0.0;
  double mask = 0.0;
  double dist = 0.0;
  double geo = 0.0;
  double total = 0.0;
};

/// Sum over rays of the L2 norm of the color residual.
double loss_rgb(const std::vector<Vec3>& rendered, const std::vector<Vec3>& reference);

/// Sum over rays of W (1 - M) + (1 - W) M.
double loss_mask(const std::vector<double>& weight_sums, const std::vector<double>& mask_values);

/// Sum over samples of sigma * exp(min(beta * relu(d1), 20)).
double loss_dist(const std::vector<double>& sigmas, const std::vector<double>& nearest_signed,
                 double beta, bool inside_free = false);

double lambda_at(int iteration, const TrainConfig& cfg);
double lr_at(int iteration, const TrainConfig& cfg);

/// Fills geo and total from the component losses and the scheduled lambda:
/// geo = lambda_mask * mask + lambda_dist * dist, total = rgb + lambda * geo.
double loss_total(LossReport& parts, int iteration, const TrainConfig& cfg);

/// First-moment/second-moment state for one flat parameter group.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
};

/// One bias-corrected Adam update over a flat view. `step` is 1-based.
/// Throws NumericalError naming `group` if a gradient is non-finite.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               int step, double lr, const TrainConfig& cfg, const std::string& group);

struct BatchRaySpec {
  int frame = 0, px = 0, py = 0;
};

struct LossSums {
  double rgb = 0.0, mask = 0.0, dist = 0.0;

  LossSums& operator+=(const LossSums& o) {
    rgb += o.rgb;
    mask += o.mask;
    dist += o.dist;
    return *this;
  }
};

/// Sum-form losses over an explicit ray batch, with gradients (scaled by the
/// scheduled lambda at `iteration`) accumulated into `grad`. This is the
/// training step's inner loop; the gradient checks drive it directly.
LossSums accumulate_batch(const Dataset& ds, const std::vector<FrameContext>& fctx,
                          const Model& model, const TrainConfig& cfg, const RenderConfig& rcfg,
                          std::span<const BatchRaySpec> rays, int iteration, GradSet& grad);

/// Optimizer over all of a model's parameter groups.
struct Optimizer {
  AdamState encoder_state;  // hash tables or vertex bank
  AdamState mlp_state;
  AdamState latent_state;
  int steps_taken = 0;

  static Optimizer like(const Model& model);
  void apply(Model& model, const GradSet& grad, double lr, const TrainConfig& cfg);
};

/// Stepwise training driver. The batch schedule depends only on
/// (seed, iteration), so interleaving evaluation calls between steps does
/// not perturb it.
class TrainLoop {
 public:
  TrainLoop(const Dataset& dataset, Model& model, const TrainConfig& cfg, const RenderConfig& rcfg);

  LossReport step();
  int iteration() const { return iter_; }
  const Model& model() const { return model_; }
  const std::vector<FrameContext>& frames() const { return frames_; }
  const Optimizer& optimizer() const { return opt_; }
  Optimizer& optimizer() { return opt_; }

 private:
  std::vector<BatchRaySpec> sample_batch();

  const Dataset& dataset_;
  Model& model_;
  TrainConfig cfg_;
  RenderConfig rcfg_;
  std::vector<FrameContext> frames_;
  std::vector<PixelRect> bboxes_;
  std::vector<std::vector<int>> in_mask_pixels_;
  Optimizer opt_;
  std::vector<GradSet> grad_buffers_;  // one per worker, reduced in order
  int iter_ = 0;
  int workers_ = 1;
};

struct TrainResult {
  std::string checkpoint_path;  // final checkpoint
  std::string log_path;
  std::vector<LossReport> reports;
};

/// Full run: optimization loop, line-per-step loss log, checkpoints at the
/// configured cadence plus final. Aborts with NumericalError on a NaN loss.
TrainResult train(const Dataset& dataset, Model& model, const TrainConfig& cfg,
                  const RenderConfig& rcfg, const std::string& out_dir,
                  const std::function<void(int, const Model&)>& step_hook = nullptr);

/// Checkpoint: "SNRF" magic, u32 version, self-describing key=value config
/// block, parameter blobs as little-endian f32 (hash tables level-major with
/// row-major entries, then MLP, latents, optimizer moments), trailing CRC32.
void save_checkpoint(const std::string& path, const Model& model, const Optimizer& opt,
                     const TrainConfig& cfg, const RenderConfig& rcfg, int iteration);

struct Checkpoint {
  Model model;
  Optimizer opt;
  TrainConfig train_cfg;
  RenderConfig render_cfg;
  int iteration = 0;
};

Checkpoint load_checkpoint(const std::string& path);

std::string format_loss_line(int step, double lr, double lambda, const LossReport& r, double ms);

}  // namespace selfnerf
