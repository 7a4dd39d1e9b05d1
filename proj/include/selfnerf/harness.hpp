// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "selfnerf/metrics.hpp"
#include "selfnerf/training.hpp"

namespace selfnerf {

struct EvalFrame {
  int frame = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  PixelRect bbox;
};

struct EvalReport {
  std::vector<EvalFrame> frames;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

/// Renders the training view of each requested frame and scores it against
/// the stored image inside the mask-derived bounding box.
EvalReport evaluate(const Model& model, const Dataset& ds, const std::vector<FrameContext>& fctx,
                    const RenderConfig& rcfg, const std::vector<int>& frame_ids,
                    std::uint64_t seed);

std::string format_eval_text(const EvalReport& r);
void write_eval_json(const std::string& path, const EvalReport& r);

/// One curve sample of an ablation run.
struct AblationPoint {
  int step = 0;
  LossReport loss;
  double train_psnr = 0.0;
};

struct AblationCurve {
  std::string variant;
  std::vector<AblationPoint> points;
};

struct AblationConfig {
  int budget_iters = 800;
  int cadence = 25;         // curve sample spacing (iterations)
  int psnr_probe_pixels = 1500;
  TrainConfig train;
  RenderConfig render;
  HashGridConfig grid;
  VertexBankConfig bank;
  FieldConfig field;
  int knn_k = 4;
};

EncoderKind encoder_kind_from_string(const std::string& name);
std::string encoder_kind_to_string(EncoderKind kind);

/// Trains one variant under the shared seed/batch schedule and records the
/// loss and training-PSNR curve at the configured cadence. The PSNR probe
/// set is a fixed seeded subset of in-mask pixels, identical across variants.
AblationCurve ablation_run(const Dataset& ds, EncoderKind variant, const AblationConfig& cfg);

void write_curves_csv(const std::string& path, const std::vector<AblationCurve>& curves);

/// Minimal PSNR-vs-iteration line plot (no text labels).
void write_curves_plot(const std::string& path, const std::vector<AblationCurve>& curves);

/// Camera path for render_sequence.
struct CameraPathSpec {
  enum class Kind { kTraining, kOrbit, kFile } kind = Kind::kTraining;
  int orbit_count = 0;     // poses on a full orbit (kOrbit)
  std::string file;        // cameras.json-style file (kFile)
};

CameraPathSpec parse_camera_path(const std::string& spec);

/// One image per (frame, pose). Frames outside the trained latent range
/// require latent_override (>= 0). Empty frame range is a successful no-op.
void render_sequence(const Model& model, const Dataset& ds, const std::vector<FrameContext>& fctx,
                     const RenderConfig& rcfg, const CameraPathSpec& path, int frame_begin,
                     int frame_end, const std::string& out_dir, bool hdr, std::uint64_t seed,
                     int latent_override = -1);

}  // namespace selfnerf
