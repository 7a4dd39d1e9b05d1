// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface: synth | train | render | eval | ablate.
// Exit codes: 0 success, 2 validation error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "selfnerf/config_file.hpp"
#include "selfnerf/harness.hpp"

namespace fs = std::filesystem;
using namespace selfnerf;

namespace {

struct RunSettings {
  EncoderKind encoder = EncoderKind::kHash;
  int knn_k = 4;
  HashGridConfig grid;
  VertexBankConfig bank;
  FieldConfig field;
  RenderConfig render;
  TrainConfig train;
  SyntheticSceneConfig synth;
};

void apply_overrides(KeyValues& kv, const std::vector<std::string>& sets) {
  for (const std::string& s : sets) {
    std::size_t eq = s.find('=');
    if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + s + "'");
    kv.set(s.substr(0, eq), s.substr(eq + 1));
  }
}

/// Resolves settings from config keys. image_extent > 0 enables the
/// auto rules (grid.n_max defaults to the image resolution clamped to 512).
RunSettings settings_from(const KeyValues& kv, int image_extent) {
  RunSettings s;
  s.encoder = encoder_kind_from_string(kv.get_or("encoder", "hash"));
  s.knn_k = int(kv.get_int_or("knn_k", 4));

  s.grid.levels = int(kv.get_int_or("grid.levels", 16));
  s.grid.features = int(kv.get_int_or("grid.features", 2));
  s.grid.table_size = int(kv.get_int_or("grid.table_size", 1 << 15));
  s.grid.n_min = int(kv.get_int_or("grid.n_min", 16));
  s.grid.n_max = int(kv.get_int_or("grid.n_max", 0));
  if (s.grid.n_max == 0) {
    if (image_extent <= 0) throw ValidationError("grid.n_max auto rule needs a dataset");
    s.grid.n_max = std::min(512, std::max(image_extent, s.grid.n_min + 1));
  }

  s.bank.half_bins = int(kv.get_int_or("bank.half_bins", 0));
  if (s.bank.half_bins == 0) s.bank.half_bins = std::max(1, s.grid.n_max / 2);
  s.bank.feature_dim = int(kv.get_int_or("bank.feature_dim", 32));

  s.field.hidden_layers = int(kv.get_int_or("field.hidden_layers", 2));
  s.field.hidden_width = int(kv.get_int_or("field.hidden_width", 64));
  s.field.latent_dim = int(kv.get_int_or("field.latent_dim", 16));
  s.field.use_view_dirs = kv.get_bool_or("field.use_view_dirs", false);
  s.field.view_freq_bands = int(kv.get_int_or("field.view_freq_bands", 4));

  s.render.samples_per_ray = int(kv.get_int_or("render.samples_per_ray", 64));
  s.render.anneal_eta0 = kv.get_double_or("render.anneal_eta0", 0.1);
  s.render.anneal_iters = int(kv.get_int_or("render.anneal_iters", 256));
  s.render.box_dilation = kv.get_double_or("render.box_dilation", 0.10);
  s.render.white_background = kv.get_bool_or("render.white_background", false);

  s.train.iterations = int(kv.get_int_or("train.iterations", 2000));
  s.train.rays_per_batch = int(kv.get_int_or("train.rays_per_batch", 4096));
  s.train.lambda_mask = kv.get_double_or("train.lambda_mask", 1.0);
  s.train.lambda_dist = kv.get_double_or("train.lambda_dist", 1.0);
  s.train.beta = kv.get_double_or("train.beta", 10.0);
  s.train.lambda_switch_iter = int(kv.get_int_or("train.lambda_switch_iter", 400));
  s.train.lambda_early = kv.get_double_or("train.lambda_early", 1.0);
  s.train.lambda_late = kv.get_double_or("train.lambda_late", 0.1);
  s.train.lr_start = kv.get_double_or("train.lr_start", 2e-3);
  s.train.lr_end = kv.get_double_or("train.lr_end", 2e-5);
  s.train.adam_beta1 = kv.get_double_or("train.adam_beta1", 0.9);
  s.train.adam_beta2 = kv.get_double_or("train.adam_beta2", 0.99);
  s.train.adam_eps = kv.get_double_or("train.adam_eps", 1e-15);
  s.train.seed = kv.get_u64_or("train.seed", 0);
  s.train.in_mask_fraction = kv.get_double_or("train.in_mask_fraction", 0.5);
  s.train.checkpoint_every = int(kv.get_int_or("train.checkpoint_every", 500));
  s.train.deterministic = kv.get_bool_or("train.deterministic", false);
  s.train.dist_inside_free = kv.get_bool_or("train.dist_inside_free", false);
  s.train.threads = int(kv.get_int_or("train.threads", 0));

  s.synth.width = int(kv.get_int_or("synth.width", 96));
  s.synth.height = int(kv.get_int_or("synth.height", 96));
  s.synth.frame_count = int(kv.get_int_or("synth.frames", 10));
  s.synth.sphere_radius = kv.get_double_or("synth.radius", 0.35);
  s.synth.deform_amplitude = kv.get_double_or("synth.amplitude", 0.25);
  s.synth.texture = kv.get_or("synth.texture", "checker-gradient");
  s.synth.camera_radius = kv.get_double_or("synth.camera_radius", 3.0);
  s.synth.camera_elevation = kv.get_double_or("synth.elevation", 0.15);
  s.synth.orbit_fraction = kv.get_double_or("synth.orbit_fraction", 1.0);
  s.synth.icosphere_subdiv = int(kv.get_int_or("synth.subdiv", 4));
  s.synth.noise_level = kv.get_double_or("synth.noise", 0.0);
  s.synth.focal = kv.get_double_or("synth.focal", 0.0);
  s.synth.seed = kv.get_u64_or("synth.seed", 1);
  return s;
}

void parse_range(const std::string& text, int n_frames, int& begin, int& end) {
  begin = 0;
  end = n_frames;
  if (text.empty()) return;
  std::size_t colon = text.find(':');
  if (colon == std::string::npos)
    throw ValidationError("frame range must be begin:end, got '" + text + "'");
  begin = std::stoi(text.substr(0, colon));
  end = std::stoi(text.substr(colon + 1));
}

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::uint64_t seed = std::uint64_t(-1);  // -1: keep config value
  bool deterministic = false;

  KeyValues resolve() const {
    KeyValues kv;
    if (!config_path.empty()) kv = KeyValues::load(config_path);
    KeyValues copy = kv;
    apply_overrides(copy, sets);
    if (seed != std::uint64_t(-1)) copy.set_u64("train.seed", seed);
    if (deterministic) copy.set_bool("train.deterministic", true);
    return copy;
  }
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key = value config file");
  cmd->add_option("--set", args.sets, "override a config key (key=value, repeatable)");
  cmd->add_option("--seed", args.seed, "override train.seed");
  cmd->add_flag("--deterministic", args.deterministic, "fixed-order reduction, ms=0 in logs");
}

int run_synth(const CommonArgs& common, const std::string& out) {
  KeyValues kv = common.resolve();
  RunSettings s = settings_from(kv, /*image_extent=*/96);
  if (common.seed != std::uint64_t(-1)) s.synth.seed = common.seed;
  synthesize_scene(s.synth, out);
  std::printf("wrote synthetic scene: %s (%d frames, %dx%d)\n", out.c_str(), s.synth.frame_count,
              s.synth.width, s.synth.height);
  return 0;
}

int run_train(const CommonArgs& common, const std::string& data, const std::string& out,
              const std::string& encoder_flag, int iterations_flag) {
  KeyValues kv = common.resolve();
  if (!encoder_flag.empty()) kv.set("encoder", encoder_flag);
  if (iterations_flag >= 0) kv.set_int("train.iterations", iterations_flag);

  Dataset ds = load_dataset(data);
  RunSettings s = settings_from(kv, std::max(ds.width(), ds.height()));
  Model model = make_model(ds, s.encoder, s.grid, s.bank, s.field, s.knn_k,
                           s.render.box_dilation, s.train.seed);
  TrainResult result = train(ds, model, s.train, s.render, out);
  std::printf("trained %d iterations; checkpoint: %s\n", s.train.iterations,
              result.checkpoint_path.c_str());
  if (!result.reports.empty())
    std::printf("final loss: total=%.6g rgb=%.6g geo=%.6g\n", result.reports.back().total,
                result.reports.back().rgb, result.reports.back().geo);
  return 0;
}

int run_render(const CommonArgs& common, const std::string& checkpoint, const std::string& data,
               const std::string& out, const std::string& range_text, const std::string& poses,
               bool hdr, bool white_bg, int latent_override) {
  Checkpoint ck = load_checkpoint(checkpoint);
  Dataset ds = load_dataset(data);
  if (ds.vertex_count() != std::size_t(ck.model.bank_cfg.num_vertices) &&
      ck.model.encoder == EncoderKind::kVertexBaseline)
    throw ValidationError("render: dataset vertex count does not match checkpoint");
  ck.model.canonical = ds.canonical;

  KeyValues kv = common.resolve();
  (void)kv;
  RenderConfig rcfg = ck.render_cfg;
  rcfg.white_background = white_bg;

  int begin, end;
  parse_range(range_text, static_cast<int>(ds.frames.size()), begin, end);
  std::vector<FrameContext> fctx = build_frame_contexts(ds, rcfg.box_dilation);
  std::uint64_t seed = common.seed != std::uint64_t(-1) ? common.seed : ck.train_cfg.seed;
  render_sequence(ck.model, ds, fctx, rcfg, parse_camera_path(poses), begin, end, out, hdr, seed,
                  latent_override);
  std::printf("rendered frames [%d, %d) to %s\n", begin, end, out.c_str());
  return 0;
}

int run_eval(const CommonArgs& common, const std::string& checkpoint, const std::string& data,
             const std::string& json_out, const std::string& range_text) {
  Checkpoint ck = load_checkpoint(checkpoint);
  Dataset ds = load_dataset(data);
  ck.model.canonical = ds.canonical;

  int begin, end;
  parse_range(range_text, static_cast<int>(ds.frames.size()), begin, end);
  std::vector<int> ids;
  for (int t = begin; t < end; ++t) ids.push_back(t);

  std::vector<FrameContext> fctx = build_frame_contexts(ds, ck.render_cfg.box_dilation);
  std::uint64_t seed = common.seed != std::uint64_t(-1) ? common.seed : ck.train_cfg.seed;
  EvalReport report = evaluate(ck.model, ds, fctx, ck.render_cfg, ids, seed);
  std::fputs(format_eval_text(report).c_str(), stdout);

  std::string path = json_out;
  if (path.empty()) path = (fs::path(checkpoint).parent_path() / "eval_report.json").string();
  write_eval_json(path, report);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int run_ablate(const CommonArgs& common, const std::string& data, const std::string& out,
               const std::string& variants_text, int budget, int cadence, bool plot) {
  Dataset ds = load_dataset(data);
  KeyValues kv = common.resolve();
  RunSettings s = settings_from(kv, std::max(ds.width(), ds.height()));

  AblationConfig acfg;
  acfg.budget_iters = budget;
  acfg.cadence = cadence;
  acfg.train = s.train;
  acfg.render = s.render;
  acfg.grid = s.grid;
  acfg.bank = s.bank;
  acfg.field = s.field;
  acfg.knn_k = s.knn_k;

  std::vector<AblationCurve> curves;
  std::stringstream ss(variants_text);
  std::string name;
  while (std::getline(ss, name, ',')) {
    EncoderKind kind = encoder_kind_from_string(name);
    std::printf("ablation: training variant '%s' for %d iterations\n", name.c_str(), budget);
    curves.push_back(ablation_run(ds, kind, acfg));
  }
  if (curves.empty()) throw ValidationError("ablate: no variants given");

  fs::create_directories(out);
  std::string csv = (fs::path(out) / "ablation.csv").string();
  write_curves_csv(csv, curves);
  std::printf("wrote %s\n", csv.c_str());
  if (plot) {
    std::string png = (fs::path(out) / "ablation_psnr.png").string();
    write_curves_plot(png, curves);
    std::printf("wrote %s\n", png.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic neural radiance fields with surface-relative hash encoding"};
  app.require_subcommand(1);

  CommonArgs synth_common, train_common, render_common, eval_common, ablate_common;

  auto* synth = app.add_subcommand("synth", "generate a synthetic deforming-sphere dataset");
  std::string synth_out;
  synth->add_option("--out", synth_out, "output dataset directory")->required();
  add_common(synth, synth_common);

  auto* train_cmd = app.add_subcommand("train", "optimize a model on a dataset");
  std::string train_data, train_out, train_encoder;
  int train_iters = -1;
  train_cmd->add_option("--data", train_data, "dataset directory")->required();
  train_cmd->add_option("--out", train_out, "output directory (checkpoints, loss log)")->required();
  train_cmd->add_option("--encoder", train_encoder,
                        "hash | vertex-baseline | frequency-encoding");
  train_cmd->add_option("--iterations", train_iters, "override train.iterations");
  add_common(train_cmd, train_common);

  auto* render = app.add_subcommand("render", "render images from a checkpoint");
  std::string render_ck, render_data, render_out, render_range, render_poses = "training";
  bool render_hdr = false, render_white = false;
  int render_latent = -1;
  render->add_option("--checkpoint", render_ck)->required();
  render->add_option("--data", render_data, "dataset directory (surfaces, cameras)")->required();
  render->add_option("--out", render_out, "output image directory")->required();
  render->add_option("--frames", render_range, "frame range begin:end (default: all)");
  render->add_option("--poses", render_poses, "training | orbit:N | file:<cameras.json>");
  render->add_flag("--hdr", render_hdr, "write raw float images instead of PNG");
  render->add_flag("--white-bg", render_white, "composite over white for visualization");
  render->add_option("--latent", render_latent, "latent frame override for novel frames");
  add_common(render, render_common);

  auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM against dataset images (mask bbox)");
  std::string eval_ck, eval_data, eval_json, eval_range;
  eval_cmd->add_option("--checkpoint", eval_ck)->required();
  eval_cmd->add_option("--data", eval_data)->required();
  eval_cmd->add_option("--json", eval_json, "JSON report path (default: beside checkpoint)");
  eval_cmd->add_option("--frames", eval_range, "frame range begin:end (default: all)");
  add_common(eval_cmd, eval_common);

  auto* ablate = app.add_subcommand("ablate", "encoder ablation with shared seeds and batches");
  std::string ablate_data, ablate_out, ablate_variants = "hash,vertex-baseline";
  int ablate_budget = 800, ablate_cadence = 25;
  bool ablate_plot = false;
  ablate->add_option("--data", ablate_data)->required();
  ablate->add_option("--out", ablate_out)->required();
  ablate->add_option("--variants", ablate_variants, "comma list of encoder variants");
  ablate->add_option("--budget", ablate_budget, "iterations per variant");
  ablate->add_option("--cadence", ablate_cadence, "curve sampling cadence");
  ablate->add_flag("--plot", ablate_plot, "also write a PSNR curve PNG");
  add_common(ablate, ablate_common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return run_synth(synth_common, synth_out);
    if (train_cmd->parsed())
      return run_train(train_common, train_data, train_out, train_encoder, train_iters);
    if (render->parsed())
      return run_render(render_common, render_ck, render_data, render_out, render_range,
                        render_poses, render_hdr, render_white, render_latent);
    if (eval_cmd->parsed())
      return run_eval(eval_common, eval_ck, eval_data, eval_json, eval_range);
    if (ablate->parsed())
      return run_ablate(ablate_common, ablate_data, ablate_out, ablate_variants, ablate_budget,
                        ablate_cadence, ablate_plot);
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
