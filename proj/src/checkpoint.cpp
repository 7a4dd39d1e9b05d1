// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#include <zlib.h>

#include <cstring>
#include <fstream>

#include "selfnerf/config_file.hpp"
#include "selfnerf/training.hpp"

namespace selfnerf {

namespace {

constexpr char kMagic[4] = {'S', 'N', 'R', 'F'};
constexpr std::uint32_t kVersion = 1;

void append_u32(std::string& buf, std::uint32_t v) {
  char b[4] = {char(v), char(v >> 8), char(v >> 16), char(v >> 24)};
  buf.append(b, 4);
}

void append_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(char(v >> (8 * i)));
}

std::uint32_t read_u32(const std::string& buf, std::size_t& off) {
  if (off + 4 > buf.size()) throw ValidationError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(buf[off + i])) << (8 * i);
  off += 4;
  return v;
}

std::uint64_t read_u64(const std::string& buf, std::size_t& off) {
  if (off + 8 > buf.size()) throw ValidationError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(buf[off + i])) << (8 * i);
  off += 8;
  return v;
}

struct FloatWriter {
  std::string& buf;
  std::size_t count = 0;

  void put(double v) {
    float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    append_u32(buf, bits);
    ++count;
  }
  void put_span(const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) put(p[i]);
  }
};

struct FloatReader {
  const std::string& buf;
  std::size_t off;
  std::size_t remaining;

  double get() {
    if (remaining == 0) throw ValidationError("checkpoint blob exhausted");
    std::uint32_t bits = read_u32(buf, off);
    float f;
    std::memcpy(&f, &bits, 4);
    --remaining;
    return f;
  }
  void get_span(double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p[i] = get();
  }
};

const char* encoder_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::kHash: return "hash";
    case EncoderKind::kVertexBaseline: return "vertex-baseline";
    case EncoderKind::kFrequency: return "frequency";
  }
  return "hash";
}

EncoderKind encoder_from_name(const std::string& s) {
  if (s == "hash") return EncoderKind::kHash;
  if (s == "vertex-baseline") return EncoderKind::kVertexBaseline;
  if (s == "frequency") return EncoderKind::kFrequency;
  throw ValidationError("checkpoint: unknown encoder '" + s + "'");
}

KeyValues describe(const Model& model, const Optimizer& opt, const TrainConfig& cfg,
                   const RenderConfig& rcfg, int iteration) {
  KeyValues kv;
  kv.set("encoder", encoder_name(model.encoder));
  kv.set_int("iteration", iteration);
  kv.set_int("adam_steps", opt.steps_taken);
  kv.set_int("frame_count", model.frame_count());
  kv.set_int("knn_k", model.knn_k);
  kv.set_int("freq_bands", model.freq_bands);

  kv.set_int("grid.levels", model.grid_cfg.levels);
  kv.set_int("grid.features", model.grid_cfg.features);
  kv.set_int("grid.table_size", model.grid_cfg.table_size);
  kv.set_int("grid.n_min", model.grid_cfg.n_min);
  kv.set_int("grid.n_max", model.grid_cfg.n_max);
  for (int i = 0; i < 4; ++i)
    kv.set_u64("grid.prime" + std::to_string(i), model.grid_cfg.primes[i]);

  kv.set_int("bank.num_vertices", model.bank_cfg.num_vertices);
  kv.set_int("bank.half_bins", model.bank_cfg.half_bins);
  kv.set_int("bank.feature_dim", model.bank_cfg.feature_dim);
  kv.set_double("bank.d_max", model.bank_cfg.d_max);

  kv.set_int("field.hidden_layers", model.field_cfg.hidden_layers);
  kv.set_int("field.hidden_width", model.field_cfg.hidden_width);
  kv.set_int("field.latent_dim", model.field_cfg.latent_dim);
  kv.set_int("field.feature_dim", model.field_cfg.feature_dim);
  kv.set_bool("field.use_view_dirs", model.field_cfg.use_view_dirs);
  kv.set_int("field.view_freq_bands", model.field_cfg.view_freq_bands);

  const char* axes = "xyz";
  for (int a = 0; a < 3; ++a) {
    kv.set_double(std::string("norm.box_lo_") + axes[a], model.norm.box.lo[a]);
    kv.set_double(std::string("norm.box_hi_") + axes[a], model.norm.box.hi[a]);
  }
  kv.set_double("norm.d_max", model.norm.d_max);

  kv.set_int("render.samples_per_ray", rcfg.samples_per_ray);
  kv.set_double("render.anneal_eta0", rcfg.anneal_eta0);
  kv.set_int("render.anneal_iters", rcfg.anneal_iters);
  kv.set_double("render.box_dilation", rcfg.box_dilation);
  kv.set_bool("render.white_background", rcfg.white_background);

  kv.set_int("train.iterations", cfg.iterations);
  kv.set_int("train.rays_per_batch", cfg.rays_per_batch);
  kv.set_double("train.lambda_mask", cfg.lambda_mask);
  kv.set_double("train.lambda_dist", cfg.lambda_dist);
  kv.set_double("train.beta", cfg.beta);
  kv.set_int("train.lambda_switch_iter", cfg.lambda_switch_iter);
  kv.set_double("train.lambda_early", cfg.lambda_early);
  kv.set_double("train.lambda_late", cfg.lambda_late);
  kv.set_double("train.lr_start", cfg.lr_start);
  kv.set_double("train.lr_end", cfg.lr_end);
  kv.set_double("train.adam_beta1", cfg.adam_beta1);
  kv.set_double("train.adam_beta2", cfg.adam_beta2);
  kv.set_double("train.adam_eps", cfg.adam_eps);
  kv.set_u64("train.seed", cfg.seed);
  kv.set_double("train.in_mask_fraction", cfg.in_mask_fraction);
  kv.set_int("train.checkpoint_every", cfg.checkpoint_every);
  kv.set_bool("train.deterministic", cfg.deterministic);
  kv.set_bool("train.dist_inside_free", cfg.dist_inside_free);
  return kv;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const Optimizer& opt,
                     const TrainConfig& cfg, const RenderConfig& rcfg, int iteration) {
  std::string buf;
  buf.append(kMagic, 4);
  append_u32(buf, kVersion);

  const std::string config = describe(model, opt, cfg, rcfg, iteration).serialize();
  append_u64(buf, config.size());
  buf.append(config);

  std::string blob;
  FloatWriter fw{blob};
  if (model.encoder == EncoderKind::kHash) fw.put_span(model.grid.data.data(), model.grid.data.size());
  if (model.encoder == EncoderKind::kVertexBaseline)
    fw.put_span(model.bank.data.data(), model.bank.data.size());
  for (std::size_t l = 0; l < model.field.mlp.weights.size(); ++l) {
    fw.put_span(model.field.mlp.weights[l].data(), model.field.mlp.weights[l].size());
    fw.put_span(model.field.mlp.biases[l].data(), model.field.mlp.biases[l].size());
  }
  for (const auto& lat : model.field.latents) fw.put_span(lat.data(), lat.size());
  for (const auto* st : {&opt.encoder_state, &opt.mlp_state, &opt.latent_state}) {
    fw.put_span(st->m.data(), st->m.size());
    fw.put_span(st->v.data(), st->v.size());
  }
  append_u64(buf, fw.count);
  buf.append(blob);

  std::uint32_t crc =
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size()));
  append_u32(buf, crc);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for write: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("missing file: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 16 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw ValidationError("not a checkpoint file: " + path);

  std::uint32_t stored_crc = 0;
  {
    std::size_t off = buf.size() - 4;
    stored_crc = read_u32(buf, off);
  }
  std::uint32_t actual_crc =
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size() - 4));
  if (stored_crc != actual_crc) throw ValidationError("checkpoint checksum mismatch: " + path);

  std::size_t off = 4;
  std::uint32_t version = read_u32(buf, off);
  if (version != kVersion)
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));

  std::uint64_t config_len = read_u64(buf, off);
  if (off + config_len > buf.size()) throw ValidationError("checkpoint truncated");
  KeyValues kv = KeyValues::parse(buf.substr(off, config_len));
  off += config_len;

  Checkpoint ck;
  ck.iteration = static_cast<int>(kv.get_int("iteration"));

  Model& m = ck.model;
  m.encoder = encoder_from_name(kv.get("encoder"));
  m.knn_k = static_cast<int>(kv.get_int("knn_k"));
  m.freq_bands = static_cast<int>(kv.get_int("freq_bands"));

  m.grid_cfg.levels = static_cast<int>(kv.get_int("grid.levels"));
  m.grid_cfg.features = static_cast<int>(kv.get_int("grid.features"));
  m.grid_cfg.table_size = static_cast<int>(kv.get_int("grid.table_size"));
  m.grid_cfg.n_min = static_cast<int>(kv.get_int("grid.n_min"));
  m.grid_cfg.n_max = static_cast<int>(kv.get_int("grid.n_max"));
  for (int i = 0; i < 4; ++i)
    m.grid_cfg.primes[i] =
        static_cast<std::uint32_t>(kv.get_u64_or("grid.prime" + std::to_string(i), 0));

  m.bank_cfg.num_vertices = static_cast<int>(kv.get_int("bank.num_vertices"));
  m.bank_cfg.half_bins = static_cast<int>(kv.get_int("bank.half_bins"));
  m.bank_cfg.feature_dim = static_cast<int>(kv.get_int("bank.feature_dim"));
  m.bank_cfg.d_max = kv.get_double("bank.d_max");

  m.field_cfg.hidden_layers = static_cast<int>(kv.get_int("field.hidden_layers"));
  m.field_cfg.hidden_width = static_cast<int>(kv.get_int("field.hidden_width"));
  m.field_cfg.latent_dim = static_cast<int>(kv.get_int("field.latent_dim"));
  m.field_cfg.feature_dim = static_cast<int>(kv.get_int("field.feature_dim"));
  m.field_cfg.use_view_dirs = kv.get_bool_or("field.use_view_dirs", false);
  m.field_cfg.view_freq_bands = static_cast<int>(kv.get_int("field.view_freq_bands"));

  const char* axes = "xyz";
  for (int a = 0; a < 3; ++a) {
    m.norm.box.lo[a] = kv.get_double(std::string("norm.box_lo_") + axes[a]);
    m.norm.box.hi[a] = kv.get_double(std::string("norm.box_hi_") + axes[a]);
  }
  m.norm.d_max = kv.get_double("norm.d_max");

  RenderConfig& rc = ck.render_cfg;
  rc.samples_per_ray = static_cast<int>(kv.get_int("render.samples_per_ray"));
  rc.anneal_eta0 = kv.get_double("render.anneal_eta0");
  rc.anneal_iters = static_cast<int>(kv.get_int("render.anneal_iters"));
  rc.box_dilation = kv.get_double("render.box_dilation");
  rc.white_background = kv.get_bool_or("render.white_background", false);

  TrainConfig& tc = ck.train_cfg;
  tc.iterations = static_cast<int>(kv.get_int("train.iterations"));
  tc.rays_per_batch = static_cast<int>(kv.get_int("train.rays_per_batch"));
  tc.lambda_mask = kv.get_double("train.lambda_mask");
  tc.lambda_dist = kv.get_double("train.lambda_dist");
  tc.beta = kv.get_double("train.beta");
  tc.lambda_switch_iter = static_cast<int>(kv.get_int("train.lambda_switch_iter"));
  tc.lambda_early = kv.get_double("train.lambda_early");
  tc.lambda_late = kv.get_double("train.lambda_late");
  tc.lr_start = kv.get_double("train.lr_start");
  tc.lr_end = kv.get_double("train.lr_end");
  tc.adam_beta1 = kv.get_double("train.adam_beta1");
  tc.adam_beta2 = kv.get_double("train.adam_beta2");
  tc.adam_eps = kv.get_double("train.adam_eps");
  tc.seed = kv.get_u64_or("train.seed", 0);
  tc.in_mask_fraction = kv.get_double("train.in_mask_fraction");
  tc.checkpoint_every = static_cast<int>(kv.get_int("train.checkpoint_every"));
  tc.deterministic = kv.get_bool_or("train.deterministic", false);
  tc.dist_inside_free = kv.get_bool_or("train.dist_inside_free", false);

  const int frame_count = static_cast<int>(kv.get_int("frame_count"));

  std::uint64_t float_count = read_u64(buf, off);
  FloatReader fr{buf, off, float_count};

  if (m.encoder == EncoderKind::kHash) {
    m.grid.cfg = m.grid_cfg;
    m.grid.resolutions = level_resolutions(m.grid_cfg);
    m.grid.data.resize(std::size_t(m.grid_cfg.levels) * m.grid_cfg.table_size * m.grid_cfg.features);
    fr.get_span(m.grid.data.data(), m.grid.data.size());
  } else if (m.encoder == EncoderKind::kVertexBaseline) {
    m.bank.cfg = m.bank_cfg;
    m.bank.data.resize(std::size_t(m.bank_cfg.num_vertices) * m.bank_cfg.bins_total() *
                       m.bank_cfg.feature_dim);
    fr.get_span(m.bank.data.data(), m.bank.data.size());
  }

  m.field = init_params(m.field_cfg, frame_count, 0);
  for (std::size_t l = 0; l < m.field.mlp.weights.size(); ++l) {
    fr.get_span(m.field.mlp.weights[l].data(), m.field.mlp.weights[l].size());
    fr.get_span(m.field.mlp.biases[l].data(), m.field.mlp.biases[l].size());
  }
  for (auto& lat : m.field.latents) fr.get_span(lat.data(), lat.size());

  ck.opt = Optimizer::like(m);
  ck.opt.steps_taken = static_cast<int>(kv.get_int("adam_steps"));
  for (auto* st : {&ck.opt.encoder_state, &ck.opt.mlp_state, &ck.opt.latent_state}) {
    fr.get_span(st->m.data(), st->m.size());
    fr.get_span(st->v.data(), st->v.size());
  }
  if (fr.remaining != 0) throw ValidationError("checkpoint blob has trailing data: " + path);
  return ck;
}

}  // namespace selfnerf
