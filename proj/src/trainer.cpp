// SPDX-License-Identifier: Apache-2.0
#include "weathercycle/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include "weathercycle/errors.hpp"
#include "weathercycle/image_io.hpp"

namespace weathercycle {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kAdamEps = 1e-8;
constexpr char kCheckpointMagic[] = "weathercycle-checkpoint v1";

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (iterations < 1) throw UsageError("config: iterations must be >= 1");
  if (batch < 1) throw UsageError("config: batch must be >= 1");
  if (crop < 8) throw UsageError("config: crop must be >= 8");
  if (lr_min < 0 || lr0 <= lr_min) throw UsageError("config: need lr0 > lr_min >= 0");
  if (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 || adam_beta2 >= 1) {
    throw UsageError("config: adam betas must lie in [0,1)");
  }
  if (grad_clip < 0) throw UsageError("config: grad_clip must be >= 0");
  if (base_width < 4) throw UsageError("config: base_width must be >= 4");
  if (depth < 1) throw UsageError("config: depth must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw UsageError("config: kernel must be odd and >= 1");
  if (crop % (1 << depth) != 0) {
    throw UsageError("config: crop must be divisible by 2^depth");
  }
  if (cta_lift < 2) throw UsageError("config: cta_lift must be >= 2");
  if (cta_topk < 1 || cta_topk > cta_lift) {
    throw UsageError("config: cta_topk must lie in [1, cta_lift]");
  }
  if (sigma_chroma < 0) throw UsageError("config: sigma_chroma must be >= 0");
  if (pool_size < 1) throw UsageError("config: pool_size must be >= 1");
  if (pool_patch != 0 && pool_patch < 8) throw UsageError("config: pool_patch must be 0 or >= 8");
  try {  // uniform reporting: a bad config value is a usage problem
    loss_weights().validate();
    dacr_weights().validate();
    augment_config().validate();
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  if (stub_dim < 4) throw UsageError("config: stub_dim must be >= 4");
  if (embedding_backend.empty()) throw UsageError("config: embedding_backend must be set");
  if (classify_source != "degraded" && classify_source != "restored") {
    throw UsageError("config: classify_source must be 'degraded' or 'restored'");
  }
  if (checkpoint_every < 0) throw UsageError("config: checkpoint_every must be >= 0");
  if (log_every < 1) throw UsageError("config: log_every must be >= 1");
}

GeneratorConfig TrainConfig::generator_config() const {
  GeneratorConfig gen = make_generator_config(base_width, depth, kernel);
  gen.ldgm.cta.lift_channels = cta_lift;
  gen.ldgm.cta.topk = cta_topk;
  gen.sigma_chroma = sigma_chroma;
  gen.no_gd2c = no_gd2c;
  gen.no_gc2d = no_gc2d;
  gen.no_jc2d = no_jc2d;
  gen.no_ldgm = no_ldgm;
  return gen;
}

AugmentConfig TrainConfig::augment_config() const {
  AugmentConfig aug;
  aug.hflip_prob = hflip_prob;
  aug.rot90_choices = rot90;
  aug.jitter_brightness = jitter_brightness;
  aug.jitter_contrast = jitter_contrast;
  aug.jitter_saturation = jitter_saturation;
  aug.jitter_degraded = jitter_degraded;
  return aug;
}

LossWeights TrainConfig::loss_weights() const {
  LossWeights w;
  w.lambda_cyc = lambda_cyc;
  w.lambda_dacr = lambda_dacr;
  w.fourier_weight = fourier_weight;
  return w;
}

DacrWeights TrainConfig::dacr_weights() const {
  DacrWeights w;
  w.alpha = dacr_alpha;
  w.beta = dacr_beta;
  w.tau = dacr_tau;
  return w;
}

std::vector<std::string> TrainConfig::prompts() const {
  return {prompt_easy, prompt_hard, prompt_veryhard};
}

TrainConfig TrainConfig::from_kv(const KeyValueConfig& kv) {
  TrainConfig d;  // defaults
  TrainConfig c;
  c.data_root = kv.get_string("data_root", d.data_root);
  c.iterations = static_cast<int>(kv.get_int("iterations", d.iterations));
  c.batch = static_cast<int>(kv.get_int("batch", d.batch));
  c.crop = static_cast<int>(kv.get_int("crop", d.crop));
  c.lr0 = kv.get_double("lr0", d.lr0);
  c.lr_min = kv.get_double("lr_min", d.lr_min);
  c.adam_beta1 = kv.get_double("adam_beta1", d.adam_beta1);
  c.adam_beta2 = kv.get_double("adam_beta2", d.adam_beta2);
  c.grad_clip = kv.get_double("grad_clip", d.grad_clip);
  c.seed = kv.get_uint("seed", d.seed);
  c.base_width = static_cast<int>(kv.get_int("base_width", d.base_width));
  c.depth = static_cast<int>(kv.get_int("depth", d.depth));
  c.kernel = static_cast<int>(kv.get_int("kernel", d.kernel));
  c.cta_lift = static_cast<int>(kv.get_int("cta_lift", d.cta_lift));
  c.cta_topk = static_cast<int>(kv.get_int("cta_topk", d.cta_topk));
  c.sigma_chroma = kv.get_double("sigma_chroma", d.sigma_chroma);
  c.pool_size = static_cast<int>(kv.get_int("pool_size", d.pool_size));
  c.pool_patch = static_cast<int>(kv.get_int("pool_patch", d.pool_patch));
  c.lambda_cyc = kv.get_double("lambda_cyc", d.lambda_cyc);
  c.lambda_dacr = kv.get_double("lambda_dacr", d.lambda_dacr);
  c.fourier_weight = kv.get_double("fourier_weight", d.fourier_weight);
  c.dacr_alpha = kv.get_double("dacr_alpha", d.dacr_alpha);
  c.dacr_beta = kv.get_double("dacr_beta", d.dacr_beta);
  c.dacr_tau = kv.get_double("dacr_tau", d.dacr_tau);
  c.dacr_include_positive = kv.get_bool("dacr_include_positive", d.dacr_include_positive);
  c.embedding_backend = kv.get_string("embedding_backend", d.embedding_backend);
  c.classifier_backend = kv.get_string("classifier_backend", d.classifier_backend);
  c.stub_dim = static_cast<int>(kv.get_int("stub_dim", d.stub_dim));
  c.prompt_easy = kv.get_string("prompt_easy", d.prompt_easy);
  c.prompt_hard = kv.get_string("prompt_hard", d.prompt_hard);
  c.prompt_veryhard = kv.get_string("prompt_veryhard", d.prompt_veryhard);
  c.classify_source = kv.get_string("classify_source", d.classify_source);
  c.hflip_prob = kv.get_double("hflip_prob", d.hflip_prob);
  c.rot90 = kv.get_int_list("rot90", d.rot90);
  c.jitter_brightness = kv.get_double("jitter_brightness", d.jitter_brightness);
  c.jitter_contrast = kv.get_double("jitter_contrast", d.jitter_contrast);
  c.jitter_saturation = kv.get_double("jitter_saturation", d.jitter_saturation);
  c.jitter_degraded = kv.get_bool("jitter_degraded", d.jitter_degraded);
  c.no_gd2c = kv.get_bool("no_gd2c", d.no_gd2c);
  c.no_gc2d = kv.get_bool("no_gc2d", d.no_gc2d);
  c.no_jc2d = kv.get_bool("no_jc2d", d.no_jc2d);
  c.no_ldgm = kv.get_bool("no_ldgm", d.no_ldgm);
  c.no_dacr = kv.get_bool("no_dacr", d.no_dacr);
  c.checkpoint_out = kv.get_string("checkpoint_out", d.checkpoint_out);
  c.checkpoint_every = static_cast<int>(kv.get_int("checkpoint_every", d.checkpoint_every));
  c.resume = kv.get_string("resume", d.resume);
  c.log_every = static_cast<int>(kv.get_int("log_every", d.log_every));

  const std::vector<std::string> known = {
      "data_root",        "iterations",      "batch",
      "crop",             "lr0",             "lr_min",
      "adam_beta1",       "adam_beta2",      "grad_clip",
      "seed",             "base_width",      "depth",
      "kernel",           "cta_lift",        "cta_topk",
      "sigma_chroma",     "pool_size",       "pool_patch",
      "lambda_cyc",       "lambda_dacr",     "fourier_weight",
      "dacr_alpha",       "dacr_beta",       "dacr_tau",
      "dacr_include_positive", "embedding_backend", "classifier_backend",
      "stub_dim",         "prompt_easy",     "prompt_hard",
      "prompt_veryhard",  "classify_source", "hflip_prob",
      "rot90",            "jitter_brightness", "jitter_contrast",
      "jitter_saturation", "jitter_degraded", "no_gd2c",
      "no_gc2d",          "no_jc2d",         "no_ldgm",
      "no_dacr",          "checkpoint_out",  "checkpoint_every",
      "resume",           "log_every"};
  const std::vector<std::string> unknown = kv.unknown_keys(known);
  if (!unknown.empty()) {
    std::string msg = "config: unknown key(s):";
    for (const std::string& k : unknown) msg += " " + k;
    throw UsageError(msg);
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::string& path) {
  return from_kv(KeyValueConfig::load(path));
}

std::string TrainConfig::serialize() const {
  std::ostringstream out;
  out << "data_root = " << data_root << "\n";
  out << "iterations = " << iterations << "\n";
  out << "batch = " << batch << "\n";
  out << "crop = " << crop << "\n";
  out << "lr0 = " << format_double(lr0) << "\n";
  out << "lr_min = " << format_double(lr_min) << "\n";
  out << "adam_beta1 = " << format_double(adam_beta1) << "\n";
  out << "adam_beta2 = " << format_double(adam_beta2) << "\n";
  out << "grad_clip = " << format_double(grad_clip) << "\n";
  out << "seed = " << seed << "\n";
  out << "base_width = " << base_width << "\n";
  out << "depth = " << depth << "\n";
  out << "kernel = " << kernel << "\n";
  out << "cta_lift = " << cta_lift << "\n";
  out << "cta_topk = " << cta_topk << "\n";
  out << "sigma_chroma = " << format_double(sigma_chroma) << "\n";
  out << "pool_size = " << pool_size << "\n";
  out << "pool_patch = " << pool_patch << "\n";
  out << "lambda_cyc = " << format_double(lambda_cyc) << "\n";
  out << "lambda_dacr = " << format_double(lambda_dacr) << "\n";
  out << "fourier_weight = " << format_double(fourier_weight) << "\n";
  out << "dacr_alpha = " << format_double(dacr_alpha) << "\n";
  out << "dacr_beta = " << format_double(dacr_beta) << "\n";
  out << "dacr_tau = " << format_double(dacr_tau) << "\n";
  out << "dacr_include_positive = " << (dacr_include_positive ? "true" : "false") << "\n";
  out << "embedding_backend = " << embedding_backend << "\n";
  out << "classifier_backend = " << classifier_backend << "\n";
  out << "stub_dim = " << stub_dim << "\n";
  out << "prompt_easy = " << prompt_easy << "\n";
  out << "prompt_hard = " << prompt_hard << "\n";
  out << "prompt_veryhard = " << prompt_veryhard << "\n";
  out << "classify_source = " << classify_source << "\n";
  out << "hflip_prob = " << format_double(hflip_prob) << "\n";
  out << "rot90 = " << join_ints(rot90) << "\n";
  out << "jitter_brightness = " << format_double(jitter_brightness) << "\n";
  out << "jitter_contrast = " << format_double(jitter_contrast) << "\n";
  out << "jitter_saturation = " << format_double(jitter_saturation) << "\n";
  out << "jitter_degraded = " << (jitter_degraded ? "true" : "false") << "\n";
  out << "no_gd2c = " << (no_gd2c ? "true" : "false") << "\n";
  out << "no_gc2d = " << (no_gc2d ? "true" : "false") << "\n";
  out << "no_jc2d = " << (no_jc2d ? "true" : "false") << "\n";
  out << "no_ldgm = " << (no_ldgm ? "true" : "false") << "\n";
  out << "no_dacr = " << (no_dacr ? "true" : "false") << "\n";
  out << "checkpoint_out = " << checkpoint_out << "\n";
  out << "checkpoint_every = " << checkpoint_every << "\n";
  out << "resume = " << resume << "\n";
  out << "log_every = " << log_every << "\n";
  return out.str();
}

double cosine_lr(std::int64_t step, std::int64_t total, double lr0, double lr_min) {
  if (total < 1) throw DataError("cosine_lr: total must be >= 1");
  if (step < 0 || step > total) throw DataError("cosine_lr: step outside [0, total]");
  const double frac = static_cast<double>(step) / static_cast<double>(total);
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(kPi * frac));
}

TrainerState init_trainer(const TrainConfig& cfg) {
  cfg.validate();
  TrainerState state;
  state.config = cfg;
  state.params = init_params(cfg.generator_config(), cfg.crop, cfg.crop, cfg.seed);
  for (const auto& [name, var] : state.params) {
    state.m1.emplace(name, Tensor(var.value().shape()));
    state.m2.emplace(name, Tensor(var.value().shape()));
  }
  state.step = 0;
  return state;
}

StepStats train_step(TrainerState& state, const Batch& batch, const DegradationPool& pool,
                     const EmbeddingBackend& features, const EmbeddingBackend& classifier) {
  const TrainConfig& cfg = state.config;
  const GeneratorConfig gen = cfg.generator_config();
  const int b_count = static_cast<int>(batch.degraded.size());
  if (b_count < 1 || batch.clean.size() != batch.degraded.size()) {
    throw DataError("train_step: batch must hold equally many clean and degraded crops");
  }

  state.params.zero_grads();

  std::vector<ad::Var> d_in, c_in, restored;
  d_in.reserve(static_cast<std::size_t>(b_count));
  c_in.reserve(static_cast<std::size_t>(b_count));
  restored.reserve(static_cast<std::size_t>(b_count));
  for (int b = 0; b < b_count; ++b) {
    d_in.push_back(ad::Var::constant(batch.degraded[static_cast<std::size_t>(b)]));
    c_in.push_back(ad::Var::constant(batch.clean[static_cast<std::size_t>(b)]));
  }

  // Both cycles per item: D -> C -> D and C -> D -> C.
  ad::Var cyc_sum = ad::Var::scalar(0.0);
  for (int b = 0; b < b_count; ++b) {
    const std::uint64_t step_u = static_cast<std::uint64_t>(state.step);
    const std::uint64_t item_u = static_cast<std::uint64_t>(b);
    const std::uint64_t seed_d = derive_seed(cfg.seed, {kStreamNoise, step_u, item_u, 1});
    const std::uint64_t seed_c = derive_seed(cfg.seed, {kStreamNoise, step_u, item_u, 2});

    ad::Var c_d2c = restore_vars(state.params, gen, d_in[static_cast<std::size_t>(b)]);
    ad::Var d_cyc = redegrade_vars(state.params, gen, c_d2c, pool, seed_d, cfg.sigma_chroma);
    ad::Var d_c2d =
        redegrade_vars(state.params, gen, c_in[static_cast<std::size_t>(b)], pool, seed_c,
                       cfg.sigma_chroma);
    ad::Var c_cyc = restore_vars(state.params, gen, d_c2d);

    ad::Var term = cycle_loss_vars(d_cyc, d_in[static_cast<std::size_t>(b)], c_cyc,
                                   c_in[static_cast<std::size_t>(b)], cfg.fourier_weight);
    if (!std::isfinite(term.item())) {
      throw NumericError("train_step: cycle loss non-finite at batch index " + std::to_string(b));
    }
    cyc_sum = ad::add(cyc_sum, term);
    restored.push_back(std::move(c_d2c));
  }
  ad::Var l_cyc = ad::mul_scalar(cyc_sum, 1.0 / b_count);

  // Contrastive term: restored outputs anchor against clean positives and
  // difficulty-weighted degraded negatives. The hard set holds the anchors
  // whose classified difficulty is above easy.
  ad::Var l_dacr = ad::Var::scalar(0.0);
  bool dacr_active = false;
  if (!cfg.no_dacr) {
    const std::vector<std::string> prompt_list = cfg.prompts();
    std::vector<std::pair<ad::Var, DifficultyLabel>> negatives;
    std::vector<int> hard_set;
    negatives.reserve(static_cast<std::size_t>(b_count));
    for (int b = 0; b < b_count; ++b) {
      RgbImage probe(cfg.classify_source == "restored"
                         ? restored[static_cast<std::size_t>(b)].value()
                         : batch.degraded[static_cast<std::size_t>(b)]);
      DifficultyLabel label = classify_difficulty(classifier, probe, prompt_list);
      if (label.level != Difficulty::kEasyNeg) hard_set.push_back(b);
      negatives.emplace_back(d_in[static_cast<std::size_t>(b)], std::move(label));
    }
    bool empty_hard_set = false;
    l_dacr = dacr_loss_vars(features, restored, c_in, negatives, cfg.dacr_weights(), hard_set,
                            cfg.dacr_include_positive, &empty_hard_set);
    dacr_active = !empty_hard_set;
    if (!std::isfinite(l_dacr.item())) {
      throw NumericError("train_step: dacr loss non-finite");
    }
  }

  ad::Var total = total_loss_vars(l_cyc, l_dacr, cfg.loss_weights());
  ad::backward(total);

  StepStats stats;
  stats.cycle = l_cyc.item();
  stats.dacr = l_dacr.item();
  stats.total = total.item();
  stats.dacr_active = dacr_active;
  stats.lr = cosine_lr(state.step, cfg.iterations, cfg.lr0, cfg.lr_min);

  double grad_sq = 0.0;
  for (const auto& [name, var] : state.params) {
    if (!var.has_grad()) continue;
    const Tensor& g = var.grad();
    for (std::size_t i = 0; i < g.size(); ++i) grad_sq += g[i] * g[i];
  }
  stats.grad_norm = std::sqrt(grad_sq);
  if (!std::isfinite(stats.grad_norm)) throw NumericError("train_step: gradient norm non-finite");
  double scale = 1.0;
  if (cfg.grad_clip > 0 && stats.grad_norm > cfg.grad_clip) {
    scale = cfg.grad_clip / stats.grad_norm;
  }

  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double t = static_cast<double>(state.step + 1);
  const double corr1 = 1.0 - std::pow(b1, t);
  const double corr2 = 1.0 - std::pow(b2, t);
  for (auto& [name, var] : state.params) {
    Tensor& m1 = state.m1.at(name);
    Tensor& m2 = state.m2.at(name);
    Tensor& p = var.mutable_value();
    const bool has_g = var.has_grad();
    const Tensor* g = has_g ? &var.grad() : nullptr;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = has_g ? (*g)[i] * scale : 0.0;
      m1[i] = b1 * m1[i] + (1.0 - b1) * gi;
      m2[i] = b2 * m2[i] + (1.0 - b2) * gi * gi;
      p[i] -= stats.lr * (m1[i] / corr1) / (std::sqrt(m2[i] / corr2) + kAdamEps);
    }
    snap_tensor_f32(m1);
    snap_tensor_f32(m2);
    snap_tensor_f32(p);
  }
  state.step += 1;
  return stats;
}

namespace {

void append_f32_le(std::string& blob, double v) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  blob.push_back(static_cast<char>(bits & 0xff));
  blob.push_back(static_cast<char>((bits >> 8) & 0xff));
  blob.push_back(static_cast<char>((bits >> 16) & 0xff));
  blob.push_back(static_cast<char>((bits >> 24) & 0xff));
}

double read_f32_le(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  return static_cast<double>(std::bit_cast<float>(bits));
}

struct ManifestEntry {
  std::string name;
  std::vector<int> dims;
  std::size_t offset = 0;  // bytes into the blob
};

void append_tensor(std::ostringstream& manifest, std::string& blob, const std::string& name,
                   const Tensor& t) {
  manifest << name << " f32 " << t.rank();
  for (std::size_t i = 0; i < t.rank(); ++i) manifest << " " << t.dim(i);
  manifest << " offset " << blob.size() << "\n";
  for (std::size_t i = 0; i < t.size(); ++i) append_f32_le(blob, t[i]);
}

}  // namespace

void save_checkpoint(const TrainerState& state, const std::string& path) {
  std::ostringstream manifest;
  std::string blob;
  std::size_t count = 0;
  for (const auto& [name, var] : state.params) {
    append_tensor(manifest, blob, name, var.value());
    append_tensor(manifest, blob, name + ".m1", state.m1.at(name));
    append_tensor(manifest, blob, name + ".m2", state.m2.at(name));
    count += 3;
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out << kCheckpointMagic << "\n";
  out << "step " << state.step << "\n";
  out << "config-begin\n" << state.config.serialize() << "config-end\n";
  out << "tensors " << count << "\n";
  out << manifest.str();
  out << "blob-bytes " << blob.size() << "\n";
  out << "end-header\n";
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw DataError("checkpoint write failed: " + path);
}

TrainerState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  // Version-check the first line before anything else so a foreign file is a
  // version error, not a truncation error.
  {
    const std::size_t eol = raw.find('\n');
    const std::string first = raw.substr(0, eol == std::string::npos ? raw.size() : eol);
    if (first != kCheckpointMagic) {
      throw CheckpointVersionError("unsupported checkpoint version: '" + first + "' (expected '" +
                                   kCheckpointMagic + "')");
    }
  }

  const std::string terminator = "end-header\n";
  const std::size_t header_end = raw.find(terminator);
  if (header_end == std::string::npos) {
    throw CheckpointTruncatedError("checkpoint header terminator missing: " + path);
  }
  std::istringstream header(raw.substr(0, header_end));
  const std::size_t blob_start = header_end + terminator.size();

  std::string line;
  if (!std::getline(header, line) || line != kCheckpointMagic) {
    throw CheckpointVersionError("unsupported checkpoint version: '" + line + "' (expected '" +
                                 kCheckpointMagic + "')");
  }

  std::int64_t step = -1;
  {
    std::string word;
    if (!std::getline(header, line)) throw CheckpointTruncatedError("checkpoint missing step line");
    std::istringstream ls(line);
    if (!(ls >> word >> step) || word != "step" || step < 0) {
      throw DataError("checkpoint step line malformed: " + line);
    }
  }

  if (!std::getline(header, line) || line != "config-begin") {
    throw DataError("checkpoint config block missing");
  }
  std::string config_text;
  bool config_closed = false;
  while (std::getline(header, line)) {
    if (line == "config-end") {
      config_closed = true;
      break;
    }
    config_text += line + "\n";
  }
  if (!config_closed) throw CheckpointTruncatedError("checkpoint config block unterminated");

  std::size_t tensor_count = 0;
  {
    std::string word;
    if (!std::getline(header, line)) throw CheckpointTruncatedError("checkpoint manifest missing");
    std::istringstream ls(line);
    if (!(ls >> word >> tensor_count) || word != "tensors") {
      throw DataError("checkpoint manifest count malformed: " + line);
    }
  }

  std::vector<ManifestEntry> entries;
  entries.reserve(tensor_count);
  for (std::size_t i = 0; i < tensor_count; ++i) {
    if (!std::getline(header, line)) {
      throw CheckpointTruncatedError("checkpoint manifest ends early at entry " +
                                     std::to_string(i));
    }
    std::istringstream ls(line);
    ManifestEntry e;
    std::string dtype, offset_word;
    std::size_t rank = 0;
    if (!(ls >> e.name >> dtype >> rank)) throw DataError("checkpoint manifest line malformed: " + line);
    if (dtype != "f32") throw DataError("checkpoint dtype unsupported: " + dtype);
    e.dims.resize(rank);
    for (std::size_t r = 0; r < rank; ++r) {
      if (!(ls >> e.dims[r]) || e.dims[r] < 1) {
        throw DataError("checkpoint manifest dims malformed: " + line);
      }
    }
    if (!(ls >> offset_word >> e.offset) || offset_word != "offset") {
      throw DataError("checkpoint manifest offset malformed: " + line);
    }
    entries.push_back(std::move(e));
  }

  std::size_t blob_bytes = 0;
  {
    std::string word;
    if (!std::getline(header, line)) throw CheckpointTruncatedError("checkpoint blob size missing");
    std::istringstream ls(line);
    if (!(ls >> word >> blob_bytes) || word != "blob-bytes") {
      throw DataError("checkpoint blob size malformed: " + line);
    }
  }
  if (raw.size() - blob_start < blob_bytes) {
    throw CheckpointTruncatedError("checkpoint blob truncated: have " +
                                   std::to_string(raw.size() - blob_start) + " of " +
                                   std::to_string(blob_bytes) + " bytes");
  }
  const unsigned char* blob = reinterpret_cast<const unsigned char*>(raw.data()) + blob_start;

  TrainerState state = init_trainer(TrainConfig::from_kv(KeyValueConfig::parse(config_text)));
  state.step = step;

  std::set<std::string> loaded;
  for (const ManifestEntry& e : entries) {
    Tensor* target = nullptr;
    std::string base = e.name;
    if (base.size() > 3 && base.compare(base.size() - 3, 3, ".m1") == 0) {
      base.resize(base.size() - 3);
      auto it = state.m1.find(base);
      if (it != state.m1.end()) target = &it->second;
    } else if (base.size() > 3 && base.compare(base.size() - 3, 3, ".m2") == 0) {
      base.resize(base.size() - 3);
      auto it = state.m2.find(base);
      if (it != state.m2.end()) target = &it->second;
    } else if (state.params.has(base)) {
      target = &state.params.get_mutable(base).mutable_value();
    }
    if (target == nullptr) {
      throw CheckpointShapeError("checkpoint tensor '" + e.name +
                                 "' does not exist in the configured model");
    }
    if (target->shape() != e.dims) {
      throw CheckpointShapeError("checkpoint tensor '" + e.name + "' has shape " +
                                 Tensor(e.dims).shape_str() + " but the model expects " +
                                 target->shape_str());
    }
    const std::size_t bytes = target->size() * 4;
    if (e.offset + bytes > blob_bytes) {
      throw CheckpointTruncatedError("checkpoint tensor '" + e.name + "' overruns the blob");
    }
    for (std::size_t i = 0; i < target->size(); ++i) {
      (*target)[i] = read_f32_le(blob + e.offset + i * 4);
    }
    loaded.insert(e.name);
  }

  for (const auto& [name, var] : state.params) {
    (void)var;
    if (!loaded.count(name) || !loaded.count(name + ".m1") || !loaded.count(name + ".m2")) {
      throw CheckpointShapeError("checkpoint is missing tensor '" + name + "'");
    }
  }
  return state;
}

TrainerState run_training(const TrainConfig& cfg, std::ostream& log) {
  cfg.validate();
  TrainerState state;
  if (!cfg.resume.empty()) {
    state = load_checkpoint(cfg.resume);
    state.config.iterations = cfg.iterations;
    state.config.data_root = cfg.data_root;
    state.config.checkpoint_out = cfg.checkpoint_out;
    state.config.checkpoint_every = cfg.checkpoint_every;
    state.config.log_every = cfg.log_every;
    state.config.resume = cfg.resume;
  } else {
    state = init_trainer(cfg);
  }
  const TrainConfig& tc = state.config;

  UnpairedDataset ds = load_unpaired(tc.data_root + "/clean", tc.data_root + "/degraded", tc.crop);
  ds.epoch_seed = tc.seed;
  const AugmentConfig aug = tc.augment_config();
  std::shared_ptr<EmbeddingBackend> features = make_backend(tc.embedding_backend, tc.stub_dim);
  std::shared_ptr<EmbeddingBackend> classifier =
      tc.classifier_backend.empty() ? features : make_backend(tc.classifier_backend, tc.stub_dim);

  const std::size_t larger_domain = std::max(ds.clean_paths.size(), ds.degraded_paths.size());
  const std::int64_t epoch_len = std::max<std::int64_t>(
      1, static_cast<std::int64_t>((larger_domain + tc.batch - 1) / tc.batch));

  DegradationPool pool;
  std::int64_t pool_epoch = -1;
  for (std::int64_t s = state.step; s < tc.iterations; ++s) {
    const std::int64_t epoch = s / epoch_len;
    if (epoch != pool_epoch) {
      pool = build_pool(ds, tc.pool_size, tc.effective_pool_patch(),
                        derive_seed(tc.seed, {kStreamPool, static_cast<std::uint64_t>(epoch)}));
      pool_epoch = epoch;
    }
    Batch batch = sample_batch(ds, aug, tc.batch, static_cast<std::uint64_t>(s));
    StepStats st = train_step(state, batch, pool, *features, *classifier);
    if ((s + 1) % tc.log_every == 0 || s == 0 || s + 1 == tc.iterations) {
      log << "step " << (s + 1) << "/" << tc.iterations << " lr " << format_double(st.lr)
          << " cycle " << format_double(st.cycle) << " dacr " << format_double(st.dacr)
          << " total " << format_double(st.total) << "\n";
      log.flush();
    }
    if (!tc.checkpoint_out.empty() && tc.checkpoint_every > 0 &&
        (s + 1) % tc.checkpoint_every == 0) {
      save_checkpoint(state, tc.checkpoint_out);
    }
  }
  if (!tc.checkpoint_out.empty()) save_checkpoint(state, tc.checkpoint_out);
  return state;
}

}  // namespace weathercycle
