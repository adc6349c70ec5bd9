// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "weathercycle/config.hpp"
#include "weathercycle/dacr.hpp"
#include "weathercycle/data_pipeline.hpp"
#include "weathercycle/generators.hpp"
#include "weathercycle/losses.hpp"
#include "weathercycle/params.hpp"

namespace weathercycle {

// Flat training configuration. Every field maps to one `key = value` line;
// serialize() and from_kv() round-trip exactly so a checkpoint can embed its
// full provenance.
struct TrainConfig {
  // data
  std::string data_root = "data";  // expects <data_root>/clean and <data_root>/degraded
  int iterations = 500000;
  int batch = 8;
  int crop = 256;

  // optimizer / schedule
  double lr0 = 2e-4;
  double lr_min = 1e-6;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double grad_clip = 0.0;  // global-norm clip; 0 disables
  std::uint64_t seed = 0;

  // model
  int base_width = 16;
  int depth = 2;
  int kernel = 3;
  int cta_lift = 16;
  int cta_topk = 8;
  double sigma_chroma = 0.02;
  int pool_size = 256;
  int pool_patch = 0;  // 0 means "use crop"

  // losses
  double lambda_cyc = 1.0;
  double lambda_dacr = 0.8;
  double fourier_weight = 0.1;
  double dacr_alpha = 3.0;
  double dacr_beta = 5.0;
  double dacr_tau = 0.1;
  bool dacr_include_positive = false;

  // embedding backends: one feature space for the contrastive loss, one
  // classifier space for difficulty prompts (empty = reuse the feature one)
  std::string embedding_backend = "stub";
  std::string classifier_backend;
  int stub_dim = 64;
  std::string prompt_easy = "a clean sharp photo";
  std::string prompt_hard = "a mildly degraded photo";
  std::string prompt_veryhard = "a severely degraded photo";
  std::string classify_source = "degraded";  // degraded | restored

  // augmentation
  double hflip_prob = 0.5;
  std::vector<int> rot90 = {0, 90, 180, 270};
  double jitter_brightness = 0.1;
  double jitter_contrast = 0.1;
  double jitter_saturation = 0.1;
  bool jitter_degraded = true;

  // ablations
  bool no_gd2c = false;
  bool no_gc2d = false;
  bool no_jc2d = false;
  bool no_ldgm = false;
  bool no_dacr = false;

  // plumbing
  std::string checkpoint_out;
  int checkpoint_every = 0;  // 0 = final checkpoint only
  std::string resume;
  int log_every = 1;

  void validate() const;
  GeneratorConfig generator_config() const;
  AugmentConfig augment_config() const;
  LossWeights loss_weights() const;
  DacrWeights dacr_weights() const;
  std::vector<std::string> prompts() const;
  int effective_pool_patch() const { return pool_patch > 0 ? pool_patch : crop; }

  static TrainConfig from_kv(const KeyValueConfig& kv);
  static TrainConfig load(const std::string& path);
  std::string serialize() const;
};

// Mutable training state: parameters, Adam moments keyed by parameter name,
// and the number of completed steps. All values are float32-snapped doubles.
struct TrainerState {
  TrainConfig config;
  ParameterSet params;
  std::map<std::string, Tensor> m1;
  std::map<std::string, Tensor> m2;
  std::int64_t step = 0;
};

struct StepStats {
  double cycle = 0.0;
  double dacr = 0.0;
  double total = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;  // global L2 norm before clipping
  bool dacr_active = false;
};

// lr_min + 0.5*(lr0 - lr_min)*(1 + cos(pi*step/total)); monotone
// non-increasing over step in [0, total].
double cosine_lr(std::int64_t step, std::int64_t total, double lr0, double lr_min);

TrainerState init_trainer(const TrainConfig& cfg);

// One optimization step over both cycles: restore/redegrade each batch item,
// assemble cycle + difficulty-weighted contrastive losses, backprop, Adam.
StepStats train_step(TrainerState& state, const Batch& batch, const DegradationPool& pool,
                     const EmbeddingBackend& features, const EmbeddingBackend& classifier);

// Versioned checkpoint: a text header (magic line, step, embedded config,
// tensor manifest) followed by raw little-endian float32 buffers. Adam
// moments ride along as <param>.m1 / <param>.m2. No separate RNG state is
// stored; every random stream is derived from (config seed, step index).
void save_checkpoint(const TrainerState& state, const std::string& path);
TrainerState load_checkpoint(const std::string& path);

// Full loop: dataset load, per-epoch degradation-pool refresh, step loop with
// logging, periodic + final checkpoints. Returns the final state. On resume
// the checkpoint's embedded config defines the model and randomness; only
// operational fields (iterations, data_root, checkpointing, logging) are
// taken from `cfg`.
TrainerState run_training(const TrainConfig& cfg, std::ostream& log);

}  // namespace weathercycle
