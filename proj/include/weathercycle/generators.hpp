// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "weathercycle/autodiff.hpp"
#include "weathercycle/image.hpp"
#include "weathercycle/ldgm.hpp"
#include "weathercycle/params.hpp"

namespace weathercycle {

// Small U-shaped residual conv net: in-conv, `depth` down stages (two convs +
// 2x average pool), a bottleneck conv, mirrored up stages (nearest upsample +
// conv + skip add), out-conv, and a global input residual. Width is constant
// throughout; spatial dims must be divisible by 2^depth. With all parameters
// zero the net is the identity map.
struct NetConfig {
  std::string variant;  // luma_backbone | chroma_codec | recon_net | unified_rgb
  int in_channels = 1;
  int out_channels = 1;
  int base_width = 16;  // >= 4
  int depth = 3;        // >= 1
  int kernel = 3;       // odd

  void validate() const;
};

NetConfig make_net_config(const std::string& variant, int base_width, int depth, int kernel);

void init_unet_params(ParameterSet& ps, const std::string& prefix, const NetConfig& cfg, Rng& rng);
std::size_t unet_param_count(const NetConfig& cfg);
ad::Var unet_forward(const ParameterSet& ps, const std::string& prefix, const NetConfig& cfg,
                     const ad::Var& x);

// Everything the two cycle generators need: per-net configs, the guidance
// module config, and the ablation switches.
struct GeneratorConfig {
  NetConfig luma;     // H_d2c: 1 -> 1
  NetConfig chroma;   // E_d2c: 2 -> 2
  NetConfig recon;    // J_c2d: 3 -> 3
  NetConfig unified;  // replacement restoration net when the decoupling is ablated
  LdgmConfig ldgm;
  double sigma_chroma = 0.02;
  bool no_gd2c = false;  // restoration: drop the Y/CbCr decoupling, use one RGB net
  bool no_gc2d = false;  // re-degradation becomes identity
  bool no_jc2d = false;  // skip the reconstruction net
  bool no_ldgm = false;  // skip luminance guidance
};

GeneratorConfig make_generator_config(int base_width, int depth, int kernel);

// Initializes every parameter the enabled modules need (prefixes `restore/`,
// `redegrade/`, `ldgm/`); gamma takes shape [crop_h, crop_w].
ParameterSet init_params(const GeneratorConfig& cfg, int crop_h, int crop_w, std::uint64_t seed);

// Optional window into redegrade's pre-reconstruction stage.
struct RedegradeTrace {
  Tensor pre_recon;  // recombined RGB before J_c2d and before the final clamp
};

// G_d2c: decompose, restore luminance and chrominance independently,
// recombine, clamp. Differentiable (straight-through clamp).
ad::Var restore_vars(const ParameterSet& ps, const GeneratorConfig& cfg, const ad::Var& rgb);
RgbImage restore(const ParameterSet& ps, const GeneratorConfig& cfg, const RgbImage& degraded);

// G_c2d: chroma Gaussian noise + LDGM-guided luminance + reconstruction net.
// Noise and pool sampling are seeded deterministically from noise_seed.
ad::Var redegrade_vars(const ParameterSet& ps, const GeneratorConfig& cfg, const ad::Var& rgb,
                       const DegradationPool& pool, std::uint64_t noise_seed, double sigma_chroma,
                       RedegradeTrace* trace = nullptr);
RgbImage redegrade(const ParameterSet& ps, const GeneratorConfig& cfg, const RgbImage& clean,
                   const DegradationPool& pool, std::uint64_t noise_seed, double sigma_chroma);

}  // namespace weathercycle
