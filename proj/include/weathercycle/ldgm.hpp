// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "weathercycle/autodiff.hpp"
#include "weathercycle/image.hpp"
#include "weathercycle/params.hpp"

namespace weathercycle {

// Bank of luminance patches drawn from the degraded domain; sampled during
// re-degradation to supply amplitude priors.
struct DegradationPool {
  std::vector<Tensor> patches;  // each [P,P]

  std::size_t size() const { return patches.size(); }
  // Throws unless non-empty with equal-sized square patches.
  void validate() const;
};

struct CtaConfig {
  int lift_channels = 16;  // C >= 2
  int topk = 8;            // 1 <= k <= C
};

struct LdgmConfig {
  CtaConfig cta;
  int filter_hidden = 8;   // width of the degradation-filter 1x1 stack
  int encoder_hidden = 8;  // width of the clean amplitude/phase encoders
};

// Intermediate values exposed for structural tests of the fusion rule.
struct LdgmTrace {
  Tensor d_att;     // CTA output patch
  Tensor d_amp;     // amplitude of the attended patch
  Tensor d_filt;    // sigmoid filter output, before gamma
  Tensor d_mod;     // filtered degradation prior: d_filt * gamma
  Tensor enc_amp;   // encoded clean amplitude
  Tensor enc_pha;   // encoded clean phase
  Tensor fused_amp; // enc_amp * d_mod + enc_amp
};

// Uniform random pool choice, deterministic under seed.
Tensor sample_pool(const DegradationPool& pool, std::uint64_t seed);

// Parameter construction under `prefix` (convs fan-in uniform, projection
// convs of the encoders zero-initialized for an exact identity start, gamma
// all-ones with shape [h,w]).
void init_ldgm_params(ParameterSet& ps, const std::string& prefix, const LdgmConfig& cfg, int h,
                      int w, Rng& rng);
std::size_t ldgm_param_count(const LdgmConfig& cfg, int h, int w);

// Channel top-k attention: lift to C channels, score each channel with
// GAP + linear + sigmoid, keep the k best, scale survivors by their scores,
// project back to one channel.
ad::Var cta_forward(const ParameterSet& ps, const std::string& prefix, const CtaConfig& cfg,
                    const ad::Var& patch);

// Frequency-domain degradation guidance: modulates the clean plane's encoded
// amplitude by a learned, gamma-masked filter of the attended patch's
// amplitude, then inverse-transforms with the encoded clean phase.
ad::Var ldgm_forward(const ParameterSet& ps, const std::string& prefix, const LdgmConfig& cfg,
                     const ad::Var& clean_lum, const ad::Var& patch, LdgmTrace* trace = nullptr);

}  // namespace weathercycle
