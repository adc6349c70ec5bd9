// SPDX-License-Identifier: Apache-2.0
#include "weathercycle/ldgm.hpp"

#include "weathercycle/errors.hpp"

namespace weathercycle {

void DegradationPool::validate() const {
  if (patches.empty()) throw DataError("DegradationPool: empty pool");
  const Tensor& first = patches.front();
  if (first.rank() != 2 || first.dim(0) != first.dim(1)) {
    throw DataError("DegradationPool: patches must be square [P,P] planes");
  }
  for (const Tensor& p : patches) {
    if (!p.same_shape(first)) throw DataError("DegradationPool: patch size mismatch");
  }
}

Tensor sample_pool(const DegradationPool& pool, std::uint64_t seed) {
  pool.validate();
  Rng rng(derive_seed(seed, {kStreamPool}));
  return pool.patches[rng.next_index(static_cast<int>(pool.size()))];
}

namespace {
constexpr double kLeakySlope = 0.2;

ad::Var conv_block(const ParameterSet& ps, const std::string& name, const ad::Var& x) {
  return ad::conv2d(x, ps.get(name + ".w"), ps.get(name + ".b"));
}

// enc(x) = x + proj(leaky(lift(x))); proj is zero-initialized, so the encoder
// starts as an exact identity.
ad::Var residual_encoder(const ParameterSet& ps, const std::string& name, const ad::Var& plane) {
  ad::Var x = ad::stack_channels({plane});
  ad::Var h = ad::leaky_relu(conv_block(ps, name + ".a", x), kLeakySlope);
  ad::Var r = conv_block(ps, name + ".b", h);
  return ad::add(plane, ad::slice_channel(r, 0));
}
}  // namespace

void init_ldgm_params(ParameterSet& ps, const std::string& prefix, const LdgmConfig& cfg, int h,
                      int w, Rng& rng) {
  const int c = cfg.cta.lift_channels;
  if (c < 2) throw DataError("CtaConfig: lift_channels must be >= 2");
  if (cfg.cta.topk < 1 || cfg.cta.topk > c) throw DataError("CtaConfig: topk must be in [1, C]");
  ps.add(prefix + "cta.lift.w", conv_weight_init(c, 1, 3, rng));
  ps.add(prefix + "cta.lift.b", Tensor({c}));
  ps.add(prefix + "cta.score.w", linear_weight_init(c, c, rng));
  ps.add(prefix + "cta.score.b", Tensor({c}));
  ps.add(prefix + "cta.proj.w", conv_weight_init(1, c, 1, rng));
  ps.add(prefix + "cta.proj.b", Tensor({1}));

  const int f = cfg.filter_hidden;
  ps.add(prefix + "filter.a.w", conv_weight_init(f, 1, 1, rng));
  ps.add(prefix + "filter.a.b", Tensor({f}));
  ps.add(prefix + "filter.b.w", conv_weight_init(1, f, 1, rng));
  ps.add(prefix + "filter.b.b", Tensor({1}));

  const int e = cfg.encoder_hidden;
  for (const char* enc : {"enc_amp", "enc_pha"}) {
    ps.add(prefix + std::string(enc) + ".a.w", conv_weight_init(e, 1, 1, rng));
    ps.add(prefix + std::string(enc) + ".a.b", Tensor({e}));
    ps.add(prefix + std::string(enc) + ".b.w", Tensor({1, e, 1, 1}));  // zero: identity start
    ps.add(prefix + std::string(enc) + ".b.b", Tensor({1}));
  }

  ps.add(prefix + "gamma", Tensor({h, w}, 1.0));
}

std::size_t ldgm_param_count(const LdgmConfig& cfg, int h, int w) {
  const std::size_t c = cfg.cta.lift_channels, f = cfg.filter_hidden, e = cfg.encoder_hidden;
  std::size_t n = 0;
  n += c * 9 + c;          // cta.lift
  n += c * c + c;          // cta.score
  n += c + 1;              // cta.proj
  n += f + f + f + 1;      // filter 1x1 pair
  n += 2 * (e + e + e + 1);  // two encoders
  n += static_cast<std::size_t>(h) * w;  // gamma
  return n;
}

ad::Var cta_forward(const ParameterSet& ps, const std::string& prefix, const CtaConfig& cfg,
                    const ad::Var& patch) {
  if (patch.value().rank() != 2) throw DataError("cta_forward: expected a [H,W] plane");
  ad::Var x = ad::stack_channels({patch});
  ad::Var h = ad::leaky_relu(conv_block(ps, prefix + "cta.lift", x), kLeakySlope);
  ad::Var scores = ad::sigmoid(
      ad::linear(ad::global_avg_pool(h), ps.get(prefix + "cta.score.w"),
                 ps.get(prefix + "cta.score.b")));
  ad::Var kept = ad::topk_keep(scores, cfg.topk);
  ad::Var scaled = ad::channel_scale(h, kept);
  return ad::slice_channel(conv_block(ps, prefix + "cta.proj", scaled), 0);
}

ad::Var ldgm_forward(const ParameterSet& ps, const std::string& prefix, const LdgmConfig& cfg,
                     const ad::Var& clean_lum, const ad::Var& patch, LdgmTrace* trace) {
  if (!clean_lum.value().same_shape(patch.value())) {
    throw DataError("ldgm_forward: clean plane and patch dimension mismatch");
  }
  ad::Var d_att = cta_forward(ps, prefix, cfg.cta, patch);
  auto [d_re, d_im] = ad::fft2(d_att);
  ad::Var d_amp = ad::hypot_(d_re, d_im);

  auto [c_re, c_im] = ad::fft2(clean_lum);
  ad::Var enc_amp = residual_encoder(ps, prefix + "enc_amp", ad::hypot_(c_re, c_im));
  ad::Var enc_pha = residual_encoder(ps, prefix + "enc_pha", ad::atan2_(c_im, c_re));

  ad::Var d_in = ad::stack_channels({d_amp});
  ad::Var d_hidden = ad::leaky_relu(conv_block(ps, prefix + "filter.a", d_in), kLeakySlope);
  ad::Var d_filt = ad::sigmoid(ad::slice_channel(conv_block(ps, prefix + "filter.b", d_hidden), 0));

  // gamma is learned at the training crop size; other sizes (analysis paths)
  // see it as a resized constant.
  const Tensor& gv = ps.get(prefix + "gamma").value();
  ad::Var gamma = gv.same_shape(clean_lum.value())
                      ? ps.get(prefix + "gamma")
                      : ad::Var::constant(
                            bilinear_resize(gv, clean_lum.value().dim(0), clean_lum.value().dim(1)));
  ad::Var d_mod = ad::mul(d_filt, gamma);
  ad::Var fused = ad::add(ad::mul(enc_amp, d_mod), enc_amp);

  ad::Var re_out = ad::mul(fused, ad::cos_(enc_pha));
  ad::Var im_out = ad::mul(fused, ad::sin_(enc_pha));
  ad::Var out = ad::ifft2_real(re_out, im_out);

  if (trace) {
    trace->d_att = d_att.value();
    trace->d_amp = d_amp.value();
    trace->d_filt = d_filt.value();
    trace->d_mod = d_mod.value();
    trace->enc_amp = enc_amp.value();
    trace->enc_pha = enc_pha.value();
    trace->fused_amp = fused.value();
  }
  return out;
}

}  // namespace weathercycle
