// SPDX-License-Identifier: Apache-2.0
#include "weathercycle/generators.hpp"

#include <algorithm>

#include "weathercycle/colorspace.hpp"
#include "weathercycle/errors.hpp"

namespace weathercycle {

namespace {
constexpr double kLeakySlope = 0.2;

void add_conv(ParameterSet& ps, const std::string& name, int c_out, int c_in, int k, Rng& rng) {
  ps.add(name + ".w", conv_weight_init(c_out, c_in, k, rng));
  ps.add(name + ".b", Tensor({c_out}));
}

ad::Var conv(const ParameterSet& ps, const std::string& name, const ad::Var& x) {
  return ad::conv2d(x, ps.get(name + ".w"), ps.get(name + ".b"));
}
}  // namespace

void NetConfig::validate() const {
  if (base_width < 4) throw DataError("NetConfig: base_width must be >= 4");
  if (depth < 1) throw DataError("NetConfig: depth must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw DataError("NetConfig: kernel must be odd");
  if (in_channels < 1 || out_channels < 1) throw DataError("NetConfig: channels must be >= 1");
}

NetConfig make_net_config(const std::string& variant, int base_width, int depth, int kernel) {
  NetConfig cfg;
  cfg.variant = variant;
  cfg.base_width = base_width;
  cfg.depth = depth;
  cfg.kernel = kernel;
  if (variant == "luma_backbone") {
    cfg.in_channels = cfg.out_channels = 1;
  } else if (variant == "chroma_codec") {
    cfg.in_channels = cfg.out_channels = 2;
    cfg.base_width = std::max(4, base_width / 2);
  } else if (variant == "recon_net") {
    cfg.in_channels = cfg.out_channels = 3;
    cfg.base_width = std::max(4, base_width / 2);
    cfg.depth = 1;  // shallow refinement stage
  } else if (variant == "unified_rgb") {
    cfg.in_channels = cfg.out_channels = 3;
  } else {
    throw DataError("NetConfig: unknown variant " + variant);
  }
  cfg.validate();
  return cfg;
}

void init_unet_params(ParameterSet& ps, const std::string& prefix, const NetConfig& cfg, Rng& rng) {
  cfg.validate();
  const int w = cfg.base_width, k = cfg.kernel;
  add_conv(ps, prefix + "in", w, cfg.in_channels, k, rng);
  for (int d = 0; d < cfg.depth; ++d) {
    add_conv(ps, prefix + "down" + std::to_string(d) + "a", w, w, k, rng);
    add_conv(ps, prefix + "down" + std::to_string(d) + "b", w, w, k, rng);
  }
  add_conv(ps, prefix + "mid", w, w, k, rng);
  for (int d = 0; d < cfg.depth; ++d) {
    add_conv(ps, prefix + "up" + std::to_string(d), w, w, k, rng);
  }
  add_conv(ps, prefix + "out", cfg.out_channels, w, k, rng);
}

std::size_t unet_param_count(const NetConfig& cfg) {
  const std::size_t w = cfg.base_width, k2 = static_cast<std::size_t>(cfg.kernel) * cfg.kernel;
  std::size_t n = w * cfg.in_channels * k2 + w;                    // in
  n += static_cast<std::size_t>(cfg.depth) * 2 * (w * w * k2 + w);  // down stages
  n += w * w * k2 + w;                                              // mid
  n += static_cast<std::size_t>(cfg.depth) * (w * w * k2 + w);      // up stages
  n += cfg.out_channels * w * k2 + cfg.out_channels;                // out
  return n;
}

ad::Var unet_forward(const ParameterSet& ps, const std::string& prefix, const NetConfig& cfg,
                     const ad::Var& x) {
  const Tensor& v = x.value();
  if (v.rank() != 3 || v.dim(0) != cfg.in_channels) {
    throw DataError("unet_forward: input channels do not match config");
  }
  const int stride = 1 << cfg.depth;
  if (v.dim(1) % stride || v.dim(2) % stride) {
    throw DataError("unet_forward: spatial dims must be divisible by 2^depth");
  }

  ad::Var h = ad::leaky_relu(conv(ps, prefix + "in", x), kLeakySlope);
  std::vector<ad::Var> skips;
  for (int d = 0; d < cfg.depth; ++d) {
    h = ad::leaky_relu(conv(ps, prefix + "down" + std::to_string(d) + "a", h), kLeakySlope);
    h = ad::leaky_relu(conv(ps, prefix + "down" + std::to_string(d) + "b", h), kLeakySlope);
    skips.push_back(h);
    h = ad::avg_pool2(h);
  }
  h = ad::leaky_relu(conv(ps, prefix + "mid", h), kLeakySlope);
  for (int d = cfg.depth - 1; d >= 0; --d) {
    h = ad::upsample_nearest2(h);
    h = ad::leaky_relu(conv(ps, prefix + "up" + std::to_string(d), h), kLeakySlope);
    h = ad::add(h, skips[static_cast<std::size_t>(d)]);
  }
  ad::Var y = conv(ps, prefix + "out", h);
  if (cfg.in_channels == cfg.out_channels) y = ad::add(y, x);
  return y;
}

GeneratorConfig make_generator_config(int base_width, int depth, int kernel) {
  GeneratorConfig cfg;
  cfg.luma = make_net_config("luma_backbone", base_width, depth, kernel);
  cfg.chroma = make_net_config("chroma_codec", base_width, depth, kernel);
  cfg.recon = make_net_config("recon_net", base_width, depth, kernel);
  cfg.unified = make_net_config("unified_rgb", base_width, depth, kernel);
  return cfg;
}

ParameterSet init_params(const GeneratorConfig& cfg, int crop_h, int crop_w, std::uint64_t seed) {
  ParameterSet ps;
  if (cfg.no_gd2c) {
    Rng rng(derive_seed(seed, {kStreamInit, 1}));
    init_unet_params(ps, "restore/unified/", cfg.unified, rng);
  } else {
    Rng luma_rng(derive_seed(seed, {kStreamInit, 2}));
    init_unet_params(ps, "restore/luma/", cfg.luma, luma_rng);
    Rng chroma_rng(derive_seed(seed, {kStreamInit, 3}));
    init_unet_params(ps, "restore/chroma/", cfg.chroma, chroma_rng);
  }
  if (!cfg.no_gc2d) {
    if (!cfg.no_ldgm) {
      Rng ldgm_rng(derive_seed(seed, {kStreamInit, 4}));
      init_ldgm_params(ps, "ldgm/", cfg.ldgm, crop_h, crop_w, ldgm_rng);
    }
    if (!cfg.no_jc2d) {
      Rng recon_rng(derive_seed(seed, {kStreamInit, 5}));
      init_unet_params(ps, "redegrade/recon/", cfg.recon, recon_rng);
    }
  }
  return ps;
}

ad::Var restore_vars(const ParameterSet& ps, const GeneratorConfig& cfg, const ad::Var& rgb) {
  if (cfg.no_gd2c) {
    return ad::clamp_st(unet_forward(ps, "restore/unified/", cfg.unified, rgb), 0.0, 1.0);
  }
  YcbcrVars in = rgb_to_ycbcr_vars(rgb);
  ad::Var lum =
      ad::slice_channel(unet_forward(ps, "restore/luma/", cfg.luma, ad::stack_channels({in.y})), 0);
  ad::Var chr = unet_forward(ps, "restore/chroma/", cfg.chroma, ad::stack_channels({in.cb, in.cr}));
  ad::Var out = ycbcr_to_rgb_vars(lum, ad::slice_channel(chr, 0), ad::slice_channel(chr, 1));
  return ad::clamp_st(out, 0.0, 1.0);
}

RgbImage restore(const ParameterSet& ps, const GeneratorConfig& cfg, const RgbImage& degraded) {
  degraded.validate();
  Tensor out = restore_vars(ps, cfg, ad::Var::constant(degraded.data)).value();
  return RgbImage(std::move(out));
}

ad::Var redegrade_vars(const ParameterSet& ps, const GeneratorConfig& cfg, const ad::Var& rgb,
                       const DegradationPool& pool, std::uint64_t noise_seed, double sigma_chroma,
                       RedegradeTrace* trace) {
  if (sigma_chroma < 0) throw DataError("redegrade: sigma_chroma must be >= 0");
  if (cfg.no_gc2d) {
    if (trace) trace->pre_recon = rgb.value();
    return ad::clamp_st(rgb, 0.0, 1.0);
  }
  pool.validate();
  YcbcrVars in = rgb_to_ycbcr_vars(rgb);

  ad::Var d_lum = in.y;
  if (!cfg.no_ldgm) {
    const Tensor& lum_v = in.y.value();
    Tensor patch = sample_pool(pool, noise_seed);
    if (!patch.same_shape(lum_v)) patch = bilinear_resize(patch, lum_v.dim(0), lum_v.dim(1));
    d_lum = ldgm_forward(ps, "ldgm/", cfg.ldgm, in.y, ad::Var::constant(std::move(patch)));
  }

  ad::Var d_cb = in.cb, d_cr = in.cr;
  if (sigma_chroma > 0) {
    Rng noise_rng(derive_seed(noise_seed, {kStreamNoise}));
    Tensor n_cb(in.cb.value().shape()), n_cr(in.cr.value().shape());
    for (std::size_t i = 0; i < n_cb.size(); ++i) n_cb[i] = noise_rng.normal(0.0, sigma_chroma);
    for (std::size_t i = 0; i < n_cr.size(); ++i) n_cr[i] = noise_rng.normal(0.0, sigma_chroma);
    d_cb = ad::add(in.cb, ad::Var::constant(std::move(n_cb)));
    d_cr = ad::add(in.cr, ad::Var::constant(std::move(n_cr)));
  }

  ad::Var recombined = ycbcr_to_rgb_vars(d_lum, d_cb, d_cr);
  if (trace) trace->pre_recon = recombined.value();
  ad::Var out = cfg.no_jc2d ? recombined : unet_forward(ps, "redegrade/recon/", cfg.recon, recombined);
  return ad::clamp_st(out, 0.0, 1.0);
}

RgbImage redegrade(const ParameterSet& ps, const GeneratorConfig& cfg, const RgbImage& clean,
                   const DegradationPool& pool, std::uint64_t noise_seed, double sigma_chroma) {
  clean.validate();
  Tensor out =
      redegrade_vars(ps, cfg, ad::Var::constant(clean.data), pool, noise_seed, sigma_chroma).value();
  return RgbImage(std::move(out));
}

}  // namespace weathercycle
