// SPDX-License-Identifier: Apache-2.0
#include "weathercycle/colorspace.hpp"

#include "weathercycle/errors.hpp"

namespace weathercycle {

namespace {
constexpr double kWr = 0.299, kWg = 0.587, kWb = 0.114;
constexpr double kCbScale = 1.772;  // 2 * (1 - kWb)
constexpr double kCrScale = 1.402;  // 2 * (1 - kWr)

void check_plane_dims(const ad::Var& a, const ad::Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw DataError(std::string(op) + ": plane dimension mismatch " + a.value().shape_str() +
                    " vs " + b.value().shape_str());
  }
}
}  // namespace

YcbcrVars rgb_to_ycbcr_vars(const ad::Var& rgb) {
  if (rgb.value().rank() != 3 || rgb.value().dim(0) != 3) {
    throw DataError("rgb_to_ycbcr: expected a [3,H,W] tensor");
  }
  ad::Var r = ad::slice_channel(rgb, 0);
  ad::Var g = ad::slice_channel(rgb, 1);
  ad::Var b = ad::slice_channel(rgb, 2);
  ad::Var y = ad::add(ad::add(ad::mul_scalar(r, kWr), ad::mul_scalar(g, kWg)),
                      ad::mul_scalar(b, kWb));
  ad::Var cb = ad::add_scalar(ad::mul_scalar(ad::sub(b, y), 1.0 / kCbScale), 0.5);
  ad::Var cr = ad::add_scalar(ad::mul_scalar(ad::sub(r, y), 1.0 / kCrScale), 0.5);
  return {y, cb, cr};
}

ad::Var ycbcr_to_rgb_vars(const ad::Var& y, const ad::Var& cb, const ad::Var& cr) {
  check_plane_dims(y, cb, "ycbcr_to_rgb");
  check_plane_dims(y, cr, "ycbcr_to_rgb");
  ad::Var r = ad::add(y, ad::mul_scalar(ad::add_scalar(cr, -0.5), kCrScale));
  ad::Var b = ad::add(y, ad::mul_scalar(ad::add_scalar(cb, -0.5), kCbScale));
  ad::Var g = ad::mul_scalar(
      ad::sub(ad::sub(y, ad::mul_scalar(r, kWr)), ad::mul_scalar(b, kWb)), 1.0 / kWg);
  return ad::stack_channels({r, g, b});
}

std::pair<LumaPlane, ChromaPlanes> rgb_to_ycbcr(const RgbImage& img) {
  img.validate();
  YcbcrVars v = rgb_to_ycbcr_vars(ad::Var::constant(img.data));
  Tensor y = v.y.value();
  clamp01(y);
  const int h = img.height(), w = img.width();
  Tensor chr({2, h, w});
  std::copy(v.cb.value().data(), v.cb.value().data() + v.cb.value().size(), chr.plane(0));
  std::copy(v.cr.value().data(), v.cr.value().data() + v.cr.value().size(), chr.plane(1));
  clamp01(chr);
  return {LumaPlane(std::move(y)), ChromaPlanes(std::move(chr))};
}

RgbImage ycbcr_to_rgb(const LumaPlane& lum, const ChromaPlanes& chr) {
  lum.validate();
  chr.validate();
  if (lum.height() != chr.height() || lum.width() != chr.width()) {
    throw DataError("ycbcr_to_rgb: luma/chroma dimension mismatch");
  }
  const int h = lum.height(), w = lum.width();
  Tensor cb({h, w}), cr({h, w});
  std::copy(chr.data.plane(0), chr.data.plane(0) + cb.size(), cb.data());
  std::copy(chr.data.plane(1), chr.data.plane(1) + cr.size(), cr.data());
  ad::Var rgb = ycbcr_to_rgb_vars(ad::Var::constant(lum.data), ad::Var::constant(std::move(cb)),
                                  ad::Var::constant(std::move(cr)));
  Tensor out = rgb.value();
  clamp01(out);
  return RgbImage(std::move(out));
}

std::pair<RgbImage, RgbImage> swap_luma(const RgbImage& degraded, const RgbImage& clean) {
  if (degraded.height() != clean.height() || degraded.width() != clean.width()) {
    throw DataError("swap_luma: image dimension mismatch");
  }
  auto [d_lum, d_chr] = rgb_to_ycbcr(degraded);
  auto [c_lum, c_chr] = rgb_to_ycbcr(clean);
  return {ycbcr_to_rgb(c_lum, d_chr), ycbcr_to_rgb(d_lum, c_chr)};
}

}  // namespace weathercycle
