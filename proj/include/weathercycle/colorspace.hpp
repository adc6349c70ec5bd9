// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>

#include "weathercycle/autodiff.hpp"
#include "weathercycle/image.hpp"

namespace weathercycle {

// Full-range BT.601 analog YCbCr with the chroma neutral point at 0.5:
//   Y  = 0.299 R + 0.587 G + 0.114 B
//   Cb = 0.5 + (B - Y) / 1.772
//   Cr = 0.5 + (R - Y) / 1.402
// For inputs in [0,1] every output lands in [0,1] before clamping, so the
// round trip is exact up to float error.

struct YcbcrVars {
  ad::Var y;   // [H,W]
  ad::Var cb;  // [H,W]
  ad::Var cr;  // [H,W]
};

// Differentiable, unclamped graph builders. These single-source the matrix;
// the raster entry points below go through them.
YcbcrVars rgb_to_ycbcr_vars(const ad::Var& rgb);  // rgb: [3,H,W]
ad::Var ycbcr_to_rgb_vars(const ad::Var& y, const ad::Var& cb, const ad::Var& cr);  // -> [3,H,W]

// Raster entry points: validate, convert, clamp to [0,1].
std::pair<LumaPlane, ChromaPlanes> rgb_to_ycbcr(const RgbImage& img);
RgbImage ycbcr_to_rgb(const LumaPlane& lum, const ChromaPlanes& chr);

// Paired Y/CbCr exchange between an aligned degraded/clean pair. Returns
// (clean_Y + degraded_CbCr recombined, degraded_Y + clean_CbCr recombined).
std::pair<RgbImage, RgbImage> swap_luma(const RgbImage& degraded, const RgbImage& clean);

}  // namespace weathercycle
