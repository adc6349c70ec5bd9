// SPDX-License-Identifier: Apache-2.0
#include "weathercycle/image.hpp"

#include <algorithm>
#include <cmath>

#include "weathercycle/errors.hpp"

namespace weathercycle {

namespace {
constexpr int kMinDim = 8;  // spectral ops need at least 8x8

void check_range(const Tensor& t, const char* what) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = t[i];
    if (!std::isfinite(v)) throw DataError(std::string(what) + ": non-finite value");
    if (v < 0.0 || v > 1.0) throw DataError(std::string(what) + ": value outside [0,1]");
  }
}
}  // namespace

void RgbImage::validate() const {
  if (data.rank() != 3 || data.dim(0) != 3) throw DataError("RgbImage: expected [3,H,W] tensor");
  if (data.dim(1) < kMinDim || data.dim(2) < kMinDim) throw DataError("RgbImage: dims must be >= 8");
  check_range(data, "RgbImage");
}

void LumaPlane::validate() const {
  if (data.rank() != 2) throw DataError("LumaPlane: expected [H,W] tensor");
  if (data.dim(0) < kMinDim || data.dim(1) < kMinDim) throw DataError("LumaPlane: dims must be >= 8");
  check_range(data, "LumaPlane");
}

LumaPlane LumaPlane::unchecked(Tensor t) {
  if (t.rank() != 2 || t.dim(0) < kMinDim || t.dim(1) < kMinDim) {
    throw DataError("LumaPlane: expected [H,W] tensor with dims >= 8");
  }
  LumaPlane p;
  p.data = std::move(t);
  return p;
}

void ChromaPlanes::validate() const {
  if (data.rank() != 3 || data.dim(0) != 2) throw DataError("ChromaPlanes: expected [2,H,W] tensor");
  if (data.dim(1) < kMinDim || data.dim(2) < kMinDim) {
    throw DataError("ChromaPlanes: dims must be >= 8");
  }
  check_range(data, "ChromaPlanes");
}

bool all_finite(const Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i])) return false;
  }
  return true;
}

void clamp01(Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::min(1.0, std::max(0.0, t[i]));
}

}  // namespace weathercycle
