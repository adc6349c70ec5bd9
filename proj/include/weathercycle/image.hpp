// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>

#include "weathercycle/tensor.hpp"

namespace weathercycle {

// Raster domain types. All carry unit-range intensities; planes are stored
// channel-major ([C,H,W]) to match the conv and FFT kernels.

struct RgbImage {
  Tensor data;  // [3,H,W], values in [0,1]

  RgbImage() = default;
  explicit RgbImage(Tensor t) : data(std::move(t)) { validate(); }
  static RgbImage zeros(int h, int w) { return RgbImage(Tensor({3, h, w})); }

  int height() const { return data.dim(1); }
  int width() const { return data.dim(2); }
  // Throws DataError on wrong shape, dims < 8, out-of-range or non-finite values.
  void validate() const;
};

struct LumaPlane {
  Tensor data;  // [H,W], values in [0,1]

  LumaPlane() = default;
  explicit LumaPlane(Tensor t) : data(std::move(t)) { validate(); }
  // Shape-checked only; spectral ops return values outside [0,1] by design.
  static LumaPlane unchecked(Tensor t);

  int height() const { return data.dim(0); }
  int width() const { return data.dim(1); }
  void validate() const;
};

struct ChromaPlanes {
  Tensor data;  // [2,H,W] (Cb, Cr), 0.5 = neutral

  ChromaPlanes() = default;
  explicit ChromaPlanes(Tensor t) : data(std::move(t)) { validate(); }

  int height() const { return data.dim(1); }
  int width() const { return data.dim(2); }
  void validate() const;
};

// True iff every element is finite.
bool all_finite(const Tensor& t);

// In-place clamp to [0,1].
void clamp01(Tensor& t);

}  // namespace weathercycle
