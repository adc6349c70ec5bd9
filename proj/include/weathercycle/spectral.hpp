// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "weathercycle/autodiff.hpp"
#include "weathercycle/image.hpp"

namespace weathercycle {

// Amplitude/phase view of the unnormalized forward 2-D DFT of a real plane.
// DC sits at (0,0); phases live in (-pi, pi].
struct Spectrum {
  Tensor amplitude;  // [H,W], >= 0
  Tensor phase;      // [H,W], (-pi, pi]
};

Spectrum fft2(const LumaPlane& plane);

// Real part of the inverse DFT with 1/(H*W) normalization, unclamped. The
// max-abs imaginary residue (after normalization) is reported through
// imag_residue when non-null.
LumaPlane ifft2(const Spectrum& spec, double* imag_residue = nullptr);

// Keeps the content's phase, adopts the donor's amplitude. Unclamped output.
LumaPlane swap_amplitude(const LumaPlane& content, const LumaPlane& donor);

// Mean-L1 amplitude difference plus mean-L1 wrapped phase difference, per
// channel, averaged over the 3 channels. Symmetric pseudometric.
double fourier_distance(const RgbImage& a, const RgbImage& b);
ad::Var fourier_distance_vars(const ad::Var& a, const ad::Var& b);  // [3,H,W] each

}  // namespace weathercycle
