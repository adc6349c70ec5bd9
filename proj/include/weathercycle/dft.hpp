// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "weathercycle/tensor.hpp"

namespace weathercycle {

// Unnormalized 2-D DFT of a [H,W] plane pair, DC at (0,0). Forward uses the
// exp(-i...) convention; inverse is the unnormalized adjoint — callers apply
// the 1/(H*W) factor themselves. im_in may be null for real input.
void dft2(const Tensor& re_in, const Tensor* im_in, Tensor& re_out, Tensor& im_out, bool inverse);

}  // namespace weathercycle
