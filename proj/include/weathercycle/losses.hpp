// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "weathercycle/autodiff.hpp"
#include "weathercycle/image.hpp"

namespace weathercycle {

struct LossWeights {
  double lambda_cyc = 1.0;
  double lambda_dacr = 0.8;
  // The cycle loss's internal spectral weight; unrelated to DacrWeights.beta.
  double fourier_weight = 0.1;
  void validate() const;
};

// mean-L1 over both cycle pairs plus the weighted Fourier distance of each.
ad::Var cycle_loss_vars(const ad::Var& d_cyc, const ad::Var& d_orig, const ad::Var& c_cyc,
                        const ad::Var& c_orig, double fourier_weight);
double cycle_loss(const RgbImage& d_cyc, const RgbImage& d_orig, const RgbImage& c_cyc,
                  const RgbImage& c_orig, double fourier_weight);

// lambda_cyc * l_cyc + lambda_dacr * l_dacr; non-finite inputs raise a
// NumericError naming the offending term.
double total_loss(double l_cyc, double l_dacr, const LossWeights& w);
ad::Var total_loss_vars(const ad::Var& l_cyc, const ad::Var& l_dacr, const LossWeights& w);

}  // namespace weathercycle
