// SPDX-License-Identifier: Apache-2.0
#include "weathercycle/losses.hpp"

#include <cmath>

#include "weathercycle/errors.hpp"
#include "weathercycle/spectral.hpp"

namespace weathercycle {

void LossWeights::validate() const {
  if (lambda_cyc < 0 || lambda_dacr < 0 || fourier_weight < 0) {
    throw DataError("LossWeights: all weights must be >= 0");
  }
}

namespace {
ad::Var mean_l1(const ad::Var& a, const ad::Var& b) {
  if (!a.value().same_shape(b.value())) throw DataError("cycle_loss: pair dimension mismatch");
  return ad::mean(ad::abs_(ad::sub(a, b)));
}
}  // namespace

ad::Var cycle_loss_vars(const ad::Var& d_cyc, const ad::Var& d_orig, const ad::Var& c_cyc,
                        const ad::Var& c_orig, double fourier_weight) {
  ad::Var l1 = ad::add(mean_l1(d_cyc, d_orig), mean_l1(c_cyc, c_orig));
  if (fourier_weight == 0.0) return l1;
  ad::Var fd = ad::add(fourier_distance_vars(d_cyc, d_orig), fourier_distance_vars(c_cyc, c_orig));
  return ad::add(l1, ad::mul_scalar(fd, fourier_weight));
}

double cycle_loss(const RgbImage& d_cyc, const RgbImage& d_orig, const RgbImage& c_cyc,
                  const RgbImage& c_orig, double fourier_weight) {
  return cycle_loss_vars(ad::Var::constant(d_cyc.data), ad::Var::constant(d_orig.data),
                         ad::Var::constant(c_cyc.data), ad::Var::constant(c_orig.data),
                         fourier_weight)
      .item();
}

double total_loss(double l_cyc, double l_dacr, const LossWeights& w) {
  w.validate();
  if (!std::isfinite(l_cyc)) throw NumericError("total_loss: cycle term is non-finite");
  if (!std::isfinite(l_dacr)) throw NumericError("total_loss: dacr term is non-finite");
  return w.lambda_cyc * l_cyc + w.lambda_dacr * l_dacr;
}

ad::Var total_loss_vars(const ad::Var& l_cyc, const ad::Var& l_dacr, const LossWeights& w) {
  w.validate();
  if (!std::isfinite(l_cyc.item())) throw NumericError("total_loss: cycle term is non-finite");
  if (!std::isfinite(l_dacr.item())) throw NumericError("total_loss: dacr term is non-finite");
  return ad::add(ad::mul_scalar(l_cyc, w.lambda_cyc), ad::mul_scalar(l_dacr, w.lambda_dacr));
}

}  // namespace weathercycle
