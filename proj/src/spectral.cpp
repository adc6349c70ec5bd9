// SPDX-License-Identifier: Apache-2.0
#include "weathercycle/spectral.hpp"

#include <cmath>

#include "weathercycle/dft.hpp"
#include "weathercycle/errors.hpp"

namespace weathercycle {

Spectrum fft2(const LumaPlane& plane) {
  if (!all_finite(plane.data)) throw DataError("fft2: non-finite input");
  if (plane.height() < 8 || plane.width() < 8) throw DataError("fft2: dims must be >= 8");
  Tensor re, im;
  dft2(plane.data, nullptr, re, im, /*inverse=*/false);
  Spectrum spec;
  spec.amplitude = Tensor(re.shape());
  spec.phase = Tensor(re.shape());
  for (std::size_t i = 0; i < re.size(); ++i) {
    spec.amplitude[i] = std::hypot(re[i], im[i]);
    spec.phase[i] = std::atan2(im[i], re[i]);
  }
  return spec;
}

LumaPlane ifft2(const Spectrum& spec, double* imag_residue) {
  if (!spec.amplitude.same_shape(spec.phase)) throw DataError("ifft2: amplitude/phase shape mismatch");
  if (spec.amplitude.rank() != 2) throw DataError("ifft2: expected [H,W] spectrum");
  Tensor re(spec.amplitude.shape()), im(spec.amplitude.shape());
  for (std::size_t i = 0; i < re.size(); ++i) {
    re[i] = spec.amplitude[i] * std::cos(spec.phase[i]);
    im[i] = spec.amplitude[i] * std::sin(spec.phase[i]);
  }
  Tensor out_re, out_im;
  dft2(re, &im, out_re, out_im, /*inverse=*/true);
  const double norm = 1.0 / static_cast<double>(out_re.size());
  double residue = 0.0;
  for (std::size_t i = 0; i < out_re.size(); ++i) {
    out_re[i] *= norm;
    residue = std::max(residue, std::fabs(out_im[i] * norm));
  }
  if (imag_residue) *imag_residue = residue;
  return LumaPlane::unchecked(std::move(out_re));
}

LumaPlane swap_amplitude(const LumaPlane& content, const LumaPlane& donor) {
  if (content.height() != donor.height() || content.width() != donor.width()) {
    throw DataError("swap_amplitude: dimension mismatch");
  }
  Spectrum mixed;
  mixed.amplitude = fft2(donor).amplitude;
  mixed.phase = fft2(content).phase;
  return ifft2(mixed);
}

namespace {
// Amplitude-L1 + wrapped-phase-L1 between the spectra of two [H,W] planes.
ad::Var plane_spectral_distance(const ad::Var& a, const ad::Var& b) {
  auto [a_re, a_im] = ad::fft2(a);
  auto [b_re, b_im] = ad::fft2(b);
  ad::Var amp_term = ad::mean(ad::abs_(ad::sub(ad::hypot_(a_re, a_im), ad::hypot_(b_re, b_im))));
  ad::Var pha_diff = ad::wrap_angle(ad::sub(ad::atan2_(a_im, a_re), ad::atan2_(b_im, b_re)));
  return ad::add(amp_term, ad::mean(ad::abs_(pha_diff)));
}
}  // namespace

ad::Var fourier_distance_vars(const ad::Var& a, const ad::Var& b) {
  if (a.value().rank() != 3 || a.value().dim(0) != 3) {
    throw DataError("fourier_distance: expected [3,H,W] images");
  }
  if (!a.value().same_shape(b.value())) throw DataError("fourier_distance: dimension mismatch");
  ad::Var acc;
  for (int c = 0; c < 3; ++c) {
    ad::Var term = plane_spectral_distance(ad::slice_channel(a, c), ad::slice_channel(b, c));
    acc = c == 0 ? term : ad::add(acc, term);
  }
  return ad::mul_scalar(acc, 1.0 / 3.0);
}

double fourier_distance(const RgbImage& a, const RgbImage& b) {
  return fourier_distance_vars(ad::Var::constant(a.data), ad::Var::constant(b.data)).item();
}

}  // namespace weathercycle
