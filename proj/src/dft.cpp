// SPDX-License-Identifier: Apache-2.0
#include "weathercycle/dft.hpp"

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace weathercycle {

namespace {
// FFTW plan creation is not thread-safe; execution of a private plan is.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

void dft2(const Tensor& re_in, const Tensor* im_in, Tensor& re_out, Tensor& im_out, bool inverse) {
  if (re_in.rank() != 2) throw std::invalid_argument("dft2 expects a [H,W] plane");
  if (im_in && !im_in->same_shape(re_in)) throw std::invalid_argument("dft2: re/im shape mismatch");
  const int h = re_in.dim(0), w = re_in.dim(1);
  const std::size_t n = re_in.size();

  std::vector<std::complex<double>> in(n), out(n);
  for (std::size_t i = 0; i < n; ++i) {
    in[i] = {re_in[i], im_in ? (*im_in)[i] : 0.0};
  }

  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    plan = fftw_plan_dft_2d(h, w, reinterpret_cast<fftw_complex*>(in.data()),
                            reinterpret_cast<fftw_complex*>(out.data()),
                            inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
  }
  if (!plan) throw std::runtime_error("dft2: fftw plan creation failed");
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(plan);
  }

  re_out = Tensor({h, w});
  im_out = Tensor({h, w});
  for (std::size_t i = 0; i < n; ++i) {
    re_out[i] = out[i].real();
    im_out[i] = out[i].imag();
  }
}

}  // namespace weathercycle
