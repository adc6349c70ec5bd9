// SPDX-License-Identifier: Apache-2.0
#include "weathercycle/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace weathercycle {

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimension must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
  data_.assign(shape_size(shape_), fill);
}

Tensor Tensor::scalar(double v) {
  Tensor t({1});
  t[0] = v;
  return t;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << 'x';
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) m = std::max(m, std::fabs(t[i]));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

double mean_value(const Tensor& t) {
  if (t.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += t[i];
  return s / static_cast<double>(t.size());
}

Tensor bilinear_resize(const Tensor& plane, int out_h, int out_w) {
  if (plane.rank() != 2) throw std::invalid_argument("bilinear_resize expects a [H,W] plane");
  const int in_h = plane.dim(0), in_w = plane.dim(1);
  Tensor out({out_h, out_w});
  if (in_h == out_h && in_w == out_w) {
    std::copy(plane.data(), plane.data() + plane.size(), out.data());
    return out;
  }
  const double sy = out_h > 1 ? static_cast<double>(in_h - 1) / (out_h - 1) : 0.0;
  const double sx = out_w > 1 ? static_cast<double>(in_w - 1) / (out_w - 1) : 0.0;
  for (int i = 0; i < out_h; ++i) {
    const double fy = i * sy;
    const int y0 = std::min(static_cast<int>(fy), in_h - 1);
    const int y1 = std::min(y0 + 1, in_h - 1);
    const double wy = fy - y0;
    for (int j = 0; j < out_w; ++j) {
      const double fx = j * sx;
      const int x0 = std::min(static_cast<int>(fx), in_w - 1);
      const int x1 = std::min(x0 + 1, in_w - 1);
      const double wx = fx - x0;
      out.at(i, j) = (1 - wy) * ((1 - wx) * plane.at(y0, x0) + wx * plane.at(y0, x1)) +
                     wy * ((1 - wx) * plane.at(y1, x0) + wx * plane.at(y1, x1));
    }
  }
  return out;
}

}  // namespace weathercycle
