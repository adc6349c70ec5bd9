// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace weathercycle {

// Dense row-major double tensor. Small and deliberately boring: shape plus a
// flat buffer, no views, no broadcasting.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);
  static Tensor scalar(double v);

  const std::vector<int>& shape() const { return shape_; }
  int dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 2-D [H,W]
  double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
  double at(int i, int j) const { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
  // 3-D [C,H,W]
  double& at(int c, int i, int j) {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + i) * shape_[2] + j];
  }
  double at(int c, int i, int j) const {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + i) * shape_[2] + j];
  }
  // 4-D [N,C,H,W] (conv weights [Cout,Cin,k,k])
  double& at(int n, int c, int i, int j) {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + i) * shape_[3] + j];
  }
  double at(int n, int c, int i, int j) const {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + i) * shape_[3] + j];
  }

  // Pointer to the start of plane c of a [C,H,W] tensor.
  double* plane(int c) { return data_.data() + static_cast<std::size_t>(c) * shape_[1] * shape_[2]; }
  const double* plane(int c) const {
    return data_.data() + static_cast<std::size_t>(c) * shape_[1] * shape_[2];
  }

  void fill(double v);
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  double item() const {
    assert(size() == 1);
    return data_[0];
  }

  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

std::size_t shape_size(const std::vector<int>& shape);

double max_abs(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);
double mean_value(const Tensor& t);

// Bilinear resize of a [H,W] plane. Used for degradation-pool patches and the
// stub embedding grid; not part of any gradient path.
Tensor bilinear_resize(const Tensor& plane, int out_h, int out_w);

}  // namespace weathercycle
