// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "weathercycle/tensor.hpp"

namespace weathercycle::ad {

// Tape-based reverse-mode autodiff over double tensors. Graphs are built
// dynamically per forward pass and discarded after backward(); parameters are
// long-lived leaf nodes whose values the optimizer mutates in place between
// graph builds. Ops whose inputs all have requires_grad == false produce
// constants and record no tape, so inference pays nothing for the machinery.

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // accumulates node.grad into parents

  Tensor& ensure_grad() {
    if (grad.empty()) grad = Tensor(value.shape());
    return grad;
  }
};

class Var {
 public:
  Var() = default;

  static Var leaf(Tensor value);      // trainable: requires_grad = true
  static Var constant(Tensor value);  // data: no gradient tracking
  static Var scalar(double v) { return constant(Tensor::scalar(v)); }

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }  // leaves only, between graphs
  const Tensor& grad() const { return node_->grad; }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void zero_grad() {
    if (node_) node_->grad = Tensor();
  }
  const std::vector<int>& shape() const { return node_->value.shape(); }
  double item() const { return node_->value.item(); }

  std::shared_ptr<Node> node() const { return node_; }
  static Var from_node(std::shared_ptr<Node> n) {
    Var v;
    v.node_ = std::move(n);
    return v;
  }

 private:
  std::shared_ptr<Node> node_;
};

// Runs reverse-mode accumulation from a scalar root (size-1 value).
void backward(const Var& root);

// --- elementwise ---
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var divide(const Var& a, const Var& b);
Var neg(const Var& a);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);
Var abs_(const Var& a);
Var sqrt_(const Var& a);
Var exp_(const Var& a);
Var log_(const Var& a);
Var sin_(const Var& a);
Var cos_(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var tanh_(const Var& a);
Var recip(const Var& a);
// Clamp with straight-through gradient: forward clips, backward passes
// gradients unchanged so saturated pixels keep learning.
Var clamp_st(const Var& a, double lo, double hi);
// Element-wise amplitude/angle of a complex pair.
Var hypot_(const Var& re, const Var& im);
Var atan2_(const Var& im, const Var& re);
// Wrap angles to (-pi, pi]; derivative 1 a.e.
Var wrap_angle(const Var& a);

// --- reductions / scalar broadcast ---
Var sum(const Var& a);   // -> {1}
Var mean(const Var& a);  // -> {1}
Var dot(const Var& a, const Var& b);
Var scale_by(const Var& a, const Var& s);  // s has shape {1}

// --- shape ---
Var reshape(const Var& a, std::vector<int> shape);
Var slice_channel(const Var& x, int c);               // [C,H,W] -> [H,W]
Var stack_channels(const std::vector<Var>& planes);   // k x [H,W] -> [k,H,W]
Var axpy_basis(const Var& v, int index, const Var& s);  // v + e_index * s, s shape {1}

// --- neural-net ops ---
// Same-size convolution, stride 1, zero padding, odd kernel.
Var conv2d(const Var& x, const Var& w, const Var& b);  // [Cin,H,W],[Cout,Cin,k,k],[Cout]
Var avg_pool2(const Var& x);                           // [C,H,W] -> [C,H/2,W/2]
Var upsample_nearest2(const Var& x);                   // [C,H,W] -> [C,2H,2W]
Var adaptive_avg_pool(const Var& x, int out_h, int out_w);
Var global_avg_pool(const Var& x);                  // [C,H,W] -> [C]
Var linear(const Var& x, const Var& w, const Var& b);  // [Cin],[Cout,Cin],[Cout] -> [Cout]
// Keep the k largest entries of a vector (ties to the lower index), zero the
// rest. Gradient flows through survivors only.
Var topk_keep(const Var& scores, int k);
Var channel_scale(const Var& x, const Var& s);  // [C,H,W] * [C]

// --- spectral ---
// Unnormalized forward 2-D DFT of a real plane; DC at (0,0).
std::pair<Var, Var> fft2(const Var& x);  // -> (re, im)
// Real part of the inverse DFT with 1/(H*W) normalization.
Var ifft2_real(const Var& re, const Var& im);

Var l2_normalize(const Var& v, double eps = 1e-12);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator+(const Var& a, double s) { return add_scalar(a, s); }
inline Var operator+(double s, const Var& a) { return add_scalar(a, s); }
inline Var operator-(const Var& a, double s) { return add_scalar(a, -s); }
inline Var operator*(const Var& a, double s) { return mul_scalar(a, s); }
inline Var operator*(double s, const Var& a) { return mul_scalar(a, s); }
inline Var operator-(const Var& a) { return neg(a); }

}  // namespace weathercycle::ad
