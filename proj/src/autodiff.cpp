// SPDX-License-Identifier: Apache-2.0
#include "weathercycle/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "weathercycle/dft.hpp"

namespace weathercycle::ad {

namespace {

using NodePtr = std::shared_ptr<Node>;

Var make_op(Tensor value, const std::vector<Var>& inputs, std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const Var& p : inputs) {
    if (p.requires_grad()) {
      n->requires_grad = true;
      break;
    }
  }
  if (n->requires_grad) {
    n->parents.reserve(inputs.size());
    for (const Var& p : inputs) n->parents.push_back(p.node());
    n->backward_fn = std::move(bw);
  }
  return Var::from_node(n);
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.value().shape_str() +
                                " vs " + b.value().shape_str());
  }
}

void accumulate(const NodePtr& p, const Tensor& g) {
  if (!p->requires_grad) return;
  Tensor& dst = p->ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

Var Var::leaf(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var::from_node(n);
}

Var Var::constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var::from_node(n);
}

void backward(const Var& root) {
  if (!root.defined() || root.value().size() != 1) {
    throw std::invalid_argument("backward: root must be a defined scalar");
  }
  NodePtr r = root.node();
  if (!r->requires_grad) return;

  struct Frame {
    Node* n;
    std::size_t next;
  };
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<Frame> stack;
  stack.push_back({r.get(), 0});
  visited.insert(r.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.n->parents.size()) {
      Node* p = f.n->parents[f.next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }

  r->ensure_grad()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] + b.value()[i];
  auto pa = a.node(), pb = b.node();
  return make_op(std::move(y), {a, b}, [pa, pb](Node& n) {
    accumulate(pa, n.grad);
    accumulate(pb, n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] - b.value()[i];
  auto pa = a.node(), pb = b.node();
  return make_op(std::move(y), {a, b}, [pa, pb](Node& n) {
    accumulate(pa, n.grad);
    if (pb->requires_grad) {
      Tensor& g = pb->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * b.value()[i];
  auto pa = a.node(), pb = b.node();
  return make_op(std::move(y), {a, b}, [pa, pb](Node& n) {
    if (pa->requires_grad) {
      Tensor& g = pa->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      Tensor& g = pb->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * pa->value[i];
    }
  });
}

Var divide(const Var& a, const Var& b) {
  check_same_shape(a, b, "divide");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] / b.value()[i];
  auto pa = a.node(), pb = b.node();
  return make_op(std::move(y), {a, b}, [pa, pb](Node& n) {
    if (pa->requires_grad) {
      Tensor& g = pa->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] / pb->value[i];
    }
    if (pb->requires_grad) {
      Tensor& g = pb->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        const double bv = pb->value[i];
        g[i] -= n.grad[i] * pa->value[i] / (bv * bv);
      }
    }
  });
}

Var neg(const Var& a) { return mul_scalar(a, -1.0); }

Var add_scalar(const Var& a, double s) {
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] + s;
  auto pa = a.node();
  return make_op(std::move(y), {a}, [pa](Node& n) { accumulate(pa, n.grad); });
}

Var mul_scalar(const Var& a, double s) {
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * s;
  auto pa = a.node();
  return make_op(std::move(y), {a}, [pa, s](Node& n) {
    if (!pa->requires_grad) return;
    Tensor& g = pa->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += s * n.grad[i];
  });
}

namespace {
// Shared scaffolding for unary elementwise ops with local derivative d(i).
template <typename F, typename D>
Var unary_op(const Var& a, F&& f, D&& dfn) {
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(a.value()[i]);
  auto pa = a.node();
  auto d = std::forward<D>(dfn);
  return make_op(std::move(y), {a}, [pa, d](Node& n) {
    if (!pa->requires_grad) return;
    Tensor& g = pa->ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * d(pa->value[i], n.value[i]);
  });
}
}  // namespace

Var abs_(const Var& a) {
  return unary_op(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var sqrt_(const Var& a) {
  return unary_op(
      a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0 ? 0.5 / y : 0.0; });
}

Var exp_(const Var& a) {
  return unary_op(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log_(const Var& a) {
  return unary_op(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sin_(const Var& a) {
  return unary_op(
      a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

Var cos_(const Var& a) {
  return unary_op(
      a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

Var sigmoid(const Var& a) {
  return unary_op(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(const Var& a) {
  return unary_op(
      a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var leaky_relu(const Var& a, double slope) {
  return unary_op(
      a, [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Var tanh_(const Var& a) {
  return unary_op(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var recip(const Var& a) {
  return unary_op(
      a, [](double x) { return 1.0 / x; }, [](double, double y) { return -y * y; });
}

Var clamp_st(const Var& a, double lo, double hi) {
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::min(hi, std::max(lo, a.value()[i]));
  auto pa = a.node();
  // Straight-through: gradient passes as if the clamp were identity.
  return make_op(std::move(y), {a}, [pa](Node& n) { accumulate(pa, n.grad); });
}

Var hypot_(const Var& re, const Var& im) {
  check_same_shape(re, im, "hypot");
  Tensor y(re.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::hypot(re.value()[i], im.value()[i]);
  auto pr = re.node(), pi = im.node();
  return make_op(std::move(y), {re, im}, [pr, pi](Node& n) {
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      const double r = n.value[i];
      if (r <= 0.0) continue;
      const double g = n.grad[i] / r;
      if (pr->requires_grad) pr->ensure_grad()[i] += g * pr->value[i];
      if (pi->requires_grad) pi->ensure_grad()[i] += g * pi->value[i];
    }
  });
}

Var atan2_(const Var& im, const Var& re) {
  check_same_shape(im, re, "atan2");
  Tensor y(im.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::atan2(im.value()[i], re.value()[i]);
  auto pi = im.node(), pr = re.node();
  return make_op(std::move(y), {im, re}, [pi, pr](Node& n) {
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      const double x = pr->value[i], yv = pi->value[i];
      const double r2 = x * x + yv * yv;
      if (r2 <= 0.0) continue;
      if (pi->requires_grad) pi->ensure_grad()[i] += n.grad[i] * x / r2;
      if (pr->requires_grad) pr->ensure_grad()[i] -= n.grad[i] * yv / r2;
    }
  });
}

Var wrap_angle(const Var& a) {
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    double v = std::remainder(a.value()[i], 2.0 * kPi);  // [-pi, pi]
    if (v <= -kPi) v += 2.0 * kPi;                       // -> (-pi, pi]
    y[i] = v;
  }
  auto pa = a.node();
  return make_op(std::move(y), {a}, [pa](Node& n) { accumulate(pa, n.grad); });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Var sum(const Var& a) {
  Tensor y = Tensor::scalar(std::accumulate(a.value().data(), a.value().data() + a.value().size(), 0.0));
  auto pa = a.node();
  return make_op(std::move(y), {a}, [pa](Node& n) {
    if (!pa->requires_grad) return;
    Tensor& g = pa->ensure_grad();
    const double gv = n.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += gv;
  });
}

Var mean(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a.value().size());
  Tensor y = Tensor::scalar(
      std::accumulate(a.value().data(), a.value().data() + a.value().size(), 0.0) * inv);
  auto pa = a.node();
  return make_op(std::move(y), {a}, [pa, inv](Node& n) {
    if (!pa->requires_grad) return;
    Tensor& g = pa->ensure_grad();
    const double gv = n.grad[0] * inv;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += gv;
  });
}

Var dot(const Var& a, const Var& b) {
  check_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i) s += a.value()[i] * b.value()[i];
  auto pa = a.node(), pb = b.node();
  return make_op(Tensor::scalar(s), {a, b}, [pa, pb](Node& n) {
    const double gv = n.grad[0];
    if (pa->requires_grad) {
      Tensor& g = pa->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += gv * pb->value[i];
    }
    if (pb->requires_grad) {
      Tensor& g = pb->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += gv * pa->value[i];
    }
  });
}

Var scale_by(const Var& a, const Var& s) {
  if (s.value().size() != 1) throw std::invalid_argument("scale_by: scale must be a scalar var");
  const double sv = s.value()[0];
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * sv;
  auto pa = a.node(), ps = s.node();
  return make_op(std::move(y), {a, s}, [pa, ps, sv](Node& n) {
    if (pa->requires_grad) {
      Tensor& g = pa->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * sv;
    }
    if (ps->requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n.grad.size(); ++i) acc += n.grad[i] * pa->value[i];
      ps->ensure_grad()[0] += acc;
    }
  });
}

// ---------------------------------------------------------------------------
// shape
// ---------------------------------------------------------------------------

Var reshape(const Var& a, std::vector<int> shape) {
  if (shape_size(shape) != a.value().size()) throw std::invalid_argument("reshape: size mismatch");
  Tensor y(shape);
  std::copy(a.value().data(), a.value().data() + a.value().size(), y.data());
  auto pa = a.node();
  return make_op(std::move(y), {a}, [pa](Node& n) { accumulate(pa, n.grad); });
}

Var slice_channel(const Var& x, int c) {
  const Tensor& v = x.value();
  if (v.rank() != 3 || c < 0 || c >= v.dim(0)) throw std::invalid_argument("slice_channel: bad input");
  const int h = v.dim(1), w = v.dim(2);
  Tensor y({h, w});
  std::copy(v.plane(c), v.plane(c) + y.size(), y.data());
  auto px = x.node();
  return make_op(std::move(y), {x}, [px, c](Node& n) {
    if (!px->requires_grad) return;
    Tensor& g = px->ensure_grad();
    double* dst = g.plane(c);
    for (std::size_t i = 0; i < n.grad.size(); ++i) dst[i] += n.grad[i];
  });
}

Var stack_channels(const std::vector<Var>& planes) {
  if (planes.empty()) throw std::invalid_argument("stack_channels: empty input");
  const int h = planes[0].value().dim(0), w = planes[0].value().dim(1);
  for (const Var& p : planes) {
    if (p.value().rank() != 2 || p.value().dim(0) != h || p.value().dim(1) != w) {
      throw std::invalid_argument("stack_channels: planes must share [H,W]");
    }
  }
  const int c = static_cast<int>(planes.size());
  Tensor y({c, h, w});
  for (int k = 0; k < c; ++k) {
    std::copy(planes[k].value().data(), planes[k].value().data() + planes[k].value().size(),
              y.plane(k));
  }
  std::vector<NodePtr> nodes;
  nodes.reserve(planes.size());
  for (const Var& p : planes) nodes.push_back(p.node());
  return make_op(std::move(y), planes, [nodes, h, w](Node& n) {
    const std::size_t plane_sz = static_cast<std::size_t>(h) * w;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (!nodes[k]->requires_grad) continue;
      Tensor& g = nodes[k]->ensure_grad();
      const double* src = n.grad.data() + k * plane_sz;
      for (std::size_t i = 0; i < plane_sz; ++i) g[i] += src[i];
    }
  });
}

Var axpy_basis(const Var& v, int index, const Var& s) {
  if (s.value().size() != 1) throw std::invalid_argument("axpy_basis: s must be scalar");
  if (index < 0 || static_cast<std::size_t>(index) >= v.value().size()) {
    throw std::invalid_argument("axpy_basis: index out of range");
  }
  Tensor y(v.shape());
  std::copy(v.value().data(), v.value().data() + v.value().size(), y.data());
  y[index] += s.value()[0];
  auto pv = v.node(), ps = s.node();
  return make_op(std::move(y), {v, s}, [pv, ps, index](Node& n) {
    accumulate(pv, n.grad);
    if (ps->requires_grad) ps->ensure_grad()[0] += n.grad[index];
  });
}

// ---------------------------------------------------------------------------
// neural-net ops
// ---------------------------------------------------------------------------

namespace {

// dst[i,j] += coeff * src[i+di, j+dj] over the overlap of both planes.
void plane_shifted_axpy(double* dst, const double* src, int h, int w, double coeff, int di, int dj) {
  const int i_lo = std::max(0, -di), i_hi = std::min(h, h - di);
  const int j_lo = std::max(0, -dj), j_hi = std::min(w, w - dj);
  if (j_hi <= j_lo) return;
  for (int i = i_lo; i < i_hi; ++i) {
    double* d = dst + static_cast<std::size_t>(i) * w + j_lo;
    const double* s = src + static_cast<std::size_t>(i + di) * w + (j_lo + dj);
    const int count = j_hi - j_lo;
    for (int j = 0; j < count; ++j) d[j] += coeff * s[j];
  }
}

double plane_shifted_dot(const double* a, const double* b, int h, int w, int di, int dj) {
  const int i_lo = std::max(0, -di), i_hi = std::min(h, h - di);
  const int j_lo = std::max(0, -dj), j_hi = std::min(w, w - dj);
  double acc = 0.0;
  if (j_hi <= j_lo) return acc;
  for (int i = i_lo; i < i_hi; ++i) {
    const double* pa = a + static_cast<std::size_t>(i) * w + j_lo;
    const double* pb = b + static_cast<std::size_t>(i + di) * w + (j_lo + dj);
    const int count = j_hi - j_lo;
    for (int j = 0; j < count; ++j) acc += pa[j] * pb[j];
  }
  return acc;
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  if (xv.rank() != 3 || wv.rank() != 4 || bv.rank() != 1) {
    throw std::invalid_argument("conv2d: expected x[Cin,H,W], w[Cout,Cin,k,k], b[Cout]");
  }
  const int c_in = xv.dim(0), h = xv.dim(1), width = xv.dim(2);
  const int c_out = wv.dim(0), k = wv.dim(2);
  if (wv.dim(1) != c_in || wv.dim(3) != k || bv.dim(0) != c_out || k % 2 == 0) {
    throw std::invalid_argument("conv2d: inconsistent shapes or even kernel");
  }
  const int pad = k / 2;

  Tensor y({c_out, h, width});
  for (int co = 0; co < c_out; ++co) {
    double* yp = y.plane(co);
    const double bias = bv[co];
    const std::size_t plane_sz = static_cast<std::size_t>(h) * width;
    for (std::size_t i = 0; i < plane_sz; ++i) yp[i] = bias;
    for (int ci = 0; ci < c_in; ++ci) {
      const double* xp = xv.plane(ci);
      for (int u = 0; u < k; ++u) {
        for (int v = 0; v < k; ++v) {
          plane_shifted_axpy(yp, xp, h, width, wv.at(co, ci, u, v), u - pad, v - pad);
        }
      }
    }
  }

  auto px = x.node(), pw = w.node(), pb = b.node();
  return make_op(std::move(y), {x, w, b}, [px, pw, pb, c_in, c_out, h, width, k, pad](Node& n) {
    const Tensor& dy = n.grad;
    if (pb->requires_grad) {
      Tensor& gb = pb->ensure_grad();
      for (int co = 0; co < c_out; ++co) {
        const double* dp = dy.plane(co);
        double acc = 0.0;
        const std::size_t plane_sz = static_cast<std::size_t>(h) * width;
        for (std::size_t i = 0; i < plane_sz; ++i) acc += dp[i];
        gb[co] += acc;
      }
    }
    if (pw->requires_grad) {
      Tensor& gw = pw->ensure_grad();
      for (int co = 0; co < c_out; ++co) {
        const double* dp = dy.plane(co);
        for (int ci = 0; ci < c_in; ++ci) {
          const double* xp = px->value.plane(ci);
          for (int u = 0; u < k; ++u) {
            for (int v = 0; v < k; ++v) {
              gw.at(co, ci, u, v) += plane_shifted_dot(dp, xp, h, width, u - pad, v - pad);
            }
          }
        }
      }
    }
    if (px->requires_grad) {
      Tensor& gx = px->ensure_grad();
      for (int co = 0; co < c_out; ++co) {
        const double* dp = dy.plane(co);
        for (int ci = 0; ci < c_in; ++ci) {
          double* gp = gx.plane(ci);
          for (int u = 0; u < k; ++u) {
            for (int v = 0; v < k; ++v) {
              plane_shifted_axpy(gp, dp, h, width, pw->value.at(co, ci, u, v), pad - u, pad - v);
            }
          }
        }
      }
    }
  });
}

Var avg_pool2(const Var& x) {
  const Tensor& v = x.value();
  if (v.rank() != 3 || v.dim(1) % 2 || v.dim(2) % 2) {
    throw std::invalid_argument("avg_pool2: expects [C,H,W] with even H,W");
  }
  const int c = v.dim(0), h = v.dim(1) / 2, w = v.dim(2) / 2;
  Tensor y({c, h, w});
  for (int ci = 0; ci < c; ++ci) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        y.at(ci, i, j) = 0.25 * (v.at(ci, 2 * i, 2 * j) + v.at(ci, 2 * i, 2 * j + 1) +
                                 v.at(ci, 2 * i + 1, 2 * j) + v.at(ci, 2 * i + 1, 2 * j + 1));
      }
    }
  }
  auto px = x.node();
  return make_op(std::move(y), {x}, [px, c, h, w](Node& n) {
    if (!px->requires_grad) return;
    Tensor& g = px->ensure_grad();
    for (int ci = 0; ci < c; ++ci) {
      for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
          const double gv = 0.25 * n.grad.at(ci, i, j);
          g.at(ci, 2 * i, 2 * j) += gv;
          g.at(ci, 2 * i, 2 * j + 1) += gv;
          g.at(ci, 2 * i + 1, 2 * j) += gv;
          g.at(ci, 2 * i + 1, 2 * j + 1) += gv;
        }
      }
    }
  });
}

Var upsample_nearest2(const Var& x) {
  const Tensor& v = x.value();
  if (v.rank() != 3) throw std::invalid_argument("upsample_nearest2: expects [C,H,W]");
  const int c = v.dim(0), h = v.dim(1), w = v.dim(2);
  Tensor y({c, 2 * h, 2 * w});
  for (int ci = 0; ci < c; ++ci) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const double val = v.at(ci, i, j);
        y.at(ci, 2 * i, 2 * j) = val;
        y.at(ci, 2 * i, 2 * j + 1) = val;
        y.at(ci, 2 * i + 1, 2 * j) = val;
        y.at(ci, 2 * i + 1, 2 * j + 1) = val;
      }
    }
  }
  auto px = x.node();
  return make_op(std::move(y), {x}, [px, c, h, w](Node& n) {
    if (!px->requires_grad) return;
    Tensor& g = px->ensure_grad();
    for (int ci = 0; ci < c; ++ci) {
      for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
          g.at(ci, i, j) += n.grad.at(ci, 2 * i, 2 * j) + n.grad.at(ci, 2 * i, 2 * j + 1) +
                            n.grad.at(ci, 2 * i + 1, 2 * j) + n.grad.at(ci, 2 * i + 1, 2 * j + 1);
        }
      }
    }
  });
}

Var adaptive_avg_pool(const Var& x, int out_h, int out_w) {
  const Tensor& v = x.value();
  const bool is_plane = v.rank() == 2;
  if (!is_plane && v.rank() != 3) throw std::invalid_argument("adaptive_avg_pool: expects [H,W] or [C,H,W]");
  const int c = is_plane ? 1 : v.dim(0);
  const int h = v.dim(is_plane ? 0 : 1), w = v.dim(is_plane ? 1 : 2);
  if (out_h > h || out_w > w || out_h < 1 || out_w < 1) {
    throw std::invalid_argument("adaptive_avg_pool: output larger than input");
  }
  Tensor y(is_plane ? std::vector<int>{out_h, out_w} : std::vector<int>{c, out_h, out_w});
  for (int ci = 0; ci < c; ++ci) {
    const double* xp = is_plane ? v.data() : v.plane(ci);
    double* yp = is_plane ? y.data() : y.plane(ci);
    for (int i = 0; i < out_h; ++i) {
      const int i0 = (i * h) / out_h, i1 = ((i + 1) * h) / out_h;
      for (int j = 0; j < out_w; ++j) {
        const int j0 = (j * w) / out_w, j1 = ((j + 1) * w) / out_w;
        double acc = 0.0;
        for (int p = i0; p < i1; ++p)
          for (int q = j0; q < j1; ++q) acc += xp[static_cast<std::size_t>(p) * w + q];
        yp[static_cast<std::size_t>(i) * out_w + j] = acc / ((i1 - i0) * (j1 - j0));
      }
    }
  }
  auto px = x.node();
  return make_op(std::move(y), {x}, [px, c, h, w, out_h, out_w, is_plane](Node& n) {
    if (!px->requires_grad) return;
    Tensor& g = px->ensure_grad();
    for (int ci = 0; ci < c; ++ci) {
      double* gp = is_plane ? g.data() : g.plane(ci);
      const double* dp = is_plane ? n.grad.data() : n.grad.plane(ci);
      for (int i = 0; i < out_h; ++i) {
        const int i0 = (i * h) / out_h, i1 = ((i + 1) * h) / out_h;
        for (int j = 0; j < out_w; ++j) {
          const int j0 = (j * w) / out_w, j1 = ((j + 1) * w) / out_w;
          const double gv = dp[static_cast<std::size_t>(i) * out_w + j] / ((i1 - i0) * (j1 - j0));
          for (int p = i0; p < i1; ++p)
            for (int q = j0; q < j1; ++q) gp[static_cast<std::size_t>(p) * w + q] += gv;
        }
      }
    }
  });
}

Var global_avg_pool(const Var& x) {
  const Tensor& v = x.value();
  if (v.rank() != 3) throw std::invalid_argument("global_avg_pool: expects [C,H,W]");
  const int c = v.dim(0);
  const std::size_t plane_sz = static_cast<std::size_t>(v.dim(1)) * v.dim(2);
  Tensor y({c});
  for (int ci = 0; ci < c; ++ci) {
    const double* p = v.plane(ci);
    double acc = 0.0;
    for (std::size_t i = 0; i < plane_sz; ++i) acc += p[i];
    y[ci] = acc / static_cast<double>(plane_sz);
  }
  auto px = x.node();
  return make_op(std::move(y), {x}, [px, c, plane_sz](Node& n) {
    if (!px->requires_grad) return;
    Tensor& g = px->ensure_grad();
    for (int ci = 0; ci < c; ++ci) {
      const double gv = n.grad[ci] / static_cast<double>(plane_sz);
      double* gp = g.plane(ci);
      for (std::size_t i = 0; i < plane_sz; ++i) gp[i] += gv;
    }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  if (xv.rank() != 1 || wv.rank() != 2 || bv.rank() != 1 || wv.dim(1) != xv.dim(0) ||
      wv.dim(0) != bv.dim(0)) {
    throw std::invalid_argument("linear: expected x[Cin], w[Cout,Cin], b[Cout]");
  }
  const int c_out = wv.dim(0), c_in = wv.dim(1);
  Tensor y({c_out});
  for (int o = 0; o < c_out; ++o) {
    double acc = bv[o];
    for (int i = 0; i < c_in; ++i) acc += wv.at(o, i) * xv[i];
    y[o] = acc;
  }
  auto px = x.node(), pw = w.node(), pb = b.node();
  return make_op(std::move(y), {x, w, b}, [px, pw, pb, c_out, c_in](Node& n) {
    if (pb->requires_grad) {
      Tensor& g = pb->ensure_grad();
      for (int o = 0; o < c_out; ++o) g[o] += n.grad[o];
    }
    if (pw->requires_grad) {
      Tensor& g = pw->ensure_grad();
      for (int o = 0; o < c_out; ++o)
        for (int i = 0; i < c_in; ++i) g.at(o, i) += n.grad[o] * px->value[i];
    }
    if (px->requires_grad) {
      Tensor& g = px->ensure_grad();
      for (int o = 0; o < c_out; ++o)
        for (int i = 0; i < c_in; ++i) g[i] += n.grad[o] * pw->value.at(o, i);
    }
  });
}

Var topk_keep(const Var& scores, int k) {
  const Tensor& v = scores.value();
  if (v.rank() != 1) throw std::invalid_argument("topk_keep: expects a vector");
  const int c = v.dim(0);
  if (k < 1 || k > c) throw std::invalid_argument("topk_keep: k out of range");
  std::vector<int> idx(c);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] > v[b]; });
  std::vector<char> keep(c, 0);
  for (int i = 0; i < k; ++i) keep[idx[i]] = 1;
  Tensor y({c});
  for (int i = 0; i < c; ++i) y[i] = keep[i] ? v[i] : 0.0;
  auto ps = scores.node();
  return make_op(std::move(y), {scores}, [ps, keep](Node& n) {
    if (!ps->requires_grad) return;
    Tensor& g = ps->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (keep[i]) g[i] += n.grad[i];
  });
}

Var channel_scale(const Var& x, const Var& s) {
  const Tensor& xv = x.value();
  const Tensor& sv = s.value();
  if (xv.rank() != 3 || sv.rank() != 1 || sv.dim(0) != xv.dim(0)) {
    throw std::invalid_argument("channel_scale: expects x[C,H,W], s[C]");
  }
  const int c = xv.dim(0);
  const std::size_t plane_sz = static_cast<std::size_t>(xv.dim(1)) * xv.dim(2);
  Tensor y(xv.shape());
  for (int ci = 0; ci < c; ++ci) {
    const double* xp = xv.plane(ci);
    double* yp = y.plane(ci);
    const double sc = sv[ci];
    for (std::size_t i = 0; i < plane_sz; ++i) yp[i] = xp[i] * sc;
  }
  auto px = x.node(), psn = s.node();
  return make_op(std::move(y), {x, s}, [px, psn, c, plane_sz](Node& n) {
    for (int ci = 0; ci < c; ++ci) {
      const double* dp = n.grad.plane(ci);
      if (px->requires_grad) {
        double* gp = px->ensure_grad().plane(ci);
        const double sc = psn->value[ci];
        for (std::size_t i = 0; i < plane_sz; ++i) gp[i] += dp[i] * sc;
      }
      if (psn->requires_grad) {
        const double* xp = px->value.plane(ci);
        double acc = 0.0;
        for (std::size_t i = 0; i < plane_sz; ++i) acc += dp[i] * xp[i];
        psn->ensure_grad()[ci] += acc;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// spectral
// ---------------------------------------------------------------------------

std::pair<Var, Var> fft2(const Var& x) {
  const Tensor& v = x.value();
  if (v.rank() != 2) throw std::invalid_argument("fft2: expects a [H,W] plane");
  Tensor re, im;
  dft2(v, nullptr, re, im, /*inverse=*/false);
  auto px = x.node();
  // Gradients of the real DFT: d/dx Re(Wx) routes through Re(W g), and
  // d/dx Im(Wx) through Im(W g), using the symmetry of the DFT matrix.
  Var re_var = make_op(std::move(re), {x}, [px](Node& n) {
    if (!px->requires_grad) return;
    Tensor gre, gim;
    dft2(n.grad, nullptr, gre, gim, /*inverse=*/false);
    Tensor& g = px->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += gre[i];
  });
  Var im_var = make_op(std::move(im), {x}, [px](Node& n) {
    if (!px->requires_grad) return;
    Tensor gre, gim;
    dft2(n.grad, nullptr, gre, gim, /*inverse=*/false);
    Tensor& g = px->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += gim[i];
  });
  return {re_var, im_var};
}

Var ifft2_real(const Var& re, const Var& im) {
  check_same_shape(re, im, "ifft2_real");
  const Tensor& rv = re.value();
  if (rv.rank() != 2) throw std::invalid_argument("ifft2_real: expects [H,W] planes");
  const double norm = 1.0 / static_cast<double>(rv.size());
  Tensor yre, yim;
  dft2(rv, &im.value(), yre, yim, /*inverse=*/true);
  Tensor y(rv.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = yre[i] * norm;
  auto pr = re.node(), pi = im.node();
  return make_op(std::move(y), {re, im}, [pr, pi, norm](Node& n) {
    Tensor gre, gim;
    dft2(n.grad, nullptr, gre, gim, /*inverse=*/false);
    if (pr->requires_grad) {
      Tensor& g = pr->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += norm * gre[i];
    }
    if (pi->requires_grad) {
      Tensor& g = pi->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += norm * gim[i];
    }
  });
}

Var l2_normalize(const Var& v, double eps) {
  Var n = sqrt_(add_scalar(sum(mul(v, v)), eps));
  return scale_by(v, recip(n));
}

}  // namespace weathercycle::ad
