// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "weathercycle/autodiff.hpp"
#include "weathercycle/params.hpp"
#include "weathercycle/rng.hpp"
#include "weathercycle/tensor.hpp"

namespace wctest {

using weathercycle::Rng;
using weathercycle::Tensor;
namespace ad = weathercycle::ad;

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Central finite difference of a scalar-valued function at x[i].
inline double central_diff(const std::function<double(const Tensor&)>& f, Tensor x, std::size_t i,
                           double eps = 1e-5) {
  const double orig = x[i];
  x[i] = orig + eps;
  const double fp = f(x);
  x[i] = orig - eps;
  const double fm = f(x);
  return (fp - fm) / (2.0 * eps);
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::string worst;  // location of the worst element, for failure messages
};

// Compares reverse-mode gradients of `build` (graph from leaves) against
// central differences on `num_samples` randomly chosen coordinates of each
// leaf. Relative error uses max(|analytic|, |numeric|, floor) in the
// denominator so near-zero gradients compare absolutely.
inline GradCheckResult grad_check(
    const std::function<ad::Var(const std::vector<ad::Var>&)>& build, std::vector<Tensor> inputs,
    Rng& rng, int num_samples = 20, double eps = 1e-5, double floor = 1e-4) {
  std::vector<ad::Var> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(ad::Var::leaf(t));
  ad::Var root = build(leaves);
  ad::backward(root);

  GradCheckResult res;
  for (std::size_t li = 0; li < inputs.size(); ++li) {
    const Tensor& g = leaves[li].grad();
    const std::size_t n = inputs[li].size();
    const int samples = static_cast<int>(std::min<std::size_t>(num_samples, n));
    for (int s = 0; s < samples; ++s) {
      const std::size_t i =
          n <= static_cast<std::size_t>(num_samples) ? static_cast<std::size_t>(s)
                                                     : static_cast<std::size_t>(rng.next_index(static_cast<int>(n)));
      auto f = [&](const Tensor& x) {
        std::vector<ad::Var> vars;
        vars.reserve(inputs.size());
        for (std::size_t k = 0; k < inputs.size(); ++k) {
          vars.push_back(ad::Var::leaf(k == li ? x : inputs[k]));
        }
        return build(vars).item();
      };
      const double num = central_diff(f, inputs[li], i, eps);
      const double ana = g.empty() ? 0.0 : g[i];
      const double denom = std::max({std::fabs(num), std::fabs(ana), floor});
      const double rel = std::fabs(num - ana) / denom;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = "leaf " + std::to_string(li) + " idx " + std::to_string(i) + " analytic " +
                    std::to_string(ana) + " numeric " + std::to_string(num);
      }
      ++res.checked;
    }
  }
  return res;
}

// FD check for graphs whose leaves live in a ParameterSet. `forward` rebuilds
// the graph from the current parameter values and returns the scalar root;
// sample coordinates are drawn uniformly over the flattened concatenation of
// all parameters.
template <typename Forward>
GradCheckResult param_grad_check(weathercycle::ParameterSet& ps, Forward forward, Rng& rng,
                                 int num_samples = 20, double eps = 1e-5, double floor = 1e-4) {
  ps.zero_grads();
  {
    ad::Var root = forward();
    ad::backward(root);
  }
  std::map<std::string, Tensor> analytic;
  std::vector<std::pair<std::string, std::size_t>> sizes;
  std::size_t total = 0;
  for (const auto& [name, var] : ps) {
    analytic[name] = var.has_grad() ? var.grad() : Tensor(var.value().shape());
    sizes.emplace_back(name, var.value().size());
    total += var.value().size();
  }

  GradCheckResult res;
  for (int s = 0; s < num_samples; ++s) {
    std::size_t flat = static_cast<std::size_t>(rng.next_double() * static_cast<double>(total));
    if (flat >= total) flat = total - 1;
    std::string name;
    std::size_t idx = flat;
    for (const auto& [n, sz] : sizes) {
      if (idx < sz) {
        name = n;
        break;
      }
      idx -= sz;
    }
    Tensor& value = ps.get_mutable(name).mutable_value();
    const double orig = value[idx];
    value[idx] = orig + eps;
    const double fp = forward().item();
    value[idx] = orig - eps;
    const double fm = forward().item();
    value[idx] = orig;
    const double num = (fp - fm) / (2.0 * eps);
    const double ana = analytic.at(name)[idx];
    const double denom = std::max({std::fabs(num), std::fabs(ana), floor});
    const double rel = std::fabs(num - ana) / denom;
    if (rel > res.max_rel_err) {
      res.max_rel_err = rel;
      res.worst = name + " idx " + std::to_string(idx) + " analytic " + std::to_string(ana) +
                  " numeric " + std::to_string(num);
    }
    ++res.checked;
  }
  return res;
}

}  // namespace wctest
