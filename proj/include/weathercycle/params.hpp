// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "weathercycle/autodiff.hpp"
#include "weathercycle/rng.hpp"
#include "weathercycle/tensor.hpp"

namespace weathercycle {

// Every stored value is snapped to its float32-representable neighbor so the
// 32-bit checkpoint format round-trips bitwise and resumed runs match
// unbroken ones exactly.
inline double snap_f32(double v) { return static_cast<double>(static_cast<float>(v)); }
void snap_tensor_f32(Tensor& t);

// Named, shaped, differentiable parameter arrays. std::map keeps iteration
// order deterministic (sorted by name) for the optimizer and checkpoints.
class ParameterSet {
 public:
  ad::Var& add(const std::string& name, Tensor init);
  const ad::Var& get(const std::string& name) const;
  ad::Var& get_mutable(const std::string& name);
  bool has(const std::string& name) const { return entries_.count(name) != 0; }

  std::vector<std::string> names() const;
  std::size_t count() const { return entries_.size(); }
  std::size_t total_values() const;
  // Total values over parameters whose name starts with prefix.
  std::size_t total_values(const std::string& prefix) const;
  void zero_grads();

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::map<std::string, ad::Var> entries_;
};

// Fan-in-scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)), snapped to
// float32. Biases are zero-initialized by the callers.
Tensor conv_weight_init(int c_out, int c_in, int k, Rng& rng);
Tensor linear_weight_init(int c_out, int c_in, Rng& rng);

}  // namespace weathercycle
