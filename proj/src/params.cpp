// SPDX-License-Identifier: Apache-2.0
#include "weathercycle/params.hpp"

#include <cmath>

#include "weathercycle/errors.hpp"

namespace weathercycle {

void snap_tensor_f32(Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = snap_f32(t[i]);
}

ad::Var& ParameterSet::add(const std::string& name, Tensor init) {
  if (entries_.count(name)) throw DataError("ParameterSet: duplicate parameter " + name);
  auto [it, inserted] = entries_.emplace(name, ad::Var::leaf(std::move(init)));
  (void)inserted;
  return it->second;
}

const ad::Var& ParameterSet::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw DataError("ParameterSet: missing parameter " + name);
  return it->second;
}

ad::Var& ParameterSet::get_mutable(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw DataError("ParameterSet: missing parameter " + name);
  return it->second;
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, var] : entries_) out.push_back(name);
  return out;
}

std::size_t ParameterSet::total_values() const {
  std::size_t n = 0;
  for (const auto& [name, var] : entries_) n += var.value().size();
  return n;
}

std::size_t ParameterSet::total_values(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& [name, var] : entries_) {
    if (name.rfind(prefix, 0) == 0) n += var.value().size();
  }
  return n;
}

void ParameterSet::zero_grads() {
  for (auto& [name, var] : entries_) var.zero_grad();
}

namespace {
Tensor uniform_init(std::vector<int> shape, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = snap_f32(rng.uniform(-bound, bound));
  return t;
}
}  // namespace

Tensor conv_weight_init(int c_out, int c_in, int k, Rng& rng) {
  return uniform_init({c_out, c_in, k, k}, c_in * k * k, rng);
}

Tensor linear_weight_init(int c_out, int c_in, Rng& rng) {
  return uniform_init({c_out, c_in}, c_in, rng);
}

}  // namespace weathercycle
