// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#include "spil/optim.hpp"

#include <algorithm>
#include <unordered_set>

#include "spil/error.hpp"

namespace spil {

void ParameterSet::add(std::string name, Tensor tensor) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name: " + name);
  if (!tensor.requires_grad()) throw ConfigError("parameter " + name + " does not require grad");
  items_.push_back({std::move(name), std::move(tensor)});
}

std::size_t ParameterSet::element_count() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.tensor.size();
  return n;
}

const Parameter* ParameterSet::find(std::string_view name) const {
  auto it = std::find_if(items_.begin(), items_.end(), [&](const Parameter& p) { return p.name == name; });
  return it == items_.end() ? nullptr : &*it;
}

std::vector<const Parameter*> ParameterSet::by_name() const {
  std::vector<const Parameter*> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.push_back(&p);
  std::sort(out.begin(), out.end(), [](const Parameter* a, const Parameter* b) { return a->name < b->name; });
  return out;
}

void ParameterSet::zero_grads() {
  for (auto& p : items_) p.tensor.zero_grad();
}

void ParameterSet::clear_grads() {
  for (auto& p : items_) p.tensor.clear_grad();
}

OptimizerState OptimizerState::for_parameters(const ParameterSet& params, double learning_rate, double momentum) {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  OptimizerState state;
  state.learning_rate = learning_rate;
  state.momentum = momentum;
  for (const auto& p : params.items()) state.velocity.emplace_back(p.tensor.size(), 0.0);
  return state;
}

void sgd_momentum_step(ParameterSet& params, OptimizerState& state) {
  if (state.velocity.size() != params.size()) throw ConfigError("optimizer state does not match parameter set");
  for (const auto& p : params.items()) {
    if (!p.tensor.has_grad()) throw Error("sgd_momentum_step: parameter " + p.name + " has no gradient");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& w = params.items()[k].tensor;
    auto& v = state.velocity[k];
    auto data = w.mutable_data();
    auto grad = w.mutable_grad();
    if (v.size() != data.size()) throw ConfigError("velocity buffer shape mismatch for " + params.items()[k].name);
    for (std::size_t i = 0; i < data.size(); ++i) {
      v[i] = state.momentum * v[i] + grad[i];
      data[i] -= state.learning_rate * v[i];
      grad[i] = 0.0;
    }
  }
}

}  // namespace spil
