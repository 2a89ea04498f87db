// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "spil/tensor.hpp"

namespace spil {

/// A trainable tensor with a unique dotted-path name, e.g. "block0.local.head3.M".
struct Parameter {
  std::string name;
  Tensor tensor;
};

/// Parameters in registration order. Serialization uses name order instead.
class ParameterSet {
 public:
  void add(std::string name, Tensor tensor);

  std::span<const Parameter> items() const { return items_; }
  std::span<Parameter> items() { return items_; }
  std::size_t size() const { return items_.size(); }
  std::size_t element_count() const;

  const Parameter* find(std::string_view name) const;
  /// Pointers sorted by name; the order parameters are written to disk.
  std::vector<const Parameter*> by_name() const;

  void zero_grads();
  void clear_grads();

 private:
  std::vector<Parameter> items_;
};

struct OptimizerState {
  std::vector<std::vector<double>> velocity;
  double learning_rate = 0.001;
  double momentum = 0.9;

  static OptimizerState for_parameters(const ParameterSet& params, double learning_rate, double momentum);
};

/// v <- momentum * v + grad; w <- w - learning_rate * v; then zero the grads.
/// Throws if any registered parameter has no gradient.
void sgd_momentum_step(ParameterSet& params, OptimizerState& state);

}  // namespace spil
