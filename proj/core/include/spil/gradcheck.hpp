// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>

#include "spil/optim.hpp"
#include "spil/tensor.hpp"

namespace spil {

/// Compares backward() against central differences (f(x+h e_i) - f(x-h e_i)) / 2h
/// for every element of x. Returns max |analytic - numeric| / max(1, |numeric|).
double finite_difference_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h);

struct GradCheckReport {
  double max_error = 0.0;
  std::string worst_parameter;
  std::size_t checked_elements = 0;
};

/// Same comparison over every element of every parameter. `loss` must rebuild
/// its graph on each call; parameter values are restored bit-exactly afterwards.
GradCheckReport finite_difference_check(const std::function<Tensor()>& loss, ParameterSet& params, double h);

}  // namespace spil
