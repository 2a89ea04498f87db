// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#include "spil/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace spil {

namespace {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
}

}  // namespace

double finite_difference_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  const std::vector<double> base(x.data().begin(), x.data().end());
  Tensor leaf = Tensor::from(x.shape(), base, true);
  backward(f(leaf));
  const std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());

  NoGradGuard no_grad;
  double worst = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto probe = base;
    probe[i] = base[i] + h;
    const double up = f(Tensor::from(x.shape(), probe)).item();
    probe[i] = base[i] - h;
    const double down = f(Tensor::from(x.shape(), probe)).item();
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * h)));
  }
  return worst;
}

GradCheckReport finite_difference_check(const std::function<Tensor()>& loss, ParameterSet& params, double h) {
  params.clear_grads();
  backward(loss());
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params.items()) {
    if (p.tensor.has_grad()) {
      analytic.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
    } else {
      analytic.emplace_back(p.tensor.size(), 0.0);
    }
  }
  params.clear_grads();

  NoGradGuard no_grad;
  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = params.items()[k];
    auto data = p.tensor.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double original = data[i];
      data[i] = original + h;
      const double up = loss().item();
      data[i] = original - h;
      const double down = loss().item();
      data[i] = original;
      const double err = relative_error(analytic[k][i], (up - down) / (2.0 * h));
      if (err > report.max_error) {
        report.max_error = err;
        report.worst_parameter = p.name;
      }
      ++report.checked_elements;
    }
  }
  return report;
}

}  // namespace spil
