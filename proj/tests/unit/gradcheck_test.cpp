// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "spil/gradcheck.hpp"
#include "spil/optim.hpp"
#include "support.hpp"

namespace spil {
namespace {

TEST(GradCheck, SquareIsExactUpToRoundoff) {
  const double err = finite_difference_check([](const Tensor& x) { return mul(x, x); }, Tensor::scalar(3.0), 1e-5);
  EXPECT_LT(err, 1e-8);
}

TEST(GradCheck, SigmoidAtZero) {
  const double err = finite_difference_check([](const Tensor& x) { return sigmoid(x); }, Tensor::scalar(0.0), 1e-5);
  EXPECT_LT(err, 1e-8);
}

TEST(GradCheck, FlagsAMissingGradientPath) {
  // detach() cuts one factor out of the graph, so backward sees x instead of 2x
  // and the relative error is 1/2.
  const double err =
      finite_difference_check([](const Tensor& x) { return mul(x, x.detach()); }, Tensor::scalar(3.0), 1e-5);
  EXPECT_GT(err, 0.4);
}

TEST(GradCheck, ParameterSweepRestoresValuesExactly) {
  Rng rng(5);
  Tensor a = testing::random_tensor({3, 2}, rng, -1, 1, true);
  Tensor b = testing::random_tensor({2, 1}, rng, -1, 1, true);
  ParameterSet params;
  params.add("a", a);
  params.add("b", b);
  const std::vector<double> before_a = testing::values(a);
  const std::vector<double> before_b = testing::values(b);
  const Tensor x = testing::random_tensor({4, 3}, rng);

  const GradCheckReport report = finite_difference_check(
      [&] { return reduce_sum(reduce_sum(sigmoid(matmul(relu(matmul(x, a)), b)), 0), 1); }, params, 1e-5);
  EXPECT_LT(report.max_error, 1e-7);
  EXPECT_EQ(report.checked_elements, 8u);
  EXPECT_EQ(testing::values(a), before_a);
  EXPECT_EQ(testing::values(b), before_b);
}

}  // namespace
}  // namespace spil
