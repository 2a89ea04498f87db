// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

// Dense float64 tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle onto a graph node. Operations on tensors that
// require gradients record a node holding their inputs and a closure that
// pushes the node's gradient back into those inputs; backward() replays the
// closures in reverse topological order.
//
// Arithmetic primitives: matmul, add, mul, div, concat, relu, sigmoid, log,
// exp, softmax_lastdim, reduce_max, reduce_mean, broadcast.
// Indexing primitives (no arithmetic): transpose, reshape, gather_rows.
// Everything else in this header is composed from those.

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spil {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::shared_ptr<std::vector<double>> data;
  bool requires_grad = false;
  std::optional<std::vector<double>> grad;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into inputs' grads.
  std::function<void(Node&)> backward;
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> data() const;
  double item() const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();
  void clear_grad();

  /// A fresh leaf sharing this tensor's storage but owning its own gradient.
  /// Lets several graphs read the same parameters while differentiating
  /// independently.
  Tensor shadow() const;

  /// A constant copy of the values, cut off from the graph.
  Tensor detach() const;

  /// Write access reserved for optimizer steps, checkpoint loading and
  /// finite-difference probes. Mutating a tensor that feeds a live graph
  /// invalidates that graph.
  std::span<double> mutable_data();
  std::span<double> mutable_grad();

  bool same_storage(const Tensor& other) const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

// --- arithmetic primitives ---

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor log(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor softmax_lastdim(const Tensor& x);
/// Max along `axis`, keeping the axis with extent 1. Ties go to the lowest index.
Tensor reduce_max(const Tensor& x, std::size_t axis);
/// Mean along `axis`, keeping the axis with extent 1.
Tensor reduce_mean(const Tensor& x, std::size_t axis);
/// Expands extent-1 axes to `shape` (same rank).
Tensor broadcast(const Tensor& x, const Shape& shape);

// --- indexing primitives ---

Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);

// --- composites ---

Tensor scale(const Tensor& x, double factor);
Tensor neg(const Tensor& x);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor reduce_sum(const Tensor& x, std::size_t axis);

/// Reverse pass from a scalar. Gradients accumulate (+=) into every reachable
/// tensor that requires them.
void backward(const Tensor& loss);

}  // namespace spil
