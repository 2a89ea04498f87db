// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#include "spil/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "spil/error.hpp"

namespace spil {

namespace {

thread_local bool g_grad_enabled = true;

using detail::Node;
using BackwardFn = std::function<void(Node&)>;

std::vector<double>& grad_buffer(Node& node) {
  if (!node.grad) node.grad.emplace(node.data->size(), 0.0);
  return *node.grad;
}

const std::vector<double>& values(const Node& node) { return *node.data; }

const Node& checked(const Tensor& t, const char* op) {
  if (!t.defined()) throw ShapeError(std::string(op) + ": undefined tensor");
  return *t.node();
}

Tensor make_result(Shape shape, std::vector<double> out, std::initializer_list<const Tensor*> inputs,
                   BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::make_shared<std::vector<double>>(std::move(out));
  if (g_grad_enabled) {
    bool any = false;
    for (const Tensor* in : inputs) any = any || in->requires_grad();
    if (any) {
      node->requires_grad = true;
      for (const Tensor* in : inputs) node->inputs.push_back(in->node());
      node->backward = std::move(fn);
    }
  }
  return Tensor(std::move(node));
}

Tensor make_result_n(Shape shape, std::vector<double> out, std::span<const Tensor> inputs, BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::make_shared<std::vector<double>>(std::move(out));
  if (g_grad_enabled) {
    bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      for (const Tensor& in : inputs) node->inputs.push_back(in.node());
      node->backward = std::move(fn);
    }
  }
  return Tensor(std::move(node));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (checked(a, op).shape != checked(b, op).shape) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t d = 0; d < axis; ++d) s.outer *= shape[d];
  s.extent = shape[axis];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) s.inner *= shape[d];
  return s;
}

template <class Forward, class Derivative>
Tensor unary(const Tensor& x, const char* op, Forward f, Derivative df) {
  const Node& in = checked(x, op);
  std::vector<double> out(in.data->size());
  std::transform(in.data->begin(), in.data->end(), out.begin(), f);
  return make_result(in.shape, std::move(out), {&x}, [df](Node& self) {
    Node& src = *self.inputs[0];
    if (!src.requires_grad) return;
    auto& g = grad_buffer(src);
    const auto& xs = values(src);
    const auto& ys = values(self);
    const auto& up = *self.grad;
    for (std::size_t i = 0; i < up.size(); ++i) g[i] += up[i] * df(xs[i], ys[i]);
  });
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

// --- Tensor ---

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one axis");
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor extents must be positive: " + shape_to_string(shape));
  }
  if (shape_size(shape) != values.size()) {
    throw ShapeError("shape " + shape_to_string(shape) + " does not match " + std::to_string(values.size()) +
                     " values");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::make_shared<std::vector<double>>(std::move(values));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return checked(*this, "shape").shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_to_string(s));
  return s[axis];
}

std::size_t Tensor::size() const { return checked(*this, "size").data->size(); }

std::span<const double> Tensor::data() const { return *checked(*this, "data").data; }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_to_string(shape()));
  return (*node_->data)[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  const Shape& s = shape();
  if (s.size() != 2 || row >= s[0] || col >= s[1]) throw ShapeError("at(): index out of range");
  return (*node_->data)[row * s[1] + col];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && node_->grad.has_value(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw Error("tensor has no gradient");
  return *node_->grad;
}

void Tensor::zero_grad() {
  auto& g = grad_buffer(*node_);
  std::fill(g.begin(), g.end(), 0.0);
}

void Tensor::clear_grad() { node_->grad.reset(); }

Tensor Tensor::shadow() const {
  auto node = std::make_shared<Node>();
  node->shape = shape();
  node->data = node_->data;
  node->requires_grad = true;
  return Tensor(std::move(node));
}

Tensor Tensor::detach() const { return from(shape(), std::vector<double>(data().begin(), data().end())); }

std::span<double> Tensor::mutable_data() { return *checked(*this, "mutable_data").data; }

std::span<double> Tensor::mutable_grad() { return grad_buffer(*node_); }

bool Tensor::same_storage(const Tensor& other) const {
  return node_ && other.node_ && node_->data == other.node_->data;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_mode_enabled() { return g_grad_enabled; }

// --- arithmetic primitives ---

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Node& na = checked(a, "matmul");
  const Node& nb = checked(b, "matmul");
  if (na.shape.size() != 2 || nb.shape.size() != 2 || na.shape[1] != nb.shape[0]) {
    throw ShapeError("matmul: shape mismatch " + shape_to_string(na.shape) + " x " + shape_to_string(nb.shape));
  }
  const std::size_t m = na.shape[0], k = na.shape[1], n = nb.shape[1];
  const auto& av = *na.data;
  const auto& bv = *nb.data;
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
  return make_result({m, n}, std::move(out), {&a, &b}, [m, k, n](Node& self) {
    Node& ia = *self.inputs[0];
    Node& ib = *self.inputs[1];
    const auto& g = *self.grad;
    const auto& av = values(ia);
    const auto& bv = values(ib);
    if (ia.requires_grad) {
      auto& ga = grad_buffer(ia);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bv[p * n + j];
          ga[i * k + p] += s;
        }
      }
    }
    if (ib.requires_grad) {
      auto& gb = grad_buffer(ib);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
        }
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto& av = *a.node()->data;
  const auto& bv = *b.node()->data;
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    const auto& g = *self.grad;
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      auto& gi = grad_buffer(*in);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto& av = *a.node()->data;
  const auto& bv = *b.node()->data;
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    const auto& g = *self.grad;
    Node& ia = *self.inputs[0];
    Node& ib = *self.inputs[1];
    const auto& av = values(ia);
    const auto& bv = values(ib);
    if (ia.requires_grad) {
      auto& ga = grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (ib.requires_grad) {
      auto& gb = grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "div");
  const auto& av = *a.node()->data;
  const auto& bv = *b.node()->data;
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] / bv[i];
  return make_result(a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    const auto& g = *self.grad;
    Node& ia = *self.inputs[0];
    Node& ib = *self.inputs[1];
    const auto& bv = values(ib);
    const auto& yv = values(self);
    if (ia.requires_grad) {
      auto& ga = grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bv[i];
    }
    if (ib.requires_grad) {
      auto& gb = grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * yv[i] / bv[i];
    }
  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = checked(parts[0], "concat").shape;
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_to_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    const Shape& s = checked(p, "concat").shape;
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) throw ShapeError("concat: shape mismatch " + shape_to_string(first) + " vs " + shape_to_string(s));
    out_shape[axis] += s[axis];
  }
  const AxisSplit os = split_axis(out_shape, axis);
  std::vector<double> out(shape_size(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    offsets.push_back(offset);
    const std::size_t span_len = p.shape()[axis] * os.inner;
    const auto& pv = *p.node()->data;
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(o * span_len), span_len,
                  out.begin() + static_cast<std::ptrdiff_t>(o * os.extent * os.inner + offset));
    }
    offset += span_len;
  }
  return make_result_n(out_shape, std::move(out), parts, [os, offsets, axis](Node& self) {
    const auto& g = *self.grad;
    for (std::size_t idx = 0; idx < self.inputs.size(); ++idx) {
      Node& in = *self.inputs[idx];
      if (!in.requires_grad) continue;
      auto& gi = grad_buffer(in);
      const std::size_t span_len = in.shape[axis] * os.inner;
      for (std::size_t o = 0; o < os.outer; ++o) {
        const double* src = g.data() + o * os.extent * os.inner + offsets[idx];
        double* dst = gi.data() + o * span_len;
        for (std::size_t i = 0; i < span_len; ++i) dst[i] += src[i];
      }
    }
  });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor log(const Tensor& x) {
  return unary(
      x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor softmax_lastdim(const Tensor& x) {
  const Node& in = checked(x, "softmax_lastdim");
  const std::size_t width = in.shape.back();
  const std::size_t rows = in.data->size() / width;
  const auto& xv = *in.data;
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = xv.data() + r * width;
    double* dst = out.data() + r * width;
    const double peak = *std::max_element(src, src + width);
    double total = 0.0;
    for (std::size_t j = 0; j < width; ++j) total += (dst[j] = std::exp(src[j] - peak));
    for (std::size_t j = 0; j < width; ++j) dst[j] /= total;
  }
  return make_result(in.shape, std::move(out), {&x}, [rows, width](Node& self) {
    Node& src = *self.inputs[0];
    auto& gx = grad_buffer(src);
    const auto& y = values(self);
    const auto& g = *self.grad;
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t base = r * width;
      double dot = 0.0;
      for (std::size_t j = 0; j < width; ++j) dot += g[base + j] * y[base + j];
      for (std::size_t j = 0; j < width; ++j) gx[base + j] += y[base + j] * (g[base + j] - dot);
    }
  });
}

Tensor reduce_max(const Tensor& x, std::size_t axis) {
  const Node& in = checked(x, "reduce_max");
  if (axis >= in.shape.size()) throw ShapeError("reduce_max: axis out of range for " + shape_to_string(in.shape));
  const AxisSplit s = split_axis(in.shape, axis);
  Shape out_shape = in.shape;
  out_shape[axis] = 1;
  std::vector<double> out(s.outer * s.inner);
  std::vector<std::size_t> argmax(out.size());
  const auto& xv = *in.data;
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      std::size_t best = o * s.extent * s.inner + i;
      for (std::size_t a = 1; a < s.extent; ++a) {
        const std::size_t idx = (o * s.extent + a) * s.inner + i;
        if (xv[idx] > xv[best]) best = idx;
      }
      out[o * s.inner + i] = xv[best];
      argmax[o * s.inner + i] = best;
    }
  }
  return make_result(std::move(out_shape), std::move(out), {&x}, [argmax = std::move(argmax)](Node& self) {
    auto& gx = grad_buffer(*self.inputs[0]);
    const auto& g = *self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) gx[argmax[i]] += g[i];
  });
}

Tensor reduce_mean(const Tensor& x, std::size_t axis) {
  const Node& in = checked(x, "reduce_mean");
  if (axis >= in.shape.size()) throw ShapeError("reduce_mean: axis out of range for " + shape_to_string(in.shape));
  const AxisSplit s = split_axis(in.shape, axis);
  Shape out_shape = in.shape;
  out_shape[axis] = 1;
  std::vector<double> out(s.outer * s.inner, 0.0);
  const auto& xv = *in.data;
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t a = 0; a < s.extent; ++a) {
      for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += xv[(o * s.extent + a) * s.inner + i];
    }
  }
  const double inv = 1.0 / static_cast<double>(s.extent);
  for (double& v : out) v *= inv;
  return make_result(std::move(out_shape), std::move(out), {&x}, [s, inv](Node& self) {
    auto& gx = grad_buffer(*self.inputs[0]);
    const auto& g = *self.grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t a = 0; a < s.extent; ++a) {
        for (std::size_t i = 0; i < s.inner; ++i) gx[(o * s.extent + a) * s.inner + i] += g[o * s.inner + i] * inv;
      }
    }
  });
}

Tensor broadcast(const Tensor& x, const Shape& shape) {
  const Node& in = checked(x, "broadcast");
  const Shape& from = in.shape;
  bool ok = from.size() == shape.size();
  for (std::size_t d = 0; ok && d < shape.size(); ++d) ok = from[d] == shape[d] || from[d] == 1;
  if (!ok) throw ShapeError("broadcast: cannot expand " + shape_to_string(from) + " to " + shape_to_string(shape));

  // Map every output element to its source element.
  const std::size_t rank = shape.size();
  std::vector<std::size_t> src_stride(rank, 0);
  std::size_t stride = 1;
  for (std::size_t d = rank; d-- > 0;) {
    src_stride[d] = from[d] == 1 ? 0 : stride;
    stride *= from[d];
  }
  const std::size_t total = shape_size(shape);
  std::vector<std::size_t> source(total);
  std::vector<std::size_t> index(rank, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t s = 0;
    for (std::size_t d = 0; d < rank; ++d) s += index[d] * src_stride[d];
    source[flat] = s;
    for (std::size_t d = rank; d-- > 0;) {
      if (++index[d] < shape[d]) break;
      index[d] = 0;
    }
  }
  const auto& xv = *in.data;
  std::vector<double> out(total);
  for (std::size_t i = 0; i < total; ++i) out[i] = xv[source[i]];
  return make_result(shape, std::move(out), {&x}, [source = std::move(source)](Node& self) {
    auto& gx = grad_buffer(*self.inputs[0]);
    const auto& g = *self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) gx[source[i]] += g[i];
  });
}

// --- indexing primitives ---

Tensor transpose(const Tensor& x) {
  const Node& in = checked(x, "transpose");
  if (in.shape.size() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_to_string(in.shape));
  const std::size_t r = in.shape[0], c = in.shape[1];
  const auto& xv = *in.data;
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xv[i * c + j];
  }
  return make_result({c, r}, std::move(out), {&x}, [r, c](Node& self) {
    auto& gx = grad_buffer(*self.inputs[0]);
    const auto& g = *self.grad;
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  const Node& in = checked(x, "reshape");
  if (shape_size(shape) != in.data->size()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(in.shape) + " as " + shape_to_string(shape));
  }
  return make_result(std::move(shape), *in.data, {&x}, [](Node& self) {
    auto& gx = grad_buffer(*self.inputs[0]);
    const auto& g = *self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  const Node& in = checked(x, "gather_rows");
  if (rows.empty()) throw ShapeError("gather_rows: empty row list");
  const std::size_t n = in.shape[0];
  const std::size_t width = in.data->size() / n;
  const auto& xv = *in.data;
  std::vector<double> out(rows.size() * width);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) throw ShapeError("gather_rows: row " + std::to_string(rows[r]) + " out of range " + shape_to_string(in.shape));
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(rows[r] * width), width,
                out.begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  Shape out_shape = in.shape;
  out_shape[0] = rows.size();
  return make_result(std::move(out_shape), std::move(out), {&x},
                     [idx = std::vector<std::size_t>(rows.begin(), rows.end()), width](Node& self) {
                       auto& gx = grad_buffer(*self.inputs[0]);
                       const auto& g = *self.grad;
                       for (std::size_t r = 0; r < idx.size(); ++r) {
                         for (std::size_t c = 0; c < width; ++c) gx[idx[r] * width + c] += g[r * width + c];
                       }
                     });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  const Node& in = checked(x, "slice_rows");
  if (count == 0 || begin + count > in.shape[0]) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for " + shape_to_string(in.shape));
  }
  const std::size_t width = in.data->size() / in.shape[0];
  const auto first = in.data->begin() + static_cast<std::ptrdiff_t>(begin * width);
  std::vector<double> out(first, first + static_cast<std::ptrdiff_t>(count * width));
  Shape out_shape = in.shape;
  out_shape[0] = count;
  return make_result(std::move(out_shape), std::move(out), {&x}, [offset = begin * width](Node& self) {
    auto& gx = grad_buffer(*self.inputs[0]);
    const auto& g = *self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) gx[offset + i] += g[i];
  });
}

// --- composites ---

Tensor scale(const Tensor& x, double factor) { return mul(x, Tensor::full(x.shape(), factor)); }

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, neg(b)); }

Tensor reduce_sum(const Tensor& x, std::size_t axis) {
  return scale(reduce_mean(x, axis), static_cast<double>(x.dim(axis)));
}

// --- reverse pass ---

void backward(const Tensor& loss) {
  if (!loss.defined()) throw Error("backward: undefined tensor");
  if (loss.size() != 1) throw ShapeError("backward: loss must be a scalar, got " + shape_to_string(loss.shape()));
  if (!loss.requires_grad()) throw Error("backward: loss is not connected to any tensor that requires grad");

  // Iterative post-order DFS gives a topological order with inputs first.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  Node* root = loss.node().get();
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* node : order) {
    if (node->backward) node->grad.reset();
  }
  grad_buffer(*root)[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->grad) node->backward(*node);
  }
  // Intermediate gradients are scratch space; leaves keep theirs.
  for (Node* node : order) {
    if (node->backward && node != root) node->grad.reset();
  }
}

}  // namespace spil
