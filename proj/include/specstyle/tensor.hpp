// include/specstyle/tensor.hpp
//
// Define-by-run reverse-mode tape. A Tensor is a shaped buffer plus an
// optional handle into the tape that recorded it; ops in ops.hpp record a
// backward closure whenever an input requires gradients. Subgraphs that
// depend only on constants are never recorded.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "specstyle/common.hpp"

namespace specstyle::nn {

// Tape-free n-d value.
template <typename T>
struct Array {
  std::vector<int64_t> shape;
  std::vector<T> data;

  Array() = default;
  Array(std::vector<int64_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (numel_of(shape) != int64_t(data.size())) {
      throw ShapeError("array data length does not match shape " + shape_str(shape));
    }
  }
  explicit Array(std::vector<int64_t> s) : shape(std::move(s)) {
    data.assign(size_t(numel_of(shape)), T(0));
  }
  int64_t numel() const { return int64_t(data.size()); }
};

template <typename T>
class Tape;

template <typename T>
struct Tensor {
  std::vector<int64_t> shape;
  std::shared_ptr<std::vector<T>> data;
  Tape<T>* tape = nullptr;
  int node = -1;
  bool requires_grad = false;

  int64_t numel() const { return numel_of(shape); }
  const T* ptr() const { return data->data(); }
  T* ptr() { return data->data(); }
  const std::vector<T>& values() const { return *data; }

  Array<T> to_array() const { return Array<T>(shape, *data); }
};

// When enabled, every op output is scanned for NaN/Inf and non-finite
// values throw. Off by default; tests switch it on.
void set_debug_check_finite(bool enabled);
bool debug_check_finite();

template <typename T>
inline void throw_if_not_finite(const std::vector<T>& v, const char* op_name) {
  if (!debug_check_finite()) return;
  for (const T x : v) {
    if (!std::isfinite(double(x))) {
      throw ValueError(std::string("non-finite value produced by ") + op_name);
    }
  }
}

template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Constant input: participates in forward math, receives no gradient.
  Tensor<T> constant(std::vector<int64_t> shape, std::vector<T> values) {
    check_size(shape, values.size());
    Tensor<T> t;
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<T>>(std::move(values));
    t.tape = this;
    return t;
  }

  Tensor<T> constant(const Array<T>& a) { return constant(a.shape, a.data); }

  // Shares the buffer instead of copying; still a constant.
  Tensor<T> constant_shared(std::vector<int64_t> shape, std::shared_ptr<std::vector<T>> data) {
    check_size(shape, data->size());
    Tensor<T> t;
    t.shape = std::move(shape);
    t.data = std::move(data);
    t.tape = this;
    return t;
  }

  // Differentiable leaf backed by an external buffer (a network parameter).
  // Registering the same buffer twice returns the same node, so gradient
  // accumulation stays coherent when a parameter appears in several ops.
  Tensor<T> leaf(std::vector<int64_t> shape, std::shared_ptr<std::vector<T>> data) {
    check_size(shape, data->size());
    Tensor<T> t;
    t.shape = std::move(shape);
    t.data = data;
    t.tape = this;
    t.requires_grad = true;
    auto it = leaf_by_buffer_.find(data.get());
    if (it != leaf_by_buffer_.end()) {
      t.node = it->second;
      return t;
    }
    t.node = add_node(int64_t(data->size()), nullptr);
    leaf_by_buffer_.emplace(data.get(), t.node);
    return t;
  }

  // Differentiable input owning a fresh buffer (used by tests and the
  // iterative-optimization baseline).
  Tensor<T> variable(std::vector<int64_t> shape, std::vector<T> values) {
    auto buf = std::make_shared<std::vector<T>>(std::move(values));
    return leaf(std::move(shape), std::move(buf));
  }

  // Called by ops: wraps a computed result and records its backward closure.
  // The closure receives the upstream gradient of the result.
  Tensor<T> result(std::vector<int64_t> shape, std::vector<T> values, bool needs_grad,
                   std::function<void(Tape<T>&, const std::vector<T>&)> backward) {
    Tensor<T> t;
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<T>>(std::move(values));
    t.tape = this;
    if (needs_grad) {
      t.requires_grad = true;
      t.node = add_node(int64_t(t.data->size()), std::move(backward));
    }
    return t;
  }

  // Reverse accumulation from a scalar loss. Interior gradients are freed as
  // soon as they have been propagated; leaf gradients stay readable.
  void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1) {
      throw ShapeError("backward requires a scalar loss, got shape " + shape_str(loss.shape));
    }
    if (loss.tape != nullptr && loss.tape != this) {
      throw ValueError("loss belongs to a different tape");
    }
    if (loss.node < 0) return;  // nothing recorded upstream of the loss
    grad(loss.node).assign(1, T(1));
    for (int id = loss.node; id >= 0; --id) {
      Node& n = nodes_[size_t(id)];
      if (n.grad.empty() || !n.backward) continue;
      n.backward(*this, n.grad);
      n.grad.clear();
      n.grad.shrink_to_fit();
    }
  }

  // Gradient buffer for a node, zero-filled on first touch.
  std::vector<T>& grad(int node) {
    Node& n = nodes_.at(size_t(node));
    if (n.grad.empty()) n.grad.assign(size_t(n.size), T(0));
    return n.grad;
  }

  // Gradient of a registered leaf buffer; zeros if it never entered the loss.
  const std::vector<T>& grad_for(const std::vector<T>* buffer) {
    auto it = leaf_by_buffer_.find(static_cast<const void*>(buffer));
    if (it == leaf_by_buffer_.end()) {
      throw ValueError("buffer was never registered as a leaf on this tape");
    }
    return grad(it->second);
  }

  const std::vector<T>& grad_for(const std::shared_ptr<std::vector<T>>& buffer) {
    return grad_for(buffer.get());
  }

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    int64_t size;
    std::function<void(Tape<T>&, const std::vector<T>&)> backward;
    std::vector<T> grad;
  };

  static void check_size(const std::vector<int64_t>& shape, size_t len) {
    if (numel_of(shape) != int64_t(len)) {
      throw ShapeError("buffer length does not match shape " + shape_str(shape));
    }
  }

  int add_node(int64_t size, std::function<void(Tape<T>&, const std::vector<T>&)> backward) {
    nodes_.push_back(Node{size, std::move(backward), {}});
    return int(nodes_.size()) - 1;
  }

  std::vector<Node> nodes_;
  std::unordered_map<const void*, int> leaf_by_buffer_;
};

}  // namespace specstyle::nn
