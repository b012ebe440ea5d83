#pragma once

// Dense row-major tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle to a shared graph node. Operations in ops.hpp
// produce new nodes; when gradient recording is enabled and any input
// requires a gradient, the result remembers its parents and a closure that
// pushes its gradient back to them. backward() walks the graph in reverse
// topological order.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cecnet/errors.hpp"

namespace cecnet {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace detail {
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode(); }

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <class T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

template <class T = double>
class Tensor {
 public:
  using value_type = T;

  Tensor() : node_(std::make_shared<Node<T>>()) {}

  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    if (shape_size(shape) != data.size()) {
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + shape_str(shape));
    }
    node_->shape = std::move(shape);
    node_->value = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
  }

  static Tensor full(Shape shape, T v, bool requires_grad = false) {
    const auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<T>(n, v), requires_grad);
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return Tensor(Shape{}, std::vector<T>{v}, requires_grad);
  }

  static Tensor vector(std::vector<T> v, bool requires_grad = false) {
    const auto n = v.size();
    return Tensor(Shape{n}, std::move(v), requires_grad);
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<T>> rows,
                       bool requires_grad = false) {
    const std::size_t m = rows.size();
    const std::size_t n = m ? rows.begin()->size() : 0;
    std::vector<T> data;
    data.reserve(m * n);
    for (const auto& r : rows) {
      if (r.size() != n) throw DimensionError("ragged matrix literal");
      data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor(Shape{m, n}, std::move(data), requires_grad);
  }

  static Tensor identity(std::size_t n, bool requires_grad = false) {
    auto t = zeros(Shape{n, n}, requires_grad);
    for (std::size_t i = 0; i < n; ++i) t.node_->value[i * n + i] = T(1);
    return t;
  }

  static Tensor from_node(std::shared_ptr<Node<T>> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rows() const { return rank() == 2 ? node_->shape[0] : 0; }
  std::size_t cols() const { return rank() == 2 ? node_->shape[1] : 0; }

  std::span<const T> data() const { return node_->value; }
  // Only for leaves: optimizers and finite-difference probes.
  std::span<T> mutable_data() { return node_->value; }

  T item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }
  T operator[](std::size_t i) const { return node_->value[i]; }
  T operator()(std::size_t i, std::size_t j) const { return node_->value[i * node_->shape[1] + j]; }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on) {
    node_->requires_grad = on;
    return *this;
  }
  bool is_leaf() const { return node_->leaf; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  /// Value copy cut off from the graph.
  Tensor detach() const { return Tensor(shape(), node_->value, false); }

  /// Deep copy; keeps requires_grad but not the graph.
  Tensor clone() const { return Tensor(shape(), node_->value, requires_grad()); }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

  template <class U>
  Tensor<U> cast() const {
    std::vector<U> out(node_->value.begin(), node_->value.end());
    return Tensor<U>(shape(), std::move(out), requires_grad());
  }

 private:
  std::shared_ptr<Node<T>> node_;
};

namespace detail {

/// Builds an op result. The backward closure is only attached when recording
/// is on and at least one input needs a gradient.
template <class T, class F>
Tensor<T> make_op(Shape shape, std::vector<T> value, std::vector<Tensor<T>> inputs, F&& backward) {
  auto out = Tensor<T>(std::move(shape), std::move(value));
  if (!grad_enabled()) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  node.leaf = false;
  node.parents.reserve(inputs.size());
  for (auto& in : inputs) node.parents.push_back(in.node());
  node.backward = std::forward<F>(backward);
  return out;
}

template <class T>
bool wants_grad(const std::shared_ptr<Node<T>>& n) {
  return n->requires_grad;
}

}  // namespace detail

/// Reverse-mode sweep from a scalar loss. Leaves accumulate into their grad
/// buffers; intermediate gradients are reset at the start of every sweep.
template <class T>
void backward(const Tensor<T>& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  // iterative post-order DFS
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node<T>* n : order) {
    if (!n->leaf) n->grad.assign(n->value.size(), T(0));
  }
  loss.node()->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (!n->leaf && n->backward) n->backward(*n);
  }
}

}  // namespace cecnet
