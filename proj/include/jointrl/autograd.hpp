#pragma once

#include <functional>
#include <memory>
#include <unordered_set>

#include "jointrl/tensor.hpp"

namespace jointrl {

// Reverse-mode autodiff node. Graphs are rebuilt per step and freed when the
// last VarT handle goes away; parents are held by shared_ptr so a loss handle
// keeps its whole subgraph alive until backward() runs.
template <typename T>
struct NodeT {
  TensorT<T> value;
  TensorT<T> grad;
  bool requires_grad = false;
  bool grad_ready = false;
  std::vector<std::shared_ptr<NodeT>> parents;
  std::function<void(NodeT&)> backprop;  // scatter this->grad into parents

  TensorT<T>& ensure_grad() {
    if (!grad_ready) {
      grad = TensorT<T>::zeros(value.shape());
      grad_ready = true;
    }
    return grad;
  }
};

template <typename T>
class VarT {
 public:
  VarT() = default;
  explicit VarT(std::shared_ptr<NodeT<T>> n) : n_(std::move(n)) {}

  static VarT leaf(TensorT<T> v, bool requires_grad = false) {
    auto n = std::make_shared<NodeT<T>>();
    n->value = std::move(v);
    n->requires_grad = requires_grad;
    return VarT(std::move(n));
  }
  static VarT constant(TensorT<T> v) { return leaf(std::move(v), false); }
  static VarT scalar(T v) { return constant(TensorT<T>::scalar(v)); }

  bool defined() const { return static_cast<bool>(n_); }
  // Pointer-like handle: value/grad are mutable through a const VarT.
  TensorT<T>& value() const { return n_->value; }
  TensorT<T>& grad() const { return n_->ensure_grad(); }
  bool requires_grad() const { return n_ && n_->requires_grad; }
  std::shared_ptr<NodeT<T>> node() const { return n_; }

  T item() const {
    if (value().size() != 1) throw std::logic_error("item(): tensor is not scalar");
    return value()[0];
  }

  VarT detach() const {
    auto n = std::make_shared<NodeT<T>>();
    n->value = n_->value;  // copy; detached view is a fresh leaf
    n->requires_grad = false;
    return VarT(std::move(n));
  }

 private:
  std::shared_ptr<NodeT<T>> n_;
};

// Thread-local switch that drops backprop closures while building graphs;
// target-network and rollout forwards run under NoGradGuard.
struct GradMode {
  static bool& enabled() {
    thread_local bool on = true;
    return on;
  }
};

struct NoGradGuard {
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::enabled() = false; }
  ~NoGradGuard() { GradMode::enabled() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

namespace detail {

template <typename T>
void topo_collect(NodeT<T>* node, std::unordered_set<NodeT<T>*>& seen,
                  std::vector<NodeT<T>*>& order) {
  // Iterative DFS post-order; graphs can be a few thousand nodes deep.
  struct Frame {
    NodeT<T>* n;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  if (seen.insert(node).second) stack.push_back({node, 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.n->parents.size()) {
      NodeT<T>* p = f.n->parents[f.next_parent++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }
}

}  // namespace detail

// Backpropagate from a scalar root; gradients accumulate into every leaf with
// requires_grad on the path.
template <typename T>
void backward(const VarT<T>& root) {
  if (!root.defined()) throw std::logic_error("backward: undefined variable");
  if (root.value().size() != 1) throw std::logic_error("backward: root must be scalar");
  if (!root.requires_grad()) return;
  std::unordered_set<NodeT<T>*> seen;
  std::vector<NodeT<T>*> order;
  detail::topo_collect(root.node().get(), seen, order);
  root.node()->ensure_grad().fill(T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT<T>* n = *it;
    if (n->backprop && n->grad_ready) n->backprop(*n);
  }
}

// Helper for op implementations.
template <typename T>
VarT<T> make_op(TensorT<T> value, std::vector<VarT<T>> parents,
                std::function<void(NodeT<T>&)> backprop) {
  auto n = std::make_shared<NodeT<T>>();
  n->value = std::move(value);
  if (GradMode::enabled()) {
    for (auto& p : parents) {
      if (p.requires_grad()) n->requires_grad = true;
      n->parents.push_back(p.node());
    }
    if (n->requires_grad) n->backprop = std::move(backprop);
    if (!n->requires_grad) n->parents.clear();
  }
  return VarT<T>(std::move(n));
}

using Var = VarT<float>;
using VarD = VarT<double>;

}  // namespace jointrl
