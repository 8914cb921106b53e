#pragma once

#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ets/tensor.hpp"

namespace ets {

// Trainable tensor living outside any tape. Gradients accumulate here after
// Tape::backward; the optimizer consumes and clears them.
template <typename Scalar>
struct Parameter {
  Tensor<Scalar> value;
  Tensor<Scalar> grad;  // empty until first backward

  void zero_grad() { grad = Tensor<Scalar>(); }
};

// Named views over a module tree's parameters and persistent buffers
// (normalization running statistics), used by optimizers and serialization.
template <typename S>
using ParamRefs = std::vector<std::pair<std::string, Parameter<S>*>>;
template <typename S>
using BufferRefs = std::vector<std::pair<std::string, Tensor<S>*>>;

template <typename Scalar>
struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over whole tensors. A fresh tape is built per training
// step; operations are free functions in ops.hpp that push one node each.
template <typename Scalar>
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }

  // Constant leaf: never receives gradient.
  Var<Scalar> value(Tensor<Scalar> v) { return push(std::move(v), false, nullptr); }

  Var<Scalar> leaf(Tensor<Scalar> v, bool requires_grad) {
    return push(std::move(v), requires_grad && grad_enabled_, nullptr);
  }

  // Leaf bound to an external parameter; backward() accumulates into p.grad.
  Var<Scalar> param(Parameter<Scalar>& p, bool trainable = true) {
    return push(p.value, trainable && grad_enabled_, &p);
  }

  const Tensor<Scalar>& val(Var<Scalar> v) const { return nodes_[v.id].value; }

  // Gradient buffer, allocated (zeroed) on first access.
  Tensor<Scalar>& grad(Var<Scalar> v) {
    Node& n = nodes_[v.id];
    if (n.grad.empty()) {
      const auto& s = n.value.shape();
      n.grad = Tensor<Scalar>::zeros(s[0], s[1], s[2], s[3]);
    }
    return n.grad;
  }
  bool has_grad(Var<Scalar> v) const { return !nodes_[v.id].grad.empty(); }
  bool requires_grad(Var<Scalar> v) const { return nodes_[v.id].requires_grad; }

  // Register an op result. `backward` reads this node's grad and accumulates
  // into its parents' grads; it is dropped when no parent needs gradients.
  template <typename Parents>
  Var<Scalar> make(Tensor<Scalar> out, const Parents& parents,
                   std::function<void(Tape&, Var<Scalar>)> backward) {
    bool need = false;
    if (grad_enabled_) {
      for (Var<Scalar> p : parents) need = need || nodes_[p.id].requires_grad;
    }
    Var<Scalar> v = push(std::move(out), need, nullptr);
    if (need) nodes_[v.id].backward = std::move(backward);
    return v;
  }
  Var<Scalar> make(Tensor<Scalar> out, std::initializer_list<Var<Scalar>> parents,
                   std::function<void(Tape&, Var<Scalar>)> backward) {
    return make<std::initializer_list<Var<Scalar>>>(std::move(out), parents, std::move(backward));
  }

  // Reverse sweep from a scalar root. Gradients of parameter leaves are
  // flushed into their Parameter::grad.
  void backward(Var<Scalar> root) {
    if (nodes_[root.id].value.size() != 1)
      fail("shape", "backward: root must be a scalar, got " + nodes_[root.id].value.shape_str());
    grad(root).array().setConstant(Scalar(1));
    for (int32_t i = root.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.backward) {
        n.backward(*this, Var<Scalar>{i});
      } else if (n.bound) {
        if (n.bound->grad.empty()) {
          const auto& s = n.grad.shape();
          n.bound->grad = Tensor<Scalar>::zeros(s[0], s[1], s[2], s[3]);
        }
        n.bound->grad.array() += n.grad.array();
      }
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<Scalar> value;
    Tensor<Scalar> grad;
    std::function<void(Tape&, Var<Scalar>)> backward;
    Parameter<Scalar>* bound = nullptr;
    bool requires_grad = false;
  };

  Var<Scalar> push(Tensor<Scalar> v, bool requires_grad, Parameter<Scalar>* bound) {
    Node n;
    n.value = std::move(v);
    n.requires_grad = requires_grad;
    n.bound = bound;
    nodes_.push_back(std::move(n));
    return Var<Scalar>{static_cast<int32_t>(nodes_.size() - 1)};
  }

  std::deque<Node> nodes_;
  bool grad_enabled_;
};

}  // namespace ets
