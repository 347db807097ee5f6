#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "unmix/tensor.hpp"

namespace unmix {

// Reverse-mode autodiff over Tensor<T>. A graph is built per forward pass and
// torn down when the root Var goes out of scope; parameters are long-lived
// leaves. Templated on the scalar so the gradient-oracle tests can run the
// exact same code paths in double precision.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated lazily
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backward_fn;

  Tensor<T>& ensure_grad() {
    if (!grad.same_shape(value)) grad = Tensor<T>(value.shape());
    return grad;
  }

  void zero_grad() {
    if (!grad.empty()) std::fill(grad.vec().begin(), grad.vec().end(), T(0));
  }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> make_var(Tensor<T> value, bool requires_grad = false) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

template <typename T>
Var<T> constant(Tensor<T> value) {
  return make_var(std::move(value), false);
}

template <typename T>
Var<T> detach(const Var<T>& v) {
  return make_var(Tensor<T>(v->value), false);
}

namespace detail {

template <typename T>
bool any_requires(const std::vector<Var<T>>& parents) {
  for (const auto& p : parents)
    if (p->requires_grad) return true;
  return false;
}

template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backward_fn) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = any_requires(parents);
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return n;
}

// Iterative post-order over the parent DAG.
template <typename T>
std::vector<Node<T>*> topo_order(const Var<T>& root) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node<T>* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace detail

// Backpropagate from a scalar root, accumulating into .grad of every
// reachable node with requires_grad set.
template <typename T>
void backward(const Var<T>& root) {
  if (root->value.numel() != 1)
    throw DimensionError("backward: root must be scalar, got " + root->value.shape_str());
  if (!root->requires_grad) return;
  auto order = detail::topo_order(root);
  root->ensure_grad();
  root->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

// ---- elementwise ops ----

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  check_same_shape(a->value, b->value, "add");
  Tensor<T> out(a->value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = a->value[i] + b->value[i];
  return detail::make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
    const int64_t n = self.value.numel();
    if (a->requires_grad) {
      auto& g = a->ensure_grad();
      for (int64_t i = 0; i < n; ++i) g[i] += self.grad[i];
    }
    if (b->requires_grad) {
      auto& g = b->ensure_grad();
      for (int64_t i = 0; i < n; ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  check_same_shape(a->value, b->value, "sub");
  Tensor<T> out(a->value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = a->value[i] - b->value[i];
  return detail::make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
    const int64_t n = self.value.numel();
    if (a->requires_grad) {
      auto& g = a->ensure_grad();
      for (int64_t i = 0; i < n; ++i) g[i] += self.grad[i];
    }
    if (b->requires_grad) {
      auto& g = b->ensure_grad();
      for (int64_t i = 0; i < n; ++i) g[i] -= self.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  check_same_shape(a->value, b->value, "mul");
  Tensor<T> out(a->value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = a->value[i] * b->value[i];
  return detail::make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
    const int64_t n = self.value.numel();
    if (a->requires_grad) {
      auto& g = a->ensure_grad();
      for (int64_t i = 0; i < n; ++i) g[i] += self.grad[i] * b->value[i];
    }
    if (b->requires_grad) {
      auto& g = b->ensure_grad();
      for (int64_t i = 0; i < n; ++i) g[i] += self.grad[i] * a->value[i];
    }
  });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T c) {
  Tensor<T> out(a->value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = a->value[i] + c;
  return detail::make_op<T>(std::move(out), {a}, [a](Node<T>& self) {
    if (!a->requires_grad) return;
    auto& g = a->ensure_grad();
    const int64_t n = self.value.numel();
    for (int64_t i = 0; i < n; ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Var<T> mul_scalar(const Var<T>& a, T c) {
  Tensor<T> out(a->value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = a->value[i] * c;
  return detail::make_op<T>(std::move(out), {a}, [a, c](Node<T>& self) {
    if (!a->requires_grad) return;
    auto& g = a->ensure_grad();
    const int64_t n = self.value.numel();
    for (int64_t i = 0; i < n; ++i) g[i] += c * self.grad[i];
  });
}

// c - a, used for the complement mask (1 - m).
template <typename T>
Var<T> rsub_scalar(T c, const Var<T>& a) {
  Tensor<T> out(a->value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = c - a->value[i];
  return detail::make_op<T>(std::move(out), {a}, [a](Node<T>& self) {
    if (!a->requires_grad) return;
    auto& g = a->ensure_grad();
    const int64_t n = self.value.numel();
    for (int64_t i = 0; i < n; ++i) g[i] -= self.grad[i];
  });
}

template <typename T>
Var<T> square(const Var<T>& a) {
  Tensor<T> out(a->value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = a->value[i] * a->value[i];
  return detail::make_op<T>(std::move(out), {a}, [a](Node<T>& self) {
    if (!a->requires_grad) return;
    auto& g = a->ensure_grad();
    const int64_t n = self.value.numel();
    for (int64_t i = 0; i < n; ++i) g[i] += T(2) * a->value[i] * self.grad[i];
  });
}

// |a| with subgradient 0 at the origin.
template <typename T>
Var<T> abs_val(const Var<T>& a) {
  Tensor<T> out(a->value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out[i] = std::abs(a->value[i]);
  return detail::make_op<T>(std::move(out), {a}, [a](Node<T>& self) {
    if (!a->requires_grad) return;
    auto& g = a->ensure_grad();
    const int64_t n = self.value.numel();
    for (int64_t i = 0; i < n; ++i) {
      const T x = a->value[i];
      if (x > T(0))
        g[i] += self.grad[i];
      else if (x < T(0))
        g[i] -= self.grad[i];
    }
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  Tensor<T> out(a->value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) {
    const T x = a->value[i];
    out[i] = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                       : std::exp(x) / (T(1) + std::exp(x));
  }
  return detail::make_op<T>(std::move(out), {a}, [a](Node<T>& self) {
    if (!a->requires_grad) return;
    auto& g = a->ensure_grad();
    const int64_t n = self.value.numel();
    for (int64_t i = 0; i < n; ++i) {
      const T s = self.value[i];
      g[i] += self.grad[i] * s * (T(1) - s);
    }
  });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope) {
  Tensor<T> out(a->value.shape());
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) {
    const T x = a->value[i];
    out[i] = x > T(0) ? x : slope * x;
  }
  return detail::make_op<T>(std::move(out), {a}, [a, slope](Node<T>& self) {
    if (!a->requires_grad) return;
    auto& g = a->ensure_grad();
    const int64_t n = self.value.numel();
    for (int64_t i = 0; i < n; ++i)
      g[i] += a->value[i] > T(0) ? self.grad[i] : slope * self.grad[i];
  });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  return leaky_relu(a, T(0));
}

// ---- reductions (double accumulation regardless of T) ----

template <typename T>
Var<T> sum_all(const Var<T>& a) {
  double acc = 0.0;
  const int64_t n = a->value.numel();
  for (int64_t i = 0; i < n; ++i) acc += static_cast<double>(a->value[i]);
  return detail::make_op<T>(Tensor<T>::scalar(static_cast<T>(acc)), {a}, [a](Node<T>& self) {
    if (!a->requires_grad) return;
    auto& g = a->ensure_grad();
    const T s = self.grad[0];
    const int64_t n = a->value.numel();
    for (int64_t i = 0; i < n; ++i) g[i] += s;
  });
}

template <typename T>
Var<T> mean_all(const Var<T>& a) {
  const int64_t n = a->value.numel();
  if (n == 0) throw DimensionError("mean_all: empty tensor");
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += static_cast<double>(a->value[i]);
  return detail::make_op<T>(Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n))), {a},
                            [a, n](Node<T>& self) {
                              if (!a->requires_grad) return;
                              auto& g = a->ensure_grad();
                              const T s = self.grad[0] / static_cast<T>(n);
                              for (int64_t i = 0; i < n; ++i) g[i] += s;
                            });
}

}  // namespace unmix
