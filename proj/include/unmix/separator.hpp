#pragma once

#include "unmix/nets.hpp"

namespace unmix {

// Graph-carrying separation of one mixture batch:
//   x_hat = y * M(y),  b_hat = y - x_hat,  so x_hat + b_hat == y.
template <typename T>
struct Separation {
  Var<T> y;
  Var<T> x_hat, b_hat, mask;
};

template <typename T>
Separation<T> separate(const MaskNet<T>& net, const Var<T>& y) {
  Separation<T> s;
  s.y = y;
  s.mask = net.forward(y);
  s.x_hat = mul(y, s.mask);
  s.b_hat = sub(y, s.x_hat);
  return s;
}

// Plain-tensor result for evaluation and bindings.
template <typename T>
struct SeparationResult {
  Tensor<T> x_hat, b_hat, mask;
};

template <typename T>
Tensor<T> mask_forward(const MaskNet<T>& net, const Tensor<T>& y) {
  return net.forward(constant(Tensor<T>(y)))->value;
}

template <typename T>
SeparationResult<T> separate(const MaskNet<T>& net, const Tensor<T>& y) {
  auto s = separate(net, constant(Tensor<T>(y)));
  return {std::move(s.x_hat->value), std::move(s.b_hat->value), std::move(s.mask->value)};
}

}  // namespace unmix
