#pragma once

#include "unmix/separator.hpp"

namespace unmix {

// Flipped recombinations of two separated mixtures:
//   z1 = x_hat_1 + b_hat_2,  z2 = x_hat_2 + b_hat_1.
// Evaluated as y2 + (x_hat_1 - x_hat_2) and y1 + (x_hat_2 - x_hat_1): same
// algebra, but an identical input pair reproduces itself bitwise, which keeps
// the fixpoint invariants exact in float. Pair sums are conserved:
// z1 + z2 == y1 + y2 up to rounding.
template <typename T>
struct Remixed {
  Var<T> z1, z2;
};

template <typename T>
Remixed<T> remix(const Separation<T>& s1, const Separation<T>& s2) {
  auto flip = sub(s1.x_hat, s2.x_hat);
  return {add(s2.y, flip), sub(s1.y, flip)};
}

template <typename T>
Remixed<T> remix(const MaskNet<T>& net, const Var<T>& y1, const Var<T>& y2) {
  return remix(separate(net, y1), separate(net, y2));
}

// Second unmix-and-remix pass. The cross assignment pairs T(z1) with the
// complement of z2, which is what makes a perfect separator reproduce the
// original mixtures:
//   x1_bar = T(z1)   b2_bar = z1 - T(z1)
//   x2_bar = T(z2)   b1_bar = z2 - T(z2)
//   y1_bar = x1_bar + b1_bar,  y2_bar = x2_bar + b2_bar.
template <typename T>
struct Cycled {
  Var<T> y1_bar, y2_bar;
  Var<T> x1_bar, x2_bar, b1_bar, b2_bar;
};

template <typename T>
Cycled<T> cycle(const MaskNet<T>& net, const Remixed<T>& rz) {
  auto s1 = separate(net, rz.z1);
  auto s2 = separate(net, rz.z2);
  Cycled<T> c;
  c.x1_bar = s1.x_hat;
  c.b2_bar = s1.b_hat;
  c.x2_bar = s2.x_hat;
  c.b1_bar = s2.b_hat;
  // Same exactness-preserving association as remix.
  auto flip = sub(c.x1_bar, c.x2_bar);
  c.y1_bar = add(rz.z2, flip);
  c.y2_bar = sub(rz.z1, flip);
  return c;
}

// Plain-tensor variants.
template <typename T>
struct RemixResult {
  Tensor<T> z1, z2;
};

template <typename T>
RemixResult<T> remix(const MaskNet<T>& net, const Tensor<T>& y1, const Tensor<T>& y2) {
  auto rz = remix(net, constant(Tensor<T>(y1)), constant(Tensor<T>(y2)));
  return {std::move(rz.z1->value), std::move(rz.z2->value)};
}

template <typename T>
struct CycleResult {
  Tensor<T> y1_bar, y2_bar;
};

template <typename T>
CycleResult<T> cycle(const MaskNet<T>& net, const Tensor<T>& z1, const Tensor<T>& z2) {
  Remixed<T> rz{constant(Tensor<T>(z1)), constant(Tensor<T>(z2))};
  auto c = cycle(net, rz);
  return {std::move(c.y1_bar->value), std::move(c.y2_bar->value)};
}

}  // namespace unmix
