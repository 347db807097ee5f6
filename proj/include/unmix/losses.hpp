#pragma once

#include <cmath>
#include <vector>

#include "unmix/nets.hpp"
#include "unmix/remix.hpp"

namespace unmix {

template <typename T>
struct LossWeights {
  T alpha = T(5);  // weight on the confusion loss
  T beta = T(5);   // weight on the energy-equity loss

  void validate() const {
    if (alpha < T(0) || beta < T(0)) throw ConfigError("loss weights must be non-negative");
  }
};

namespace lossdet {

// Mean of (D(v) - target)^2 over every element of every batch in `batches`.
template <typename T>
Var<T> mean_sq_to_target(const DiscNet<T>& d, const std::vector<Var<T>>& batches, T target) {
  if (batches.empty()) throw ConfigError("loss: empty batch list");
  int64_t total = 0;
  Var<T> acc;
  for (const auto& v : batches) {
    const int64_t n = v->value.dim(0);
    if (n == 0) throw ConfigError("loss: empty batch");
    total += n;
    auto scores = d.forward(v);
    auto sq = square(add_scalar(scores, -target));
    auto s = sum_all(sq);
    acc = acc ? add(acc, s) : s;
  }
  return mul_scalar(acc, T(1) / static_cast<T>(total));
}

}  // namespace lossdet

// LS-GAN discriminator objective: mean (D(y)-1)^2 over reals plus
// mean D(z)^2 over fakes. Fakes must be detached by the caller; this term
// trains D only.
template <typename T>
Var<T> disc_loss(const DiscNet<T>& d, const std::vector<Var<T>>& reals,
                 const std::vector<Var<T>>& fakes) {
  return add(lossdet::mean_sq_to_target(d, reals, T(1)),
             lossdet::mean_sq_to_target(d, fakes, T(0)));
}

// Confusion objective for the masker: mean (D(z)-1)^2 over all remixes
// (z iterates over both z1 and z2). Gradients flow through the fakes into the
// masker; D's own parameters should be frozen by the caller during this term.
template <typename T>
Var<T> confusion_loss(const DiscNet<T>& d, const std::vector<Var<T>>& fakes) {
  return lossdet::mean_sq_to_target(d, fakes, T(1));
}

// Energy-equity term: mean over pixels of (y*m)^2 + (y*(1-m))^2. Per-pixel
// minimizer is m = 1/2, which rules out the all-pass/all-block masks.
template <typename T>
Var<T> energy_equity_loss(const Var<T>& y, const Var<T>& mask) {
  check_same_shape(y->value, mask->value, "energy_equity_loss");
  auto kept = mean_all(square(mul(y, mask)));
  auto rest = mean_all(square(mul(y, rsub_scalar(T(1), mask))));
  return add(kept, rest);
}

template <typename T>
T energy_equity_loss(const Tensor<T>& y, const Tensor<T>& mask) {
  return energy_equity_loss(constant(Tensor<T>(y)), constant(Tensor<T>(mask)))->value[0];
}

// Cycle-reconstruction term, mean absolute error per mixture:
//   mean|y1_bar - y1| + mean|y2_bar - y2|.
template <typename T>
Var<T> cycle_loss(const Var<T>& y1, const Var<T>& y2, const Cycled<T>& cyc) {
  auto d1 = mean_all(abs_val(sub(cyc.y1_bar, y1)));
  auto d2 = mean_all(abs_val(sub(cyc.y2_bar, y2)));
  return add(d1, d2);
}

template <typename T>
T cycle_loss(const Tensor<T>& y1, const Tensor<T>& y2, const Tensor<T>& y1_bar,
             const Tensor<T>& y2_bar) {
  check_same_shape(y1, y1_bar, "cycle_loss");
  check_same_shape(y2, y2_bar, "cycle_loss");
  Cycled<T> cyc;
  cyc.y1_bar = constant(Tensor<T>(y1_bar));
  cyc.y2_bar = constant(Tensor<T>(y2_bar));
  return cycle_loss(constant(Tensor<T>(y1)), constant(Tensor<T>(y2)), cyc)->value[0];
}

// L_Total = L_C + alpha * L_M + beta * L_E.
template <typename T>
T total_masker_loss(T l_c, T l_m, T l_e, const LossWeights<T>& w) {
  w.validate();
  const T total = l_c + w.alpha * l_m + w.beta * l_e;
  if (!std::isfinite(total))
    throw DivergenceError("total masker loss is not finite (l_c=" + std::to_string(l_c) +
                          " l_m=" + std::to_string(l_m) + " l_e=" + std::to_string(l_e) + ")");
  return total;
}

}  // namespace unmix
