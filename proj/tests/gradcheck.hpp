#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "unmix/autograd.hpp"
#include "unmix/rng.hpp"

// Central-difference gradient oracle. Rebuilds the loss graph per probe, so
// the function must be deterministic in the parameters.
namespace gradcheck {

struct Result {
  double max_rel_err = 0.0;
  double frac_within = 1.0;  // fraction of probed parameters within tolerance
  int64_t checked = 0;
};

inline double rel_err(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

// Probes every element of every parameter unless stride > 1.
inline Result check(const std::function<unmix::Var<double>()>& loss_fn,
                    const std::vector<unmix::Var<double>>& params, double h = 1e-4,
                    double tol = 1e-3, int64_t stride = 1) {
  for (auto& p : params) p->zero_grad();
  auto root = loss_fn();
  unmix::backward(root);

  std::vector<unmix::Tensor<double>> analytic;
  for (auto& p : params)
    analytic.push_back(p->grad.empty() ? unmix::Tensor<double>(p->value.shape()) : p->grad);

  Result r;
  int64_t within = 0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    for (int64_t i = 0; i < p->value.numel(); i += stride) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double up = loss_fn()->value[0];
      p->value[i] = orig - h;
      const double down = loss_fn()->value[0];
      p->value[i] = orig;
      const double fd = (up - down) / (2.0 * h);
      const double err = rel_err(fd, analytic[pi][i]);
      r.max_rel_err = std::max(r.max_rel_err, err);
      if (err <= tol) ++within;
      ++r.checked;
    }
  }
  r.frac_within = r.checked ? double(within) / double(r.checked) : 1.0;
  return r;
}

}  // namespace gradcheck
