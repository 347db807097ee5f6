#pragma once

#include <cmath>
#include <vector>

#include "unmix/autograd.hpp"

namespace unmix {

// ADAM with bias correction. Moments live here and are serialized with the
// training state so a resumed run continues the exact trajectory.
template <typename T>
class Adam {
 public:
  Adam() = default;

  Adam(std::vector<Var<T>> params, T lr, T beta1, T beta2, T eps = T(1e-8))
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  void step() {
    ++t_;
    const T c1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
    const T c2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (p->grad.empty()) continue;  // never touched by this graph
      T* w = p->value.data();
      const T* g = p->grad.data();
      T* m = m_[i].data();
      T* v = v_[i].data();
      const int64_t n = p->value.numel();
      for (int64_t j = 0; j < n; ++j) {
        m[j] = beta1_ * m[j] + (T(1) - beta1_) * g[j];
        v[j] = beta2_ * v[j] + (T(1) - beta2_) * g[j] * g[j];
        const T mhat = m[j] / c1;
        const T vhat = v[j] / c2;
        w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  int64_t steps() const { return t_; }
  void set_steps(int64_t t) { t_ = t; }
  T learning_rate() const { return lr_; }

  size_t size() const { return params_.size(); }
  Tensor<T>& moment1(size_t i) { return m_[i]; }
  Tensor<T>& moment2(size_t i) { return v_[i]; }
  const Tensor<T>& moment1(size_t i) const { return m_[i]; }
  const Tensor<T>& moment2(size_t i) const { return v_[i]; }

 private:
  std::vector<Var<T>> params_;
  std::vector<Tensor<T>> m_, v_;
  int64_t t_ = 0;
  T lr_ = T(1e-4), beta1_ = T(0.5), beta2_ = T(0.999), eps_ = T(1e-8);
};

}  // namespace unmix
