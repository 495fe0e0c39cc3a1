#pragma once

#include "jointrl/nn.hpp"

namespace jointrl {

// Adam with bias correction. Parameters whose gradient was not produced in the
// last backward pass are skipped, matching the usual grad-is-none convention.
template <typename T>
class AdamT {
 public:
  AdamT() = default;
  AdamT(std::vector<VarT<T>> params, T lr, T beta1 = T(0.9), T beta2 = T(0.999),
        T eps = T(1e-8))
      : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
      m_.push_back(TensorT<T>::zeros(p.value().shape()));
      v_.push_back(TensorT<T>::zeros(p.value().shape()));
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.node()->grad_ready = false;
  }

  void step() {
    ++t_;
    const T bc1 = T(1) - std::pow(b1_, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(b2_, static_cast<T>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto node = params_[i].node();
      if (!node->grad_ready) continue;
      auto g = node->grad.arr();
      m_[i].arr() = b1_ * m_[i].arr() + (T(1) - b1_) * g;
      v_[i].arr() = b2_ * v_[i].arr() + (T(1) - b2_) * g.square();
      node->value.arr() -=
          lr_ * (m_[i].arr() / bc1) / ((v_[i].arr() / bc2).sqrt() + eps_);
    }
  }

  T lr() const { return lr_; }
  void set_lr(T lr) { lr_ = lr; }
  const std::vector<VarT<T>>& params() const { return params_; }

 private:
  std::vector<VarT<T>> params_;
  std::vector<TensorT<T>> m_, v_;
  T lr_ = T(1e-3), b1_ = T(0.9), b2_ = T(0.999), eps_ = T(1e-8);
  long t_ = 0;
};

using Adam = AdamT<float>;

// target := tau * online + (1 - tau) * target, elementwise over matched lists.
template <typename T>
void ema_update(const std::vector<VarT<T>>& online, const std::vector<VarT<T>>& target, T tau) {
  if (!(tau >= T(0) && tau <= T(1)))
    throw std::out_of_range("ema_update: tau must lie in [0, 1]");
  if (online.size() != target.size())
    throw std::invalid_argument("ema_update: parameter list size mismatch");
  for (size_t i = 0; i < online.size(); ++i) {
    if (!online[i].value().same_shape(target[i].value()))
      throw std::invalid_argument("ema_update: parameter shape mismatch");
    target[i].value().arr() =
        tau * online[i].value().arr() + (T(1) - tau) * target[i].value().arr();
  }
}

template <typename T>
void hard_copy(const std::vector<VarT<T>>& online, const std::vector<VarT<T>>& target) {
  ema_update(online, target, T(1));
}

}  // namespace jointrl
