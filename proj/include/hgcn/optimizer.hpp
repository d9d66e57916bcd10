#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "hgcn/autodiff.hpp"

namespace hgcn {

// Adam over a ParamStore's gradient accumulators. Moment buffers are laid out
// to match the store on the first step.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& store) {
    if (m_.empty()) {
      for (std::size_t i = 0; i < store.size(); ++i) {
        m_.push_back(Tensor::zeros(store.entry(i).value.shape));
        v_.push_back(Tensor::zeros(store.entry(i).value.shape));
      }
    }
    if (m_.size() != store.size())
      throw std::invalid_argument("Adam: store layout changed between steps");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < store.size(); ++i) {
      auto& e = store.entry(i);
      for (std::size_t j = 0; j < e.value.data.size(); ++j) {
        const double g = e.grad.data[j];
        m_[i].data[j] = beta1_ * m_[i].data[j] + (1.0 - beta1_) * g;
        v_[i].data[j] = beta2_ * v_[i].data[j] + (1.0 - beta2_) * g * g;
        const double m_hat = m_[i].data[j] / bc1;
        const double v_hat = v_[i].data[j] / bc2;
        e.value.data[j] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
      }
    }
  }

  long steps_taken() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace hgcn
