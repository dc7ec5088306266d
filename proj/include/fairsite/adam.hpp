#pragma once

#include <vector>

#include "fairsite/params.hpp"

namespace fairsite {

// Adaptive-moment gradient descent over every tensor in a ParamStore.
class Adam {
 public:
  Adam(const ParamStore& store, double learning_rate, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (int h = 0; h < store.count(); ++h) {
      m_.push_back(Mat::Zero(store[h].rows(), store[h].cols()));
      v_.push_back(Mat::Zero(store[h].rows(), store[h].cols()));
    }
  }

  // grads[h] is the gradient of the minimized loss for handle h.
  void step(ParamStore& store, const std::vector<Mat>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    for (int h = 0; h < store.count(); ++h) {
      const std::size_t i = static_cast<std::size_t>(h);
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseProduct(grads[i]);
      store[h].array() -=
          lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<Mat> m_, v_;
};

}  // namespace fairsite
