#pragma once

// Element-wise Adam written from the update rule.

#include <cmath>
#include <vector>

namespace oracle {

struct ScalarAdam {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<double> m, v;
  int t = 0;

  void step(std::vector<double>& theta, const std::vector<double>& grad) {
    if (m.empty()) {
      m.assign(theta.size(), 0.0);
      v.assign(theta.size(), 0.0);
    }
    ++t;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = beta1 * m[k] + (1 - beta1) * grad[k];
      v[k] = beta2 * v[k] + (1 - beta2) * grad[k] * grad[k];
      const double m_hat = m[k] / (1 - std::pow(beta1, t));
      const double v_hat = v[k] / (1 - std::pow(beta2, t));
      theta[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
};

}  // namespace oracle
