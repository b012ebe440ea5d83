#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cecnet/tensor.hpp"

namespace cecnet {

/// Adam over an ordered parameter list. Moments are stored positionally, so
/// the same list order must be used on every step.
template <class T>
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<std::vector<T>> m, v;

  void step(const std::vector<Tensor<T>*>& params) {
    if (m.size() != params.size()) {
      m.resize(params.size());
      v.resize(params.size());
    }
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = *params[i];
      if (!p.has_grad()) continue;
      if (m[i].size() != p.size()) {
        m[i].assign(p.size(), T(0));
        v[i].assign(p.size(), T(0));
      }
      auto g = p.grad();
      auto x = p.mutable_data();
      for (std::size_t j = 0; j < x.size(); ++j) {
        m[i][j] = static_cast<T>(beta1 * m[i][j] + (1.0 - beta1) * g[j]);
        v[i][j] = static_cast<T>(beta2 * v[i][j] + (1.0 - beta2) * g[j] * g[j]);
        const double mh = m[i][j] / c1, vh = v[i][j] / c2;
        x[j] = static_cast<T>(x[j] - lr * mh / (std::sqrt(vh) + eps));
      }
    }
  }

  static void zero_grad(const std::vector<Tensor<T>*>& params) {
    for (auto* p : params) p->zero_grad();
  }
};

}  // namespace cecnet
