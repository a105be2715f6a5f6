// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/adam.hpp"

#include <cmath>

namespace nerfcc {

void adam_step(AdamState& state, ParameterStore& params) {
  state.step += 1;
  const AdamConfig& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.count(); ++i) {
    Tensor& t = params.tensor(i);
    const std::string& name = params.name(i);
    std::vector<double>& m = state.m[name];
    std::vector<double>& v = state.v[name];
    if (m.empty()) m.assign(t.size(), 0.0);
    if (v.empty()) v.assign(t.size(), 0.0);
    if (m.size() != t.size() || v.size() != t.size())
      throw DataError("adam moment shape mismatch for " + name);
    for (size_t k = 0; k < t.size(); ++k) {
      const double g = t.grad[k];
      if (!std::isfinite(g)) throw NumericError("non-finite gradient for parameter " + name);
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g;
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g * g;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      t.values[k] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

}  // namespace nerfcc
