// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/gradcheck.hpp"

#include <cmath>

namespace nerfcc {

double finite_diff_check(const LossFn& f, ParameterStore& params, double eps) {
  params.zero_grad();
  const double base = f(params, true);
  if (!std::isfinite(base)) throw NumericError("finite_diff_check: loss not finite");

  std::vector<std::vector<double>> analytic(params.count());
  for (size_t i = 0; i < params.count(); ++i) analytic[i] = params.tensor(i).grad;

  double worst = 0.0;
  for (size_t i = 0; i < params.count(); ++i) {
    Tensor& t = params.tensor(i);
    for (size_t k = 0; k < t.size(); ++k) {
      const double saved = t.values[k];
      t.values[k] = saved + eps;
      const double up = f(params, false);
      t.values[k] = saved - eps;
      const double down = f(params, false);
      t.values[k] = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("finite_diff_check: perturbed loss not finite at " + params.name(i));
      const double fd = (up - down) / (2.0 * eps);
      const double a = analytic[i][k];
      const double rel = std::abs(a - fd) / std::max(1e-8, std::abs(a) + std::abs(fd));
      if (rel > worst) worst = rel;
    }
  }
  return worst;
}

}  // namespace nerfcc
