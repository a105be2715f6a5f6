// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/tensor.hpp"

#include <functional>

namespace nerfcc {

/// Loss closure: returns the scalar loss at the store's current values and,
/// when with_grad is set, accumulates d(loss)/d(params) into the grad
/// buffers (which arrive zeroed).
using LossFn = std::function<double(ParameterStore&, bool with_grad)>;

/// Central finite differences against the analytic gradient over every
/// coordinate of every tensor. Returns max over coordinates of
/// |analytic - fd| / max(1e-8, |analytic| + |fd|).
double finite_diff_check(const LossFn& f, ParameterStore& params, double eps = 1e-5);

}  // namespace nerfcc
