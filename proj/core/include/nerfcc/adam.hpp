// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/tensor.hpp"

#include <cstdint>

namespace nerfcc {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  int64_t step = 0;
  // First/second moment buffers keyed by parameter name, allocated lazily.
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
};

/// Standard bias-corrected Adam update over every tensor in the store,
/// consuming the tensors' grad buffers (grads are left untouched).
void adam_step(AdamState& state, ParameterStore& params);

}  // namespace nerfcc
