// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/trainer.hpp"

#include <string>

namespace nerfcc {

/// Everything needed to resume or render: model parameters, optimizer
/// moments, and the training configuration (stored as config/... tensors).
struct Checkpoint {
  TrainConfig config;
  ParameterStore store;
  AdamState adam;
  int64_t step = 0;
  int n_images = 0;
};

Checkpoint make_checkpoint(const TrainState& state, int n_images);

/// Binary, magic NFCC0001: a table of (name, shape, little-endian doubles)
/// for parameters, adam/... moments, and config/... scalars.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Lighting table lookup helpers over checkpoint parameters.
SHLighting lighting_from_store(const ParameterStore& store, int image_index);
SHLighting mean_lighting(const ParameterStore& store, int n_images);

}  // namespace nerfcc
