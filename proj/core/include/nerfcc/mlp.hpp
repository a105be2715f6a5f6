// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/tape.hpp"

namespace nerfcc {

enum class Act { None, Relu, Softplus, Sigmoid };

struct MlpSpec {
  int input = 0;
  std::vector<int> hidden;
  int output = 0;
  std::vector<Act> act;  // one per layer, hidden layers then output layer
  uint64_t seed = 0;

  void validate() const;
  int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
  std::pair<int, int> layer_dims(int layer) const;
};

/// MLP whose parameters live in a ParameterStore under
/// "<prefix>/w<layer>" and "<prefix>/b<layer>".
struct Mlp {
  MlpSpec spec;
  std::string prefix;

  std::string weight_name(int layer) const { return prefix + "/w" + std::to_string(layer); }
  std::string bias_name(int layer) const { return prefix + "/b" + std::to_string(layer); }

  /// Glorot-uniform weights in ±sqrt(6/(fan_in+fan_out)), zero biases;
  /// deterministic in spec.seed.
  void init_params(ParameterStore& store) const;

  /// Affine + activation chain recorded on the tape.
  Var forward(Tape& tape, ParameterStore& store, Var input) const;

  /// Same chain without recording; used by stop-gradient queries and
  /// full-image rendering.
  MatX forward_plain(const ParameterStore& store, const MatX& input) const;
};

Var apply_act(Tape& tape, Var x, Act a);

}  // namespace nerfcc
