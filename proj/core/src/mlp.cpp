// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/mlp.hpp"

namespace nerfcc {

void MlpSpec::validate() const {
  if (input < 1 || output < 1) throw DataError("mlp widths must be >= 1");
  for (int h : hidden)
    if (h < 1) throw DataError("mlp widths must be >= 1");
  if (static_cast<int>(act.size()) != layer_count())
    throw DataError("mlp activation list length must equal layer count");
}

std::pair<int, int> MlpSpec::layer_dims(int layer) const {
  const int in = layer == 0 ? input : hidden[layer - 1];
  const int out = layer == layer_count() - 1 ? output : hidden[layer];
  return {in, out};
}

void Mlp::init_params(ParameterStore& store) const {
  spec.validate();
  for (int l = 0; l < spec.layer_count(); ++l) {
    const auto [in, out] = spec.layer_dims(l);
    Tensor& w = store.add(weight_name(l), {in, out});
    RandomStream rng(substream(spec.seed, 0x6d6c70, static_cast<uint64_t>(l)));
    const double bound = std::sqrt(6.0 / (in + out));
    for (double& v : w.values) v = rng.uniform(-bound, bound);
    store.add(bias_name(l), {1, out});
  }
}

Var apply_act(Tape& tape, Var x, Act a) {
  switch (a) {
    case Act::None:
      return x;
    case Act::Relu:
      return tape.relu(x);
    case Act::Softplus:
      return tape.softplus(x);
    case Act::Sigmoid:
      return tape.sigmoid(x);
  }
  throw DataError("unknown activation");
}

Var Mlp::forward(Tape& tape, ParameterStore& store, Var input) const {
  if (tape.cols(input) != spec.input) throw DataError("mlp input width mismatch: " + prefix);
  Var h = input;
  for (int l = 0; l < spec.layer_count(); ++l) {
    Var w = tape.param(store, weight_name(l));
    Var b = tape.param(store, bias_name(l));
    h = apply_act(tape, tape.add_bias(tape.matmul(h, w), b), spec.act[l]);
  }
  return h;
}

MatX Mlp::forward_plain(const ParameterStore& store, const MatX& input) const {
  if (input.cols() != spec.input) throw DataError("mlp input width mismatch: " + prefix);
  MatX h = input;
  for (int l = 0; l < spec.layer_count(); ++l) {
    const Tensor& w = store.at(weight_name(l));
    const Tensor& b = store.at(bias_name(l));
    const auto [in, out] = spec.layer_dims(l);
    Eigen::Map<const MatX> wm(w.values.data(), in, out);
    Eigen::Map<const Eigen::RowVectorXd> bm(b.values.data(), out);
    MatX z = h * wm;
    z.rowwise() += bm;
    switch (spec.act[l]) {
      case Act::None:
        break;
      case Act::Relu:
        z = z.cwiseMax(0.0);
        break;
      case Act::Softplus:
        z = z.unaryExpr([](double x) { return softplus(x); });
        break;
      case Act::Sigmoid:
        z = z.unaryExpr([](double x) { return sigmoid(x); });
        break;
    }
    h = std::move(z);
  }
  return h;
}

}  // namespace nerfcc
