// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/kernels.hpp"
#include "nerfcc/tensor.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace nerfcc {

/// Handle to a tape node. Valid only for the tape that produced it.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over row-major matrices (rows = samples, cols =
/// channels). Single-use: record ops, call backward once, then merge
/// parameter gradients. First-order only; every accumulation loop is
/// sequential in creation order, so gradients are bit-deterministic.
class Tape {
 public:
  // Leaves.
  Var constant(MatX m);
  Var constant_scalar(double v);
  /// Copies the tensor's current values; remembers the tensor so
  /// accumulate_param_grads can merge the gradient back.
  Var param(ParameterStore& store, const std::string& name);

  int rows(Var v) const;
  int cols(Var v) const;
  const MatX& value(Var v) const;
  const MatX& grad(Var v) const;  // valid after backward

  // Dense algebra.
  Var matmul(Var a, Var b);
  Var add_bias(Var a, Var bias_row);  // bias broadcast over rows
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double k);
  Var add_scalar(Var a, double k);

  // Activations.
  Var relu(Var a);
  Var softplus(Var a);
  Var sigmoid(Var a);

  // Shape plumbing.
  Var concat_cols(const std::vector<Var>& xs);
  Var slice_cols(Var a, int first_col, int n_cols);
  Var sum_all(Var a);  // 1x1

  /// out.row(r) = sum_k weights(r,k) * a.row(indices(r,k)); index -1
  /// contributes nothing. Used for bilinear (K=4) and trilinear (K=8)
  /// interpolation where the sampling geometry is constant.
  Var weighted_gather(Var a, Eigen::MatrixXi indices, MatX weights);

  Var scale_rows(Var a, VecX coeff);   // constant per-row coefficient
  Var scale_rows_var(Var a, Var s);    // s is m x 1, differentiable

  /// Volume-rendering compositing over flattened rays: sample s belongs to
  /// the ray whose [offsets[r], offsets[r+1]) range contains it. Output row
  /// per ray: sum_i T_i (1-exp(-sigma_i delta_i)) values.row(i) plus
  /// residual-transmittance background.
  Var composite_rays(Var sigma, Var values, std::vector<double> deltas,
                     std::vector<int> offsets, Eigen::RowVectorXd background);

  /// Relit shading per ray: out.row(r) = albedo.row(r) ⊙ (basis.row(r) ·
  /// lights[which[r]]). Basis rows are constants (stop-gradient normals).
  Var shade_rows(Var albedo, MatX basis, const std::vector<Var>& lights,
                 std::vector<int> which);

  /// 3x3 windowed linear filter with replicate padding over an H x W image
  /// stored as (H*W) x C_in rows. Kernel is (9*C_in) x C_out with row index
  /// tap*C_in + ci, taps scanning dy,dx in row-major order.
  Var conv3x3(Var input, int height, int width, Var kernel, Var bias_row);

  /// Seeds d(loss)/d(loss)=1 and replays the tape in reverse. loss must be
  /// 1x1 and finite. Callable once.
  void backward(Var loss);

  /// Adds every param node's gradient into its tensor's grad buffer, in
  /// param creation order. Throws NumericError naming the tensor on NaN.
  void accumulate_param_grads();

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    MatX val;
    MatX grad;
    std::function<void()> back;  // empty for leaves
  };

  Var push(MatX val, std::function<void()> back);
  void check_finite(const MatX& m, const char* op) const;
  const Node& node(Var v) const;
  Node& node(Var v);

  std::vector<Node> nodes_;
  struct ParamBinding {
    int node_id;
    Tensor* tensor;
    std::string name;
  };
  std::vector<ParamBinding> params_;
  bool backward_done_ = false;
};

}  // namespace nerfcc
