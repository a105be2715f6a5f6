// SPDX-License-Identifier: Apache-2.0
#include "nerfcc/tape.hpp"

#include <memory>

namespace nerfcc {

void Tape::check_finite(const MatX& m, const char* op) const {
  if (!m.allFinite()) throw NumericError(std::string("non-finite values produced by op ") + op);
}

Var Tape::push(MatX val, std::function<void()> back) {
  nodes_.push_back(Node{std::move(val), MatX(), std::move(back)});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw DataError("invalid tape variable");
  return nodes_[v.id];
}

Tape::Node& Tape::node(Var v) {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw DataError("invalid tape variable");
  return nodes_[v.id];
}

int Tape::rows(Var v) const { return static_cast<int>(node(v).val.rows()); }
int Tape::cols(Var v) const { return static_cast<int>(node(v).val.cols()); }
const MatX& Tape::value(Var v) const { return node(v).val; }
const MatX& Tape::grad(Var v) const { return node(v).grad; }

Var Tape::constant(MatX m) {
  check_finite(m, "constant");
  return push(std::move(m), {});
}

Var Tape::constant_scalar(double v) {
  MatX m(1, 1);
  m(0, 0) = v;
  return constant(m);
}

Var Tape::param(ParameterStore& store, const std::string& name) {
  Tensor& t = store.at(name);
  MatX m(t.rows(), t.cols());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) m(r, c) = t.values[static_cast<size_t>(r) * m.cols() + c];
  check_finite(m, "param");
  Var v = push(std::move(m), {});
  params_.push_back({v.id, &t, name});
  return v;
}

Var Tape::matmul(Var a, Var b) {
  if (cols(a) != rows(b)) throw DataError("matmul shape mismatch");
  MatX val = node(a).val * node(b).val;
  check_finite(val, "matmul");
  Var out = push(std::move(val), {});
  node(out).back = [this, a, b, out]() {
    const MatX& g = node(out).grad;
    node(a).grad.noalias() += g * node(b).val.transpose();
    node(b).grad.noalias() += node(a).val.transpose() * g;
  };
  return out;
}

Var Tape::add_bias(Var a, Var bias_row) {
  if (rows(bias_row) != 1 || cols(bias_row) != cols(a)) throw DataError("add_bias shape mismatch");
  MatX val = node(a).val.rowwise() + node(bias_row).val.row(0);
  check_finite(val, "add_bias");
  Var out = push(std::move(val), {});
  node(out).back = [this, a, bias_row, out]() {
    const MatX& g = node(out).grad;
    node(a).grad += g;
    node(bias_row).grad.row(0) += g.colwise().sum();
  };
  return out;
}

Var Tape::add(Var a, Var b) {
  if (rows(a) != rows(b) || cols(a) != cols(b)) throw DataError("add shape mismatch");
  MatX val = node(a).val + node(b).val;
  check_finite(val, "add");
  Var out = push(std::move(val), {});
  node(out).back = [this, a, b, out]() {
    node(a).grad += node(out).grad;
    node(b).grad += node(out).grad;
  };
  return out;
}

Var Tape::sub(Var a, Var b) {
  if (rows(a) != rows(b) || cols(a) != cols(b)) throw DataError("sub shape mismatch");
  MatX val = node(a).val - node(b).val;
  check_finite(val, "sub");
  Var out = push(std::move(val), {});
  node(out).back = [this, a, b, out]() {
    node(a).grad += node(out).grad;
    node(b).grad -= node(out).grad;
  };
  return out;
}

Var Tape::mul(Var a, Var b) {
  if (rows(a) != rows(b) || cols(a) != cols(b)) throw DataError("mul shape mismatch");
  MatX val = node(a).val.cwiseProduct(node(b).val);
  check_finite(val, "mul");
  Var out = push(std::move(val), {});
  node(out).back = [this, a, b, out]() {
    const MatX& g = node(out).grad;
    node(a).grad += g.cwiseProduct(node(b).val);
    node(b).grad += g.cwiseProduct(node(a).val);
  };
  return out;
}

Var Tape::scale(Var a, double k) {
  MatX val = k * node(a).val;
  check_finite(val, "scale");
  Var out = push(std::move(val), {});
  node(out).back = [this, a, out, k]() { node(a).grad += k * node(out).grad; };
  return out;
}

Var Tape::add_scalar(Var a, double k) {
  MatX val = node(a).val.array() + k;
  check_finite(val, "add_scalar");
  Var out = push(std::move(val), {});
  node(out).back = [this, a, out]() { node(a).grad += node(out).grad; };
  return out;
}

Var Tape::relu(Var a) {
  MatX val = node(a).val.cwiseMax(0.0);
  Var out = push(std::move(val), {});
  node(out).back = [this, a, out]() {
    node(a).grad.array() +=
        node(out).grad.array() * (node(a).val.array() > 0.0).cast<double>();
  };
  return out;
}

Var Tape::softplus(Var a) {
  MatX val = node(a).val.unaryExpr([](double x) { return nerfcc::softplus(x); });
  check_finite(val, "softplus");
  Var out = push(std::move(val), {});
  node(out).back = [this, a, out]() {
    node(a).grad.array() +=
        node(out).grad.array() *
        node(a).val.unaryExpr([](double x) { return nerfcc::sigmoid(x); }).array();
  };
  return out;
}

Var Tape::sigmoid(Var a) {
  MatX val = node(a).val.unaryExpr([](double x) { return nerfcc::sigmoid(x); });
  Var out = push(std::move(val), {});
  node(out).back = [this, a, out]() {
    const auto& s = node(out).val.array();
    node(a).grad.array() += node(out).grad.array() * s * (1.0 - s);
  };
  return out;
}

Var Tape::concat_cols(const std::vector<Var>& xs) {
  if (xs.empty()) throw DataError("concat_cols of nothing");
  const int m = rows(xs[0]);
  int total = 0;
  for (Var x : xs) {
    if (rows(x) != m) throw DataError("concat_cols row mismatch");
    total += cols(x);
  }
  MatX val(m, total);
  int c0 = 0;
  for (Var x : xs) {
    val.middleCols(c0, cols(x)) = node(x).val;
    c0 += cols(x);
  }
  Var out = push(std::move(val), {});
  std::vector<Var> inputs = xs;
  node(out).back = [this, inputs, out]() {
    int c = 0;
    for (Var x : inputs) {
      node(x).grad += node(out).grad.middleCols(c, cols(x));
      c += cols(x);
    }
  };
  return out;
}

Var Tape::slice_cols(Var a, int first_col, int n_cols) {
  if (first_col < 0 || n_cols < 1 || first_col + n_cols > cols(a))
    throw DataError("slice_cols out of range");
  MatX val = node(a).val.middleCols(first_col, n_cols);
  Var out = push(std::move(val), {});
  node(out).back = [this, a, out, first_col, n_cols]() {
    node(a).grad.middleCols(first_col, n_cols) += node(out).grad;
  };
  return out;
}

Var Tape::sum_all(Var a) {
  MatX val(1, 1);
  val(0, 0) = node(a).val.sum();
  check_finite(val, "sum_all");
  Var out = push(std::move(val), {});
  node(out).back = [this, a, out]() { node(a).grad.array() += node(out).grad(0, 0); };
  return out;
}

Var Tape::weighted_gather(Var a, Eigen::MatrixXi indices, MatX weights) {
  if (indices.rows() != weights.rows() || indices.cols() != weights.cols())
    throw DataError("weighted_gather index/weight shape mismatch");
  const int m = static_cast<int>(indices.rows());
  const int K = static_cast<int>(indices.cols());
  const int n = cols(a);
  const int an = rows(a);
  MatX val = MatX::Zero(m, n);
  for (int r = 0; r < m; ++r)
    for (int k = 0; k < K; ++k) {
      const int idx = indices(r, k);
      if (idx < 0) continue;
      if (idx >= an) throw DataError("weighted_gather index out of range");
      val.row(r) += weights(r, k) * node(a).val.row(idx);
    }
  check_finite(val, "weighted_gather");
  Var out = push(std::move(val), {});
  auto idx_p = std::make_shared<Eigen::MatrixXi>(std::move(indices));
  auto w_p = std::make_shared<MatX>(std::move(weights));
  node(out).back = [this, a, out, idx_p, w_p]() {
    const MatX& g = node(out).grad;
    for (int r = 0; r < idx_p->rows(); ++r)
      for (int k = 0; k < idx_p->cols(); ++k) {
        const int idx = (*idx_p)(r, k);
        if (idx >= 0) node(a).grad.row(idx) += (*w_p)(r, k) * g.row(r);
      }
  };
  return out;
}

Var Tape::scale_rows(Var a, VecX coeff) {
  if (coeff.size() != rows(a)) throw DataError("scale_rows coefficient count mismatch");
  MatX val = coeff.asDiagonal() * node(a).val;
  check_finite(val, "scale_rows");
  Var out = push(std::move(val), {});
  auto c_p = std::make_shared<VecX>(std::move(coeff));
  node(out).back = [this, a, out, c_p]() {
    node(a).grad += c_p->asDiagonal() * node(out).grad;
  };
  return out;
}

Var Tape::scale_rows_var(Var a, Var s) {
  if (rows(s) != rows(a) || cols(s) != 1) throw DataError("scale_rows_var needs m x 1 scales");
  MatX val = node(s).val.col(0).asDiagonal() * node(a).val;
  check_finite(val, "scale_rows_var");
  Var out = push(std::move(val), {});
  node(out).back = [this, a, s, out]() {
    const MatX& g = node(out).grad;
    node(a).grad += node(s).val.col(0).asDiagonal() * g;
    node(s).grad.col(0) += g.cwiseProduct(node(a).val).rowwise().sum();
  };
  return out;
}

Var Tape::composite_rays(Var sigma, Var values, std::vector<double> deltas,
                         std::vector<int> offsets, Eigen::RowVectorXd background) {
  const int S = rows(sigma);
  const int C = cols(values);
  if (cols(sigma) != 1) throw DataError("composite_rays sigma must be S x 1");
  if (rows(values) != S) throw DataError("composite_rays sigma/value row mismatch");
  if (static_cast<int>(deltas.size()) != S) throw DataError("composite_rays delta count mismatch");
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != S)
    throw DataError("composite_rays offsets must cover all samples");
  if (background.size() != C) throw DataError("composite_rays background width mismatch");
  const int R = static_cast<int>(offsets.size()) - 1;

  // Forward, keeping per-sample weights and prefix transmittance for backward.
  auto w_p = std::make_shared<std::vector<double>>(S);
  auto T_p = std::make_shared<std::vector<double>>(S + R);  // T_i then T_end per ray
  MatX val = MatX::Zero(R, C);
  for (int r = 0; r < R; ++r) {
    double T = 1.0;
    for (int i = offsets[r]; i < offsets[r + 1]; ++i) {
      const double sd = node(sigma).val(i, 0) * deltas[i];
      if (!(sd >= 0.0)) throw NumericError("negative or NaN optical depth in composite_rays");
      (*T_p)[i] = T;
      const double alpha = 1.0 - std::exp(-sd);
      (*w_p)[i] = T * alpha;
      val.row(r) += (*w_p)[i] * node(values).val.row(i);
      T *= 1.0 - alpha;
    }
    (*T_p)[S + r] = T;
    val.row(r) += T * background;
  }
  check_finite(val, "composite_rays");
  Var out = push(std::move(val), {});
  auto d_p = std::make_shared<std::vector<double>>(std::move(deltas));
  auto o_p = std::make_shared<std::vector<int>>(std::move(offsets));
  auto bg_p = std::make_shared<Eigen::RowVectorXd>(std::move(background));
  node(out).back = [this, sigma, values, out, w_p, T_p, d_p, o_p, bg_p]() {
    const MatX& g = node(out).grad;
    const int S = static_cast<int>(w_p->size());
    const int R = static_cast<int>(o_p->size()) - 1;
    for (int r = 0; r < R; ++r) {
      // d(out)/d(values.row(i)) = w_i.
      for (int i = (*o_p)[r]; i < (*o_p)[r + 1]; ++i)
        node(values).grad.row(i) += (*w_p)[i] * g.row(r);
      // d(out)/d(sigma_j) = delta_j (T_{j+1} u_j - sum_{i>j} w_i u_i),
      // u_i = values.row(i) - background; suffix sum runs backwards.
      double suffix = 0.0;
      for (int j = (*o_p)[r + 1] - 1; j >= (*o_p)[r]; --j) {
        const double gu_j = g.row(r).dot(node(values).val.row(j) - *bg_p);
        const double T_next = (j + 1 < (*o_p)[r + 1]) ? (*T_p)[j + 1] : (*T_p)[S + r];
        node(sigma).grad(j, 0) += (*d_p)[j] * (T_next * gu_j - suffix);
        suffix += (*w_p)[j] * gu_j;
      }
    }
  };
  return out;
}

Var Tape::shade_rows(Var albedo, MatX basis, const std::vector<Var>& lights,
                     std::vector<int> which) {
  const int m = rows(albedo);
  if (cols(albedo) != 3) throw DataError("shade_rows albedo must be m x 3");
  if (basis.rows() != m || basis.cols() != 9) throw DataError("shade_rows basis must be m x 9");
  if (static_cast<int>(which.size()) != m) throw DataError("shade_rows selector count mismatch");
  for (Var l : lights)
    if (rows(l) != 9 || cols(l) != 3) throw DataError("shade_rows lights must be 9 x 3");
  MatX val(m, 3);
  for (int r = 0; r < m; ++r) {
    const int li = which[r];
    if (li < 0 || li >= static_cast<int>(lights.size()))
      throw DataError("shade_rows selector out of range");
    const Eigen::RowVector3d s = basis.row(r) * node(lights[li]).val;
    val.row(r) = node(albedo).val.row(r).cwiseProduct(s);
  }
  check_finite(val, "shade_rows");
  Var out = push(std::move(val), {});
  auto basis_p = std::make_shared<MatX>(std::move(basis));
  auto which_p = std::make_shared<std::vector<int>>(std::move(which));
  std::vector<Var> light_vars = lights;
  node(out).back = [this, albedo, out, basis_p, which_p, light_vars]() {
    const MatX& g = node(out).grad;
    for (int r = 0; r < g.rows(); ++r) {
      const int li = (*which_p)[r];
      const Eigen::RowVector3d s = basis_p->row(r) * node(light_vars[li]).val;
      node(albedo).grad.row(r) += g.row(r).cwiseProduct(s);
      const Eigen::RowVector3d ga = g.row(r).cwiseProduct(node(albedo).val.row(r));
      node(light_vars[li]).grad.noalias() += basis_p->row(r).transpose() * ga;
    }
  };
  return out;
}

Var Tape::conv3x3(Var input, int height, int width, Var kernel, Var bias_row) {
  const int cin = cols(input);
  if (rows(input) != height * width) throw DataError("conv3x3 input rows must equal H*W");
  if (rows(kernel) != 9 * cin) throw DataError("conv3x3 kernel must be (9*C_in) x C_out");
  const int cout = cols(kernel);
  if (rows(bias_row) != 1 || cols(bias_row) != cout) throw DataError("conv3x3 bias mismatch");

  // im2col with replicate padding; the patch matrix is reused by backward.
  auto patches = std::make_shared<MatX>(height * width, 9 * cin);
  auto src_rows = std::make_shared<Eigen::MatrixXi>(height * width, 9);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const int row = y * width + x;
      int tap = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx, ++tap) {
          const int yy = std::min(std::max(y + dy, 0), height - 1);
          const int xx = std::min(std::max(x + dx, 0), width - 1);
          const int src = yy * width + xx;
          (*src_rows)(row, tap) = src;
          patches->block(row, tap * cin, 1, cin) = node(input).val.row(src);
        }
    }
  MatX val = (*patches) * node(kernel).val;
  val.rowwise() += node(bias_row).val.row(0);
  check_finite(val, "conv3x3");
  Var out = push(std::move(val), {});
  node(out).back = [this, input, kernel, bias_row, out, patches, src_rows, cin]() {
    const MatX& g = node(out).grad;
    node(kernel).grad.noalias() += patches->transpose() * g;
    node(bias_row).grad.row(0) += g.colwise().sum();
    const MatX gpatch = g * node(kernel).val.transpose();  // rows x (9*cin)
    for (int row = 0; row < gpatch.rows(); ++row)
      for (int tap = 0; tap < 9; ++tap)
        node(input).grad.row((*src_rows)(row, tap)) += gpatch.block(row, tap * cin, 1, cin);
  };
  return out;
}

void Tape::backward(Var loss) {
  if (backward_done_) throw DataError("tape backward called twice");
  backward_done_ = true;
  if (rows(loss) != 1 || cols(loss) != 1) throw DataError("backward requires a scalar loss");
  if (!std::isfinite(node(loss).val(0, 0))) throw NumericError("loss is not finite");
  for (Node& n : nodes_) n.grad = MatX::Zero(n.val.rows(), n.val.cols());
  node(loss).grad(0, 0) = 1.0;
  for (int i = loss.id; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back();
}

void Tape::accumulate_param_grads() {
  if (!backward_done_) throw DataError("accumulate_param_grads before backward");
  for (const ParamBinding& pb : params_) {
    const MatX& g = nodes_[pb.node_id].grad;
    if (!g.allFinite()) throw NumericError("non-finite gradient for parameter " + pb.name);
    Tensor& t = *pb.tensor;
    for (int r = 0; r < g.rows(); ++r)
      for (int c = 0; c < g.cols(); ++c)
        t.grad[static_cast<size_t>(r) * g.cols() + c] += g(r, c);
  }
}

}  // namespace nerfcc
