// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "nerfcc/common.hpp"

#include <deque>
#include <map>
#include <string>
#include <vector>

namespace nerfcc {

/// Dense named tensor. Gradient buffer always allocated (zero when unused).
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;

  Tensor() = default;
  Tensor(std::vector<int> s) : shape(std::move(s)) {
    size_t n = 1;
    for (int d : shape) {
      if (d < 1) throw DataError("tensor dimensions must be >= 1");
      n *= static_cast<size_t>(d);
    }
    values.assign(n, 0.0);
    grad.assign(n, 0.0);
  }

  size_t size() const { return values.size(); }
  int rows() const { return shape.empty() ? 1 : shape[0]; }
  int cols() const {
    if (shape.size() < 2) return 1;
    int c = 1;
    for (size_t i = 1; i < shape.size(); ++i) c *= shape[i];
    return c;
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

/// Ordered collection of trainable tensors. Iteration follows insertion
/// order, which fixes gradient-merge, optimizer, and checkpoint order.
/// Tensors live in a deque so references stay valid across later add calls.
class ParameterStore {
 public:
  Tensor& add(const std::string& name, std::vector<int> shape) {
    if (index_.count(name)) throw DataError("duplicate parameter name: " + name);
    index_[name] = names_.size();
    names_.push_back(name);
    tensors_.emplace_back(std::move(shape));
    return tensors_.back();
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Tensor& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("unknown parameter: " + name);
    return tensors_[it->second];
  }
  const Tensor& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("unknown parameter: " + name);
    return tensors_[it->second];
  }

  size_t count() const { return names_.size(); }
  const std::string& name(size_t i) const { return names_[i]; }
  Tensor& tensor(size_t i) { return tensors_[i]; }
  const Tensor& tensor(size_t i) const { return tensors_[i]; }

  void zero_grad() {
    for (Tensor& t : tensors_) t.zero_grad();
  }

 private:
  std::vector<std::string> names_;
  std::deque<Tensor> tensors_;
  std::map<std::string, size_t> index_;
};

}  // namespace nerfcc
