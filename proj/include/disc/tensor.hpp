#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace disc {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Named dense tensor, row-major 64-bit floats. Rank 1 tensors map to a
// 1 x n matrix view, rank 2 tensors to shape[0] x shape[1].
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;

  std::size_t size() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
  }

  Eigen::Index view_rows() const { return shape.size() >= 2 ? static_cast<Eigen::Index>(shape[0]) : 1; }
  Eigen::Index view_cols() const {
    return shape.size() >= 2 ? static_cast<Eigen::Index>(shape[1])
                             : static_cast<Eigen::Index>(shape.empty() ? 1 : shape[0]);
  }

  Eigen::Map<Matrix> mat() { return {data.data(), view_rows(), view_cols()}; }
  Eigen::Map<const Matrix> mat() const { return {data.data(), view_rows(), view_cols()}; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// Flat store of uniquely named tensors; insertion order is fixed, which keeps
// optimizer sweeps and checkpoint layout deterministic.
class ParamStore {
 public:
  Tensor& add(std::string name, std::vector<std::size_t> shape) {
    if (contains(name)) throw std::invalid_argument("duplicate tensor name: " + name);
    Tensor t;
    t.name = std::move(name);
    t.shape = std::move(shape);
    if (t.shape.empty()) throw std::invalid_argument("tensor must have a shape: " + t.name);
    for (std::size_t d : t.shape)
      if (d == 0) throw std::invalid_argument("zero dimension in tensor: " + t.name);
    t.data.assign(t.size(), 0.0);
    tensors_.push_back(std::move(t));
    return tensors_.back();
  }

  bool contains(const std::string& name) const { return index_of(name) >= 0; }

  Tensor& at(const std::string& name) {
    int i = index_of(name);
    if (i < 0) throw std::out_of_range("no tensor named: " + name);
    return tensors_[static_cast<std::size_t>(i)];
  }
  const Tensor& at(const std::string& name) const {
    int i = index_of(name);
    if (i < 0) throw std::out_of_range("no tensor named: " + name);
    return tensors_[static_cast<std::size_t>(i)];
  }

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < tensors_.size(); ++i)
      if (tensors_[i].name == name) return static_cast<int>(i);
    return -1;
  }

  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::size_t count() const { return tensors_.size(); }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const Tensor& t : tensors_) n += t.size();
    return n;
  }

  // same names and shapes, all values zero
  ParamStore zeros_like() const {
    ParamStore out;
    for (const Tensor& t : tensors_) out.add(t.name, t.shape);
    return out;
  }

  bool all_finite() const {
    for (const Tensor& t : tensors_)
      if (!t.all_finite()) return false;
    return true;
  }

 private:
  std::vector<Tensor> tensors_;
};

// Gradients mirror the parameter store they differentiate.
using GradStore = ParamStore;

}  // namespace disc
