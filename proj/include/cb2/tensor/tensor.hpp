#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cb2/util/error.hpp"

namespace cb2::tensor {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& s);

class ShapeError : public Error {
 public:
  ShapeError(const std::string& op, const Shape& got, const std::string& expected)
      : Error(ErrorCategory::Model, "ShapeMismatch(" + op + "): got " + shape_string(got) + ", expected " + expected) {}
};

struct TensorData {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something writes a gradient
  bool requires_grad = false;
};

// Shared handle: copies alias the same storage. All tensors are matrices
// (rank 2); scalars are 1x1.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, bool requires_grad = false);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double v) { return Tensor(1, 1, std::vector<double>{v}); }

  bool defined() const { return d_ != nullptr; }
  const Shape& shape() const { return d_->shape; }
  std::size_t rows() const { return d_->shape[0]; }
  std::size_t cols() const { return d_->shape[1]; }
  std::size_t numel() const { return d_->value.size(); }

  double* data() { return d_->value.data(); }
  const double* data() const { return d_->value.data(); }
  std::vector<double>& values() { return d_->value; }
  const std::vector<double>& values() const { return d_->value; }
  double& at(std::size_t r, std::size_t c) { return d_->value[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return d_->value[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool v) { d_->requires_grad = v; }

  bool has_grad() const { return !d_->grad.empty(); }
  // Allocates a zero gradient on first use.
  // Handle semantics: constness applies to the handle, not the storage.
  std::vector<double>& grad() const;
  const std::vector<double>& grad_values() const { return d_->grad; }
  void zero_grad() { d_->grad.clear(); }

  // Independent copy of the values, detached from any graph.
  Tensor clone() const;

  bool same(const Tensor& o) const { return d_ == o.d_; }

 private:
  std::shared_ptr<TensorData> d_;
};

}  // namespace cb2::tensor
