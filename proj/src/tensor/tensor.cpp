#include "cb2/tensor/tensor.hpp"

namespace cb2::tensor {

std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(s[i]);
  }
  return out + "]";
}

Tensor::Tensor(std::size_t rows, std::size_t cols, bool requires_grad) : d_(std::make_shared<TensorData>()) {
  d_->shape = {rows, cols};
  d_->value.assign(rows * cols, 0.0);
  d_->requires_grad = requires_grad;
}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad)
    : d_(std::make_shared<TensorData>()) {
  if (values.size() != rows * cols) {
    throw ShapeError("tensor", {values.size()}, shape_string({rows, cols}) + " elements");
  }
  d_->shape = {rows, cols};
  d_->value = std::move(values);
  d_->requires_grad = requires_grad;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item", shape(), "[1,1]");
  return d_->value[0];
}

std::vector<double>& Tensor::grad() const {
  if (d_->grad.size() != d_->value.size()) d_->grad.assign(d_->value.size(), 0.0);
  return d_->grad;
}

Tensor Tensor::clone() const { return Tensor(rows(), cols(), d_->value); }

}  // namespace cb2::tensor
