#include "asc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "asc/error.hpp"
#include "asc/kernels.hpp"

namespace asc {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor extent must be >= 1, got " + shape_to_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_numel(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_numel(shape_)) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_to_string(shape_));
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

Tensor tensor_full(const Shape& shape, double value) {
  Tensor t(shape);
  std::fill(t.values().begin(), t.values().end(), value);
  return t;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul expects rank-2 operands");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul inner extents differ: " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  Tensor c({a.dim(0), b.dim(1)});
  kernels::matmul(a.data(), b.data(), c.data(), a.dim(0), a.dim(1), b.dim(1));
  return c;
}

double sigmoid(double x) {
  // Split by sign so exp never overflows.
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor activate(Activation kind, const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.values()) {
    switch (kind) {
      case Activation::kRelu: v = v > 0.0 ? v : 0.0; break;
      case Activation::kSigmoid: v = sigmoid(v); break;
      case Activation::kTanh: v = std::tanh(v); break;
    }
  }
  return y;
}

Tensor softmax(const Tensor& x) {
  if (x.rank() != 1) throw ShapeError("softmax expects a rank-1 tensor");
  const double m = *std::max_element(x.values().begin(), x.values().end());
  Tensor y = x;
  double sum = 0.0;
  for (auto& v : y.values()) {
    v = std::exp(v - m);
    sum += v;
  }
  for (auto& v : y.values()) v /= sum;
  return y;
}

std::size_t argmax(std::span<const double> x) {
  return static_cast<std::size_t>(std::distance(x.begin(), std::max_element(x.begin(), x.end())));
}

}  // namespace asc
