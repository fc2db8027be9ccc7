#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace asc {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major array of doubles. Feature maps use (channel, frequency, time) order.
class Tensor {
 public:
  Tensor() = default;
  /// Zero-filled tensor. Throws ShapeError on an empty shape or a zero extent.
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t c, std::size_t f, std::size_t t) {
    return data_[(c * shape_[1] + f) * shape_[2] + t];
  }
  double at(std::size_t c, std::size_t f, std::size_t t) const {
    return data_[(c * shape_[1] + f) * shape_[2] + t];
  }

  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

enum class Activation { kRelu, kSigmoid, kTanh };

Tensor tensor_full(const Shape& shape, double value);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor activate(Activation kind, const Tensor& x);
/// Numerically stable softmax of a rank-1 tensor.
Tensor softmax(const Tensor& x);

double sigmoid(double x);
std::size_t argmax(std::span<const double> x);

}  // namespace asc
