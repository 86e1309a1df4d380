#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace gennli::ad {

using Shape = std::vector<int>;

std::string shape_str(const Shape& shape);

/// Dense row-major tensor of doubles. Rank 1 and 2 are all the model needs;
/// scalars are represented as shape {1}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor from_vector(std::vector<double> v);
  static Tensor identity(int n);

  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  int rows() const { return shape_[0]; }
  int cols() const { return shape_[1]; }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  double& at(int i) { return data_[static_cast<size_t>(i)]; }
  double at(int i) const { return data_[static_cast<size_t>(i)]; }
  double& at(int i, int j) { return data_[static_cast<size_t>(i) * cols() + j]; }
  double at(int i, int j) const { return data_[static_cast<size_t>(i) * cols() + j]; }
  /// Single-element access; throws unless numel() == 1.
  double item() const;

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const;
  double max_abs() const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace gennli::ad
