#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace advrec {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);

/// Dense row-major tensor of 64-bit floats. Rank 1 (vectors) and rank 2
/// (matrices) cover everything this project computes on.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor vec(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double at2(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& at2(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return {data_.data(), data_.size()}; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const noexcept;

  double sum() const;
  double l1_norm() const;
  double l2_norm() const;
  double linf_norm() const;
  /// Index of the largest entry; ties resolve to the lowest index.
  std::size_t argmax() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);

/// Numerically stable softmax; -inf entries get probability zero. Throws
/// NumericError when no entry is finite.
Tensor softmax(const Tensor& x);

}  // namespace advrec
