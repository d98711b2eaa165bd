#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sgrad {

class Rng;

// Dense row-major tensor of 64-bit floats. A rank-0 tensor is a scalar with
// one element. Shape is fixed at construction; values are mutable through
// data().
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data);
  static Tensor scalar(double value);
  static Tensor randn(std::vector<std::size_t> shape, Rng& rng, double stddev = 1.0);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;  // rank-2 only
  std::size_t cols() const;  // rank-2 only

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  // Value of a single-element tensor.
  double item() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  // Copy of row r of a rank-2 tensor, as a rank-1 tensor.
  Tensor row(std::size_t r) const;

 private:
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::size_t shape_product(std::span<const std::size_t> shape);
std::string shape_string(std::span<const std::size_t> shape);

}  // namespace sgrad
