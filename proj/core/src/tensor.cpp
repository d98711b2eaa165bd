#include "sgrad/tensor.hpp"

#include <cmath>
#include <utility>

#include "sgrad/error.hpp"
#include "sgrad/rng.hpp"

namespace sgrad {

std::size_t shape_product(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_string(std::span<const std::size_t> shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data) {
  for (std::size_t e : shape) {
    if (e == 0) throw ShapeError("Tensor: extents must be positive, got " + shape_string(shape));
  }
  if (shape_product(shape) != data.size()) {
    throw ShapeError("Tensor: shape " + shape_string(shape) + " needs " +
                     std::to_string(shape_product(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
  return Tensor(std::move(shape), std::move(data));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::randn(std::vector<std::size_t> shape, Rng& rng, double stddev) {
  Tensor t = zeros(std::move(shape));
  for (double& v : t.data_) v = stddev * rng.normal();
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("Tensor::rows: rank-2 required, got " + shape_string(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("Tensor::cols: rank-2 required, got " + shape_string(shape_));
  return shape_[1];
}

double& Tensor::at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

double Tensor::at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("Tensor::item: single element required, got " + shape_string(shape_));
  }
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor Tensor::row(std::size_t r) const {
  const std::size_t c = cols();
  if (r >= rows()) throw ShapeError("Tensor::row: index out of range");
  std::vector<double> out(data_.begin() + static_cast<std::ptrdiff_t>(r * c),
                          data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * c));
  return Tensor({c}, std::move(out));
}

}  // namespace sgrad
