#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sgrad/tensor.hpp"

namespace sgrad {

// Flattened, segment-named view of a model's trainable parameters: the theta
// every update rule operates on. Segment names are unique and the
// flatten/unflatten round trip is bit-exact. Vector-space ops (dot, norm,
// add_scaled) require an identical segment layout on both operands.
class ParamVector {
 public:
  struct Segment {
    std::string name;
    Tensor tensor;
  };

  ParamVector() = default;

  void append(std::string name, Tensor value);

  std::size_t total_len() const { return total_len_; }
  std::size_t segment_count() const { return segments_.size(); }
  const Segment& segment(std::size_t i) const { return segments_[i]; }
  const std::vector<Segment>& segments() const { return segments_; }

  bool has(std::string_view name) const;
  Tensor& tensor(std::string_view name);
  const Tensor& tensor(std::string_view name) const;

  // Same segment names, order, and shapes.
  bool same_layout(const ParamVector& other) const;

  std::vector<double> flatten() const;

  // New vector with this layout and the given flat values.
  ParamVector unflatten(std::span<const double> flat) const;

 private:
  std::vector<Segment> segments_;
  std::size_t total_len_ = 0;
};

double dot(const ParamVector& a, const ParamVector& b);
double norm(const ParamVector& a);

// base + scale * dir, layout-checked.
ParamVector add_scaled(const ParamVector& base, double scale, const ParamVector& dir);
ParamVector scaled(const ParamVector& a, double scale);

}  // namespace sgrad
