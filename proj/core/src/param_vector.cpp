#include "sgrad/param_vector.hpp"

#include <cmath>
#include <utility>

#include "sgrad/error.hpp"

namespace sgrad {

void ParamVector::append(std::string name, Tensor value) {
  if (has(name)) throw Error("ParamVector: duplicate segment name '" + name + "'");
  total_len_ += value.size();
  segments_.push_back({std::move(name), std::move(value)});
}

bool ParamVector::has(std::string_view name) const {
  for (const auto& s : segments_) {
    if (s.name == name) return true;
  }
  return false;
}

Tensor& ParamVector::tensor(std::string_view name) {
  for (auto& s : segments_) {
    if (s.name == name) return s.tensor;
  }
  throw Error("ParamVector: no segment named '" + std::string(name) + "'");
}

const Tensor& ParamVector::tensor(std::string_view name) const {
  for (const auto& s : segments_) {
    if (s.name == name) return s.tensor;
  }
  throw Error("ParamVector: no segment named '" + std::string(name) + "'");
}

bool ParamVector::same_layout(const ParamVector& other) const {
  if (segments_.size() != other.segments_.size()) return false;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (segments_[i].name != other.segments_[i].name) return false;
    if (!segments_[i].tensor.same_shape(other.segments_[i].tensor)) return false;
  }
  return true;
}

std::vector<double> ParamVector::flatten() const {
  std::vector<double> flat;
  flat.reserve(total_len_);
  for (const auto& s : segments_) {
    auto d = s.tensor.data();
    flat.insert(flat.end(), d.begin(), d.end());
  }
  return flat;
}

ParamVector ParamVector::unflatten(std::span<const double> flat) const {
  if (flat.size() != total_len_) {
    throw ShapeError("ParamVector::unflatten: expected " + std::to_string(total_len_) +
                     " values, got " + std::to_string(flat.size()));
  }
  ParamVector out;
  std::size_t off = 0;
  for (const auto& s : segments_) {
    std::size_t n = s.tensor.size();
    std::vector<double> vals(flat.begin() + static_cast<std::ptrdiff_t>(off),
                             flat.begin() + static_cast<std::ptrdiff_t>(off + n));
    out.append(s.name, Tensor::from_data(s.tensor.shape(), std::move(vals)));
    off += n;
  }
  return out;
}

namespace {

void require_same_layout(const ParamVector& a, const ParamVector& b, const char* op) {
  if (!a.same_layout(b)) {
    throw ShapeError(std::string(op) + ": parameter layouts differ");
  }
}

}  // namespace

double dot(const ParamVector& a, const ParamVector& b) {
  require_same_layout(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.segment_count(); ++i) {
    auto da = a.segment(i).tensor.data();
    auto db = b.segment(i).tensor.data();
    for (std::size_t j = 0; j < da.size(); ++j) acc += da[j] * db[j];
  }
  return acc;
}

double norm(const ParamVector& a) { return std::sqrt(dot(a, a)); }

ParamVector add_scaled(const ParamVector& base, double scale, const ParamVector& dir) {
  require_same_layout(base, dir, "add_scaled");
  ParamVector out;
  for (std::size_t i = 0; i < base.segment_count(); ++i) {
    Tensor t = base.segment(i).tensor;
    auto d = t.data();
    auto g = dir.segment(i).tensor.data();
    for (std::size_t j = 0; j < d.size(); ++j) d[j] += scale * g[j];
    out.append(base.segment(i).name, std::move(t));
  }
  return out;
}

ParamVector scaled(const ParamVector& a, double scale) {
  ParamVector out;
  for (const auto& s : a.segments()) {
    Tensor t = s.tensor;
    for (double& v : t.data()) v *= scale;
    out.append(s.name, std::move(t));
  }
  return out;
}

}  // namespace sgrad
