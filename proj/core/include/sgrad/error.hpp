#pragma once

#include <stdexcept>
#include <string>

namespace sgrad {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or parameter-layout shapes do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// An op produced NaN/Inf; surfaced at the op boundary.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// The orthogonalized gradient collapsed (near-parallel gradients); the caller
// is expected to skip the step and log it.
class DegenerateGradient : public Error {
 public:
  using Error::Error;
};

class UnknownConcept : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Training loss exceeded the divergence guard.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace sgrad
