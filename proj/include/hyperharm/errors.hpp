#pragma once

#include <stdexcept>
#include <string>

namespace hyperharm {

/// Argument outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Result or request exceeds a representable or memory limit.
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Iterative or quadrature routine failed to reach its tolerance.
struct NumericalError : std::runtime_error {
  NumericalError(const std::string& what, double achieved)
      : std::runtime_error(what), achieved_tolerance(achieved) {}
  double achieved_tolerance;
};

/// Point configuration unusable for the requested construction.
struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Operation requested for a sphere dimension it does not support.
struct UnsupportedDimension : DomainError {
  using DomainError::DomainError;
};

/// A sample whose critical points are not Morse-regular.
struct UnusableSample : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A non-Gaussian sampler produced an unusable (zero) coefficient vector.
struct DegenerateModel : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or command-line input.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace hyperharm
