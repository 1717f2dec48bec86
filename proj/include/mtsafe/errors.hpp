#pragma once

#include <stdexcept>
#include <string>

namespace mtsafe {

/// Raised when a factorization or eigen-solve cannot be completed, e.g. a
/// Gram matrix that is not positive definite even after jitter.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by the MCMC sampler when the chain stops moving.
class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace mtsafe
