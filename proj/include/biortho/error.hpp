#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace biortho {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Arguments outside the domain of an operation (bad alpha, coincident nodes, x == y, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Coincident source parameters handed to a routine that needs them distinct.
/// Callers should switch to the confluent path (chgue::confluent_weights).
class ConfluentError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A pivot fell below tolerance during LU factorization.
class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, std::size_t pivot)
      : Error(what + " (pivot " + std::to_string(pivot) + ")"), pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

/// Iterative or series evaluation failed to converge.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what, double partial = 0.0)
      : Error(what), partial_(partial) {}
  double partial_value() const noexcept { return partial_; }

 private:
  double partial_;
};

/// Problem size beyond a cost or conditioning guard.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Model the sampler cannot draw from exactly (non-Gaussian potential, non-integer M - N).
class UnsupportedModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace biortho
