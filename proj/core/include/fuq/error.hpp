#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fuq {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, malformed files, violated preconditions.
class InputError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public InputError {
 public:
  DimensionError(const std::string& what, std::size_t dimension)
      : InputError(what), dimension_(dimension) {}
  std::size_t dimension() const noexcept { return dimension_; }

 private:
  std::size_t dimension_;
};

// Anything that goes wrong inside the numerics on valid input.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class FactorizationError : public NumericalError {
 public:
  FactorizationError(const std::string& what, double jitter)
      : NumericalError(what), jitter_(jitter) {}
  double jitter() const noexcept { return jitter_; }

 private:
  double jitter_;
};

class FitError : public NumericalError {
 public:
  FitError(const std::string& what, double best_objective)
      : NumericalError(what), best_objective_(best_objective) {}
  double best_objective() const noexcept { return best_objective_; }

 private:
  double best_objective_;
};

// Output carries no information (zero variance, identical curves).
class DegenerateError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace fuq
