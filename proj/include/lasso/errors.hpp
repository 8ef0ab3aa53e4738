#pragma once

#include <stdexcept>
#include <string>

namespace lasso {

/// Malformed or out-of-domain input. The CLI maps this to exit code 1.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not produce a trustworthy result (exit code 2).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The evaluation point hits sin kL = 0, where the Krein quotient is undefined.
class SingularInputError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// The evaluation point is a pole of the resolvent (D(k) = 0).
class ResolventPoleError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// k lies in the Dirichlet spectrum of the decoupled graph (some link Wronskian vanishes).
class DirichletSpectrumError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace lasso
