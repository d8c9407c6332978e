#pragma once

#include <stdexcept>
#include <string>

namespace photocal {

/// Invalid input outside the domain of a mapping (e.g. a point behind the camera).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Numerical failure: non-convergence, singular matrices, degenerate differentials.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure of an iterative fixed-point inversion. Carries the last iterate.
class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, double x, double y, double residual)
      : NumericError(what), last_x(x), last_y(y), residual(residual) {}
  double last_x;
  double last_y;
  double residual;
};

/// A closed-form or iterative estimator could not produce a result.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The photometric refinement failed (bad starting point, non-finite cost).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace photocal
