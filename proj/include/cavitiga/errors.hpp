#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cavitiga {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (e.g. x ∉ [0,1]).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Knot insertion or degree elevation that would violate knot-vector invariants.
class RefinementError : public Error {
 public:
  using Error::Error;
};

/// Invalid or nonconforming geometry (bad dimensions, partially matching faces,
/// self-intersecting wall offsets, missing boundary tags).
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Evaluation at a point where the geometry map is singular.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Function spaces that cannot be combined (e.g. discrete gradient between
/// spaces built on different knots).
class SpaceError : public Error {
 public:
  using Error::Error;
};

/// Numerically singular pivot encountered during sparse factorization.
class FactorizationError : public Error {
 public:
  using Error::Error;
};

/// The eigensolver did not converge within its iteration budget.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> best_residuals)
      : Error(what), best_residuals_(std::move(best_residuals)) {}
  const std::vector<double>& best_residuals() const { return best_residuals_; }

 private:
  std::vector<double> best_residuals_;
};

/// No converged mode qualifies as the accelerating mode.
class IdentificationError : public Error {
 public:
  using Error::Error;
};

/// Elasticity system is singular (insufficient displacement constraints).
class WellPosednessError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration or input file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace cavitiga
