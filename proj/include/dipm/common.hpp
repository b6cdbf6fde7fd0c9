#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dipm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ErrorKind {
  input,       // malformed data or violated preconditions
  infeasible,  // the problem (or its equality system) has no admissible point
  numerical,   // singular local KKT blocks, stalled line search, sign breaches
  internal,    // invariant broken inside the library (a bug, not a data issue)
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};

class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& what)
      : Error(ErrorKind::infeasible, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::numerical, what) {}
};

class InternalError : public Error {
 public:
  explicit InternalError(const std::string& what)
      : Error(ErrorKind::internal, what) {}
};

/// Numerical rank with singular values below `rel_tol * sigma_max` treated as zero.
int numerical_rank(const Matrix& m, double rel_tol = 1e-10);

/// Default relative singular-value cutoff used by every rank decision.
inline constexpr double kRankTolerance = 1e-10;

}  // namespace dipm
