#pragma once

// Centralized reference computations. Nothing here shares elimination code
// with treeqp; everything is assembled densely over the global variable.

#include <vector>

#include "dipm/ipm.hpp"

namespace dipm::oracle {

using ipm::Directions;
using ipm::IterateState;
using chordal::IndexSet;
using model::Decomposition;

struct DenseKkt {
  Matrix H;          // n × n
  Matrix A;          // stacked clique equality rows, n columns
  Vector r;          // n
  Vector r_primal;   // A x − b

  Matrix matrix() const;
  /// −[r; r_primal]
  Vector rhs() const;
};

/// Global Newton system at the state's iterate and barrier parameter.
DenseKkt assemble_global(const Decomposition& d, const IterateState& s);

struct DenseStep {
  Vector dx;
  Vector dv;  // stacked in clique order
};

/// Throws NumericalError when the KKT matrix is singular.
DenseStep dense_kkt_solve(const DenseKkt& k);

/// Minimum-norm solution via a complete orthogonal decomposition. Valid when
/// the singularity comes only from redundant but consistent equality rows.
DenseStep dense_kkt_solve_min_norm(const DenseKkt& k);

/// Global x, stacked v and stacked λ of a per-clique state.
struct GlobalIterate {
  Vector x;
  Vector v;
  Vector lambda;
};
GlobalIterate flatten(const Decomposition& d, const IterateState& s);

/// Global Δx, stacked Δv and Δλ for comparison with the distributed directions.
GlobalIterate flatten(const Decomposition& d, const Directions& dirs);

/// Δλ from a global Δx, evaluated subproblem by subproblem.
Vector dense_dual_step(const Decomposition& d, const IterateState& s, const Vector& dx);

/// Squared residual norms and surrogate gap at a global point.
struct GlobalResiduals {
  double p2 = 0.0;
  double d2 = 0.0;
  double gap = 0.0;
  bool feasible = true;
};
GlobalResiduals global_residuals(const Decomposition& d, const Vector& x, const Vector& v,
                                 const Vector& lambda);

/// Backtracking on the assembled problem: α₀ = min(1, factor·min −λ/Δλ),
/// then α ← βα until strictly feasible with ‖(r_p, r_d)‖ ≤ (1 − γα)·old.
struct StepResult {
  double alpha = 0.0;
  long backtracks = 0;
};
StepResult centralized_step_size(const Decomposition& d, const IterateState& s,
                                 const Directions& dirs, const ipm::SolverParams& params);

struct CentralResult {
  Vector x;
  Vector v;
  Vector lambda;
  ipm::ConvergenceTrace trace;
  ipm::Status status = ipm::Status::converged;
};

/// Monolithic primal-dual method with the same iteration and stopping rules.
/// Uses the decomposition's equality blocks as given; with `redundant_rows`
/// the KKT systems are solved in the minimum-norm sense, so unpreprocessed
/// (rank-deficient) blocks are accepted.
CentralResult centralized_ipm(const Decomposition& d, const ipm::SolverParams& params,
                              const Vector& x0, double lambda0 = 1.0, double v0 = 1.0,
                              bool redundant_rows = false);

/// Minimizes ½zᵀQz + qᵀz + c subject to Az = b over the variables not in
/// `keep` (positions into the variable list), all at once.
treeqp::QuadraticMessage parametric_min_oracle(const Matrix& Q, const Vector& q, double c,
                                               const Matrix& A, const Vector& b,
                                               const std::vector<int>& keep);

}  // namespace dipm::oracle
