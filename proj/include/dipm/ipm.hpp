#pragma once

// Distributed primal-dual interior-point method. Each clique of the tree is
// an agent holding its own subproblems, its slice of x, its equality duals v
// and the inequality duals λ of its subproblems. All cross-agent traffic goes
// through a netsim::Network.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dipm/model.hpp"
#include "dipm/netsim.hpp"
#include "dipm/treeqp.hpp"

namespace dipm::ipm {

using chordal::IndexSet;
using model::Decomposition;

struct SolverParams {
  double mu = 10.0;
  double eps = 1e-10;
  double eps_feas = 1e-8;
  double beta = 0.5;
  double gamma = 0.05;
  int max_iters = 100;
  double step_init_factor = 0.99;
  double min_step = 1e-12;
  /// Residual norm treated as zero by the decrease test. Once ‖(r_p, r_d)‖
  /// reaches roundoff, steps that only move the duality gap must still pass.
  double residual_floor = 1e-10;

  /// Throws InputError on out-of-range values.
  void validate() const;

  /// Line-search acceptance on squared residual sums:
  /// new ≤ (1 − γα)²·old, or new below the floor.
  bool residual_decrease_ok(double alpha, double old_sum, double new_sum) const {
    const double shrink = 1.0 - gamma * alpha;
    return new_sum <= shrink * shrink * old_sum || new_sum <= residual_floor * residual_floor;
  }
};

struct IterateState {
  std::vector<Vector> x;       // per clique, clique order; separators agree exactly
  std::vector<Vector> v;       // per clique, one entry per local equality row
  std::vector<Vector> lambda;  // per subproblem
  double t = 1.0;
  int iter = 0;
};

/// λ and v filled with the given constants.
IterateState initial_state(const Decomposition& d, const Vector& x0, double lambda0 = 1.0,
                           double v0 = 1.0);
/// Each variable read from the first clique containing it.
Vector global_x(const Decomposition& d, const IterateState& s);

struct Directions {
  std::vector<Vector> dx;       // per clique
  std::vector<Vector> dv;       // per clique
  std::vector<Vector> dlambda;  // per subproblem
};

/// Curvature, linear term and equality data of clique i at the current iterate.
/// Throws NumericalError if some constraint is not strictly satisfied.
treeqp::CliqueQpData local_qp_data(const Decomposition& d, const IterateState& s, int clique);

/// Δλ = −diag(g)⁻¹(diag(λ)·Dg·Δx_J − r_cent), r_cent = −λ∘g − 1/t.
Vector dual_step(const model::Subproblem& sp, const Vector& xJ, const Vector& lambda,
                 const Vector& dxJ, double t);

struct DirectionResult {
  Directions dirs;
  std::vector<treeqp::CliqueQpData> data;
  std::vector<treeqp::EliminationRecord> records;
  std::vector<treeqp::QuadraticMessage> messages;
};

/// Sequential upward/downward pass; the network solver performs the same
/// arithmetic in the same order.
DirectionResult compute_directions(const Decomposition& d, const IterateState& s);

struct TraceRow {
  int iter = 0;
  double r_primal_norm = 0.0;
  double r_dual_norm = 0.0;
  double eta_hat = 0.0;
  double alpha = 0.0;
  long backtracks = 0;
  double t = 0.0;
  long mp_steps_cum = 0;
};

struct ConvergenceTrace {
  std::vector<TraceRow> rows;  // rows[0] is the starting point
  int iterations = 0;
  long total_backtracks = 0;

  std::string to_csv() const;
};

enum class Status { converged, max_iters };
const char* to_string(Status s);

/// Called once per accepted step with the iterate before the step.
using IterationObserver =
    std::function<void(const IterateState& before, const Directions& dirs, double alpha)>;

struct SolveOptions {
  bool threaded = false;
  bool log = false;
  IterationObserver observer;
  /// Overrides the problem's own x0.
  std::optional<Vector> x0;
  /// Run phase one when the start is not strictly feasible.
  bool phase_one = true;
  double eps_slack = 1e-4;
};

struct ComponentResult {
  Decomposition decomposition;  // equality blocks as preprocessed by the agents
  Vector x0;                    // strictly feasible start actually used
  IterateState state;
  ConvergenceTrace trace;
  netsim::StepAccounting accounting;
  netsim::RunLog log;
  Status status = Status::converged;
};

struct SolveResult {
  Vector x;
  Status status = Status::converged;
  std::vector<ComponentResult> components;
  /// components[c] covers original variables variables[c].
  std::vector<std::vector<int>> variables;
};

/// Runs the distributed method on one connected component from x0.
ComponentResult solve_component(const Decomposition& d, const SolverParams& params,
                                const Vector& x0, const SolveOptions& opts = {});

/// Splits into connected components, finds a strictly feasible start when
/// needed, and solves each component on its own network.
SolveResult solve(const model::CoupledProblem& p, const SolverParams& params,
                  const SolveOptions& opts = {});

/// Largest margin δ such that every constraint satisfies g ≤ −δ (negative if violated).
double feasibility_margin(const model::CoupledProblem& p, const Vector& x);

/// Sum-of-infeasibilities phase: returns x with every g ≤ −eps_slack/2, or
/// throws InfeasibleError("no strictly feasible point found").
Vector phase_one(const model::CoupledProblem& p, const SolverParams& params,
                 double eps_slack = 1e-4);

/// Builds the slack problem solved by phase_one together with its start point.
std::pair<model::CoupledProblem, Vector> phase_one_problem(const model::CoupledProblem& p,
                                                           double eps_slack);

}  // namespace dipm::ipm
