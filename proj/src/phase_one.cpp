#include <algorithm>
#include <cmath>

#include "dipm/ipm.hpp"

namespace dipm::ipm {

namespace {

// Keeps every local curvature block nonsingular without moving the
// feasibility answer in any material way.
constexpr double kPhaseOneRegularization = 1e-6;

}  // namespace

std::pair<model::CoupledProblem, Vector> phase_one_problem(const model::CoupledProblem& p,
                                                           double eps_slack) {
  const int m_total = p.total_inequalities();
  model::CoupledProblem out;
  out.n = p.n + m_total;
  Vector start = Vector::Zero(out.n);
  int next_slack = p.n;
  for (const auto& sp : p.subproblems) {
    const int d = sp.dim(), m = sp.m();
    model::Subproblem s;
    std::vector<int> J = sp.J.vec();
    for (int j = 0; j < m; ++j) J.push_back(next_slack + j);
    s.J = IndexSet(std::move(J));
    const int w = d + m;
    s.objective.P = Matrix::Zero(w, w);
    s.objective.P.topLeftCorner(d, d) = kPhaseOneRegularization * Matrix::Identity(d, d);
    s.objective.q = Vector::Zero(w);
    s.objective.q.tail(m).setOnes();
    const Vector zero = Vector::Zero(d);
    for (int j = 0; j < m; ++j) {
      const auto& g = sp.inequalities[j];
      Vector a = Vector::Zero(w);
      a.head(d) = g.a;
      a(d + j) = -1.0;
      if (g.kind == model::ConstraintKind::quadratic) {
        Matrix Q = Matrix::Zero(w, w);
        Q.topLeftCorner(d, d) = g.Q;
        s.inequalities.push_back(model::ConstraintFn::quadratic(std::move(Q), std::move(a), g.b));
      } else {
        s.inequalities.push_back(model::ConstraintFn::affine(std::move(a), g.b));
      }
      Vector lower = Vector::Zero(w);
      lower(d + j) = -1.0;
      s.inequalities.push_back(model::ConstraintFn::affine(std::move(lower), -eps_slack));
      // One unit above the tightest admissible slack keeps the start interior.
      start(next_slack + j) = std::max(g.value(zero), -eps_slack) + 1.0;
    }
    s.equalities.A = Matrix(0, w);
    s.equalities.b = Vector(0);
    next_slack += m;
    out.subproblems.push_back(std::move(s));
  }
  return {std::move(out), std::move(start)};
}

Vector phase_one(const model::CoupledProblem& p, const SolverParams& params, double eps_slack) {
  p.validate();
  if (!(eps_slack > 0.0)) throw InputError("eps_slack must be positive");
  if (p.x0 && feasibility_margin(p, *p.x0) > 0.0) return *p.x0;
  const Vector zero = Vector::Zero(p.n);
  if (feasibility_margin(p, zero) > 0.0) return zero;

  auto [slack, start] = phase_one_problem(p, eps_slack);
  SolveOptions opts;
  opts.phase_one = false;
  opts.x0 = start;
  // The answer is only needed to within eps_slack. Solving to the outer
  // gap tolerance would drive the barrier curvature of a degenerate slack
  // problem (e.g. an empty interior) far past the regularizer's.
  SolverParams inner = params;
  inner.eps = std::max(params.eps, 0.1 * eps_slack);
  const SolveResult r = solve(slack, inner, opts);
  const Vector x = r.x.head(p.n);
  const double objective = r.x.tail(slack.n - p.n).sum();
  const double target = -eps_slack * p.total_inequalities();
  if (feasibility_margin(p, x) < 0.5 * eps_slack ||
      objective > target + 0.5 * eps_slack * p.total_inequalities()) {
    throw InfeasibleError("no strictly feasible point found (phase-one value " +
                          std::to_string(objective) + ")");
  }
  return x;
}

}  // namespace dipm::ipm
