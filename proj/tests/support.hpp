#pragma once

// Shared fixtures for the unit and acceptance tests.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dipm/ipm.hpp"
#include "dipm/model.hpp"
#include "dipm/oracle.hpp"

namespace dipm::testing {

using Rng = std::mt19937_64;

struct RandomQpOptions {
  int max_cliques = 8;
  int max_vars = 40;
  /// Probability that a subproblem carries one (consistent) equality row.
  double equality_prob = 0.4;
  /// Adds rows that duplicate or combine existing ones.
  bool redundant_rows = false;
  bool quadratic_constraints = true;
};

/// Loosely coupled QP built on a random clique tree: PD objectives, affine and
/// convex quadratic inequalities strictly satisfied at x̄ (stored as x0), and
/// equalities consistent at x̄.
model::CoupledProblem random_loose_qp(Rng& rng, const RandomQpOptions& opts = {});

/// Random primal-dual state on a decomposition: x from the problem's x0,
/// λ ∈ (0.2, 2), v ∈ (−1, 1), t ∈ (0.5, 50).
ipm::IterateState random_state(Rng& rng, const model::Decomposition& d);

/// Random connected chordal graph on at most `max_vertices` vertices, built by
/// attaching each new vertex to a clique of the graph so far.
chordal::UndirectedGraph random_chordal_graph(Rng& rng, int max_vertices);

/// ‖a − b‖∞ / max(‖b‖∞, floor).
double rel_inf(const Vector& a, const Vector& b, double floor = 1e-300);
double rel_inf(const Matrix& a, const Matrix& b, double floor = 1e-300);

/// Problem of the coupled §2 style example: J-sets {0,2},{0,1,3},{3,4},{2,3},{2,5,6},{2,7}.
model::CoupledProblem example_problem();

/// Flow problem on a balanced tree drawn with `seed`.
model::CoupledProblem flow_problem(int height, std::uint64_t seed, int branching = 2);

/// Unique scratch path under the system temp directory.
std::string temp_path(const std::string& stem);

}  // namespace dipm::testing
