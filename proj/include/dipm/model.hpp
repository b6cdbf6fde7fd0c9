#pragma once

// Loosely coupled convex problems, subproblem-to-clique assignment and
// equality preprocessing.

#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dipm/chordal.hpp"
#include "dipm/common.hpp"

namespace dipm::model {

using chordal::CliqueTree;
using chordal::IndexSet;

/// ½xᵀPx + qᵀx + r over the subproblem's local variables.
struct QuadraticForm {
  Matrix P;
  Vector q;
  double r = 0.0;
};

enum class ConstraintKind { affine, quadratic };

/// aᵀx + b ≤ 0, or ½xᵀQx + aᵀx + b ≤ 0.
struct ConstraintFn {
  ConstraintKind kind = ConstraintKind::affine;
  Matrix Q;  // empty for affine constraints
  Vector a;
  double b = 0.0;

  static ConstraintFn affine(Vector a, double b);
  static ConstraintFn quadratic(Matrix Q, Vector a, double b);

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  /// Zero matrix for affine constraints.
  Matrix hessian(Eigen::Index dim) const;
};

struct EqualityBlock {
  Matrix A;
  Vector b;

  Eigen::Index rows() const { return A.rows(); }
};

struct Subproblem {
  IndexSet J;
  QuadraticForm objective;
  std::vector<ConstraintFn> inequalities;
  EqualityBlock equalities;

  int dim() const { return static_cast<int>(J.size()); }
  int m() const { return static_cast<int>(inequalities.size()); }
};

struct CoupledProblem {
  int n = 0;
  std::vector<Subproblem> subproblems;
  /// Optional starting point carried in problem files.
  std::optional<Vector> x0;

  int size() const { return static_cast<int>(subproblems.size()); }
  std::vector<IndexSet> index_sets() const;
  int total_inequalities() const;
  int total_equalities() const;
  /// Throws InputError describing the first violated invariant.
  void validate() const;
};

struct SubproblemEval {
  double f = 0.0;
  Vector grad;
  Matrix hess;
  Vector g;                    // constraint values
  Matrix Dg;                   // m × |J|, rows are constraint gradients
  std::vector<Matrix> g_hess;  // one |J|×|J| matrix per constraint
};

SubproblemEval eval_subproblem(const Subproblem& s, const Vector& xJ);

/// Gathers x_J from a global vector.
Vector restrict_to(const IndexSet& J, const Vector& x);

struct Assignment {
  /// phi[k]: subproblems handled by clique k, ascending.
  std::vector<std::vector<int>> phi;
  /// clique_of[s]: the clique that owns subproblem s.
  std::vector<int> clique_of;
  /// Stacked equality block per clique, columns in clique order.
  std::vector<EqualityBlock> local_eq;
};

/// Each subproblem goes to the smallest-index clique containing its J.
Assignment assign(const CoupledProblem& p, const CliqueTree& t);

/// Upward pass that makes [A1 A2] and A1 full row rank at every clique, where
/// A1 holds the columns of C_i minus the parent separator. Requires a rooted tree.
Assignment preprocess_equalities(const CoupledProblem& p, const CliqueTree& t,
                                 const Assignment& a);

struct EqualityStep {
  EqualityBlock retained;  // over the clique's columns
  EqualityBlock pushed;    // over parent_sep; empty at the root
};

/// One clique's share of the preprocessing pass. `from_children` holds the
/// rows pushed up by each child, expressed over that child's separator.
EqualityStep preprocess_clique(const IndexSet& clique, const IndexSet& parent_sep,
                               const EqualityBlock& own,
                               std::span<const std::pair<IndexSet, EqualityBlock>> from_children,
                               bool is_root);

/// True when rank([A1 A2]) == rank(A1) == rows at every clique.
bool rank_conditions_hold(const CliqueTree& t, const Assignment& a);

/// Absolute tolerance for 0·x = c rows found at the root.
inline constexpr double kEqualityFeasibilityTol = 1e-8;

/// A problem together with its rooted clique tree and assignment.
struct Decomposition {
  CoupledProblem problem;
  CliqueTree tree;
  Assignment assignment;
};

/// Sparsity graph, chordal embedding, spanning tree, minimum-height rooting
/// and assignment. Throws chordal::DisconnectedError for multi-component problems.
Decomposition decompose(const CoupledProblem& p, bool preprocess = true);

/// A connected piece of a problem with its variables renumbered from 0.
struct Component {
  CoupledProblem problem;
  std::vector<int> variables;    // local variable -> original index
  std::vector<int> subproblems;  // local subproblem -> original index
};

std::vector<Component> split_components(const CoupledProblem& p);

// ---------------------------------------------------------------------------
// Flow benchmark

/// Rooted agent tree; agent 0 need not be the root but exactly one parent is -1.
struct FlowTree {
  std::vector<int> parent;

  int size() const { return static_cast<int>(parent.size()); }
  int root() const;
  std::vector<std::vector<int>> children() const;
  void validate() const;

  /// Breadth-first numbered balanced tree; height counted in edges.
  static FlowTree balanced(int height, int branching);
};

struct FlowParams {
  std::vector<double> mu, rho, c, u;  // per agent; u is used by leaves only
  double O_ref = 0.0;
  double sigma = 0.0;
};

/// Uniform draws from u∈(0,20), μ∈(0,10), ρ∈(0,5), c∈(0,15), O_ref∈(0,20), σ∈(0,50).
FlowParams draw_flow_params(const FlowTree& tree, std::uint64_t seed);

/// Variables (d_0..d_{q-1}, f_0..f_{q-1}); one subproblem per agent.
/// The returned problem carries x0 = (c/2, 1).
CoupledProblem gen_flow_problem(const FlowTree& tree, const FlowParams& params);

/// The unsplit objective before the toll terms are shared between agents.
double flow_objective_unsplit(const FlowTree& tree, const FlowParams& params, const Vector& x);

// ---------------------------------------------------------------------------
// Problem files

nlohmann::json save_problem(const CoupledProblem& p);
/// Errors carry a JSON pointer to the offending element.
CoupledProblem load_problem(const nlohmann::json& doc);

CoupledProblem read_problem_file(const std::string& path);
void write_problem_file(const CoupledProblem& p, const std::string& path);

FlowTree load_flow_tree(const nlohmann::json& doc);

bool structurally_equal(const CoupledProblem& a, const CoupledProblem& b);

}  // namespace dipm::model
