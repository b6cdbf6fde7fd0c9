#include "dipm/model.hpp"

#include <algorithm>
#include <cmath>

namespace dipm::model {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kPsdTol = 1e-9;

bool is_symmetric(const Matrix& M, double tol) {
  if (M.rows() != M.cols()) return false;
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

bool is_psd(const Matrix& M) {
  if (M.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  return es.eigenvalues().minCoeff() >= -kPsdTol * scale;
}

std::string where(int s) { return "subproblem " + std::to_string(s); }

}  // namespace

// ---------------------------------------------------------------------------
// Constraints and evaluation

ConstraintFn ConstraintFn::affine(Vector a, double b) {
  ConstraintFn g;
  g.kind = ConstraintKind::affine;
  g.a = std::move(a);
  g.b = b;
  return g;
}

ConstraintFn ConstraintFn::quadratic(Matrix Q, Vector a, double b) {
  ConstraintFn g;
  g.kind = ConstraintKind::quadratic;
  g.Q = std::move(Q);
  g.a = std::move(a);
  g.b = b;
  return g;
}

double ConstraintFn::value(const Vector& x) const {
  double v = a.dot(x) + b;
  if (kind == ConstraintKind::quadratic) v += 0.5 * x.dot(Q * x);
  return v;
}

Vector ConstraintFn::gradient(const Vector& x) const {
  if (kind == ConstraintKind::quadratic) return Q * x + a;
  return a;
}

Matrix ConstraintFn::hessian(Eigen::Index dim) const {
  if (kind == ConstraintKind::quadratic) return Q;
  return Matrix::Zero(dim, dim);
}

SubproblemEval eval_subproblem(const Subproblem& s, const Vector& xJ) {
  const Eigen::Index d = s.dim();
  if (xJ.size() != d) {
    throw InputError("eval_subproblem: expected " + std::to_string(d) + " values, got " +
                     std::to_string(xJ.size()));
  }
  SubproblemEval e;
  const Vector Px = s.objective.P * xJ;
  e.f = 0.5 * xJ.dot(Px) + s.objective.q.dot(xJ) + s.objective.r;
  e.grad = Px + s.objective.q;
  e.hess = s.objective.P;
  const int m = s.m();
  e.g.resize(m);
  e.Dg.resize(m, d);
  e.g_hess.reserve(m);
  for (int j = 0; j < m; ++j) {
    const ConstraintFn& c = s.inequalities[j];
    e.g(j) = c.value(xJ);
    e.Dg.row(j) = c.gradient(xJ).transpose();
    e.g_hess.push_back(c.hessian(d));
  }
  return e;
}

Vector restrict_to(const IndexSet& J, const Vector& x) {
  Vector out(static_cast<Eigen::Index>(J.size()));
  for (std::size_t k = 0; k < J.size(); ++k) out(k) = x(J[k]);
  return out;
}

// ---------------------------------------------------------------------------
// CoupledProblem

std::vector<IndexSet> CoupledProblem::index_sets() const {
  std::vector<IndexSet> out;
  out.reserve(subproblems.size());
  for (const auto& s : subproblems) out.push_back(s.J);
  return out;
}

int CoupledProblem::total_inequalities() const {
  int m = 0;
  for (const auto& s : subproblems) m += s.m();
  return m;
}

int CoupledProblem::total_equalities() const {
  int p = 0;
  for (const auto& s : subproblems) p += static_cast<int>(s.equalities.rows());
  return p;
}

void CoupledProblem::validate() const {
  if (n <= 0) throw InputError("problem must have at least one variable");
  if (subproblems.empty()) throw InputError("problem must have at least one subproblem");
  std::vector<bool> covered(n, false);
  for (int k = 0; k < size(); ++k) {
    const Subproblem& s = subproblems[k];
    if (s.J.empty()) throw InputError(where(k) + ": empty index set");
    s.J.check_universe(n, where(k));
    for (int v : s.J) covered[v] = true;
    const Eigen::Index d = s.dim();
    const auto& P = s.objective.P;
    if (P.rows() != d || P.cols() != d) throw InputError(where(k) + ": P has wrong shape");
    if (s.objective.q.size() != d) throw InputError(where(k) + ": q has wrong length");
    if (!P.allFinite() || !s.objective.q.allFinite() || !std::isfinite(s.objective.r)) {
      throw InputError(where(k) + ": objective has non-finite entries");
    }
    if (!is_symmetric(P, kSymmetryTol)) throw InputError(where(k) + ": P is not symmetric");
    if (!is_psd(P)) throw InputError(where(k) + ": P is not positive semidefinite");
    for (int j = 0; j < s.m(); ++j) {
      const ConstraintFn& g = s.inequalities[j];
      const std::string w = where(k) + ", inequality " + std::to_string(j);
      if (g.a.size() != d) throw InputError(w + ": a has wrong length");
      if (!g.a.allFinite() || !std::isfinite(g.b)) throw InputError(w + ": non-finite data");
      if (g.kind == ConstraintKind::quadratic) {
        if (g.Q.rows() != d || g.Q.cols() != d) throw InputError(w + ": Q has wrong shape");
        if (!g.Q.allFinite()) throw InputError(w + ": non-finite data");
        if (!is_symmetric(g.Q, kSymmetryTol)) throw InputError(w + ": Q is not symmetric");
        if (!is_psd(g.Q)) throw InputError(w + ": Q is not positive semidefinite");
      }
    }
    const EqualityBlock& eq = s.equalities;
    if (eq.A.rows() != eq.b.size() || (eq.A.rows() > 0 && eq.A.cols() != d)) {
      throw InputError(where(k) + ": equality block has inconsistent shape");
    }
    if (!eq.A.allFinite() || !eq.b.allFinite()) {
      throw InputError(where(k) + ": equality block has non-finite entries");
    }
  }
  for (int v = 0; v < n; ++v) {
    if (!covered[v]) {
      throw InputError("variable " + std::to_string(v) + " is not used by any subproblem");
    }
  }
  if (x0 && x0->size() != n) throw InputError("x0 has wrong length");
}

// ---------------------------------------------------------------------------
// Assignment

Assignment assign(const CoupledProblem& p, const CliqueTree& t) {
  const int q = t.size();
  Assignment a;
  a.phi.assign(q, {});
  a.clique_of.assign(p.size(), -1);
  for (int s = 0; s < p.size(); ++s) {
    for (int k = 0; k < q; ++k) {
      if (chordal::is_subset(p.subproblems[s].J, t.cliques[k])) {
        a.clique_of[s] = k;
        a.phi[k].push_back(s);
        break;
      }
    }
    if (a.clique_of[s] < 0) {
      throw InternalError("subproblem " + std::to_string(s) +
                          " fits no clique; tree does not match the problem");
    }
  }
  a.local_eq.resize(q);
  for (int k = 0; k < q; ++k) {
    const IndexSet& C = t.cliques[k];
    Eigen::Index rows = 0;
    for (int s : a.phi[k]) rows += p.subproblems[s].equalities.rows();
    EqualityBlock blk{Matrix::Zero(rows, static_cast<Eigen::Index>(C.size())), Vector(rows)};
    Eigen::Index r0 = 0;
    for (int s : a.phi[k]) {
      const Subproblem& sp = p.subproblems[s];
      const auto cols = C.positions_of(sp.J);
      for (Eigen::Index r = 0; r < sp.equalities.rows(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
          blk.A(r0 + r, cols[c]) = sp.equalities.A(r, static_cast<Eigen::Index>(c));
        }
        blk.b(r0 + r) = sp.equalities.b(r);
      }
      r0 += sp.equalities.rows();
    }
    a.local_eq[k] = std::move(blk);
  }
  return a;
}

namespace {

struct ColumnSplit {
  std::vector<int> z;  // positions of C_i \ S_parent
  std::vector<int> y;  // positions of S_parent
};

ColumnSplit split_columns(const CliqueTree& t, int i) {
  const IndexSet sep = t.parent_separator(i);
  ColumnSplit cs;
  const IndexSet& C = t.cliques[i];
  for (std::size_t k = 0; k < C.size(); ++k) {
    (sep.contains(C[k]) ? cs.y : cs.z).push_back(static_cast<int>(k));
  }
  return cs;
}

Matrix take_columns(const Matrix& M, const std::vector<int>& cols) {
  Matrix out(M.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(c) = M.col(cols[c]);
  return out;
}

}  // namespace

EqualityStep preprocess_clique(const IndexSet& C, const IndexSet& parent_sep,
                               const EqualityBlock& own,
                               std::span<const std::pair<IndexSet, EqualityBlock>> from_children,
                               bool is_root) {
  const Eigen::Index width = static_cast<Eigen::Index>(C.size());
  Eigen::Index rows = own.rows();
  for (const auto& [sep, blk] : from_children) rows += blk.rows();
  Matrix M = Matrix::Zero(rows, width);
  Vector b(rows);
  if (own.rows() > 0) {
    M.topRows(own.rows()) = own.A;
    b.head(own.rows()) = own.b;
  }
  Eigen::Index r0 = own.rows();
  for (const auto& [sep, blk] : from_children) {
    const auto cols = C.positions_of(sep);
    for (Eigen::Index r = 0; r < blk.rows(); ++r) {
      for (std::size_t c = 0; c < cols.size(); ++c) {
        M(r0 + r, cols[c]) = blk.A(r, static_cast<Eigen::Index>(c));
      }
      b(r0 + r) = blk.b(r);
    }
    r0 += blk.rows();
  }

  ColumnSplit cs;
  for (Eigen::Index k = 0; k < width; ++k) {
    (parent_sep.contains(C[k]) ? cs.y : cs.z).push_back(static_cast<int>(k));
  }
  EqualityStep out;
  out.pushed = {Matrix(0, static_cast<Eigen::Index>(cs.y.size())), Vector(0)};
  if (rows == 0) {
    out.retained = {std::move(M), std::move(b)};
    return out;
  }
  // Ranks are judged against the scale of the whole stacked block, so rows
  // that cancel to roundoff in a child do not look independent here.
  const double cutoff = kRankTolerance * Eigen::JacobiSVD<Matrix>(M).singularValues()(0);
  const Matrix A1 = take_columns(M, cs.z);
  Matrix Ut = Matrix::Identity(rows, rows);
  int rank = 0;
  if (A1.cols() > 0) {
    Eigen::JacobiSVD<Matrix> svd(A1, Eigen::ComputeFullU);
    for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k) {
      if (svd.singularValues()(k) > cutoff) ++rank;
    }
    Ut = svd.matrixU().transpose();
  }
  if (rank == rows) {
    out.retained = {std::move(M), std::move(b)};
    return out;
  }

  const Matrix MR = Ut * M;
  const Vector bR = Ut * b;
  out.retained = {MR.topRows(rank), bR.head(rank)};
  const Eigen::Index rest = rows - rank;
  // The A1 part of the remaining rows is numerically zero. Rows that vanish
  // on the separator too read 0 = b: check and drop them; push the others.
  const Matrix Y = take_columns(MR.bottomRows(rest), cs.y);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < rest; ++r) {
    const bool vanishes = Y.cols() == 0 || Y.row(r).lpNorm<Eigen::Infinity>() <= cutoff;
    if (!vanishes && !is_root) {
      keep.push_back(r);
    } else if (std::abs(bR(rank + r)) > kEqualityFeasibilityTol) {
      throw InfeasibleError("infeasible equality system");
    }
  }
  out.pushed.A.resize(static_cast<Eigen::Index>(keep.size()), Y.cols());
  out.pushed.b.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    out.pushed.A.row(ki) = Y.row(keep[k]);
    out.pushed.b(ki) = bR(rank + keep[k]);
  }
  return out;
}

Assignment preprocess_equalities(const CoupledProblem& p, const CliqueTree& t,
                                 const Assignment& a) {
  (void)p;
  if (!t.rooted()) throw InputError("equality preprocessing requires a rooted clique tree");
  Assignment out = a;
  std::vector<EqualityBlock> pushed(t.size());
  for (int i : t.postorder()) {
    std::vector<std::pair<IndexSet, EqualityBlock>> from_children;
    for (int k : t.children[i]) from_children.emplace_back(t.parent_separator(k), pushed[k]);
    auto step = preprocess_clique(t.cliques[i], t.parent_separator(i), a.local_eq[i],
                                  from_children, t.parent[i] < 0);
    out.local_eq[i] = std::move(step.retained);
    pushed[i] = std::move(step.pushed);
  }
  return out;
}

bool rank_conditions_hold(const CliqueTree& t, const Assignment& a) {
  for (int i = 0; i < t.size(); ++i) {
    const EqualityBlock& blk = a.local_eq[i];
    if (blk.rows() == 0) continue;
    const ColumnSplit cs = split_columns(t, i);
    const Matrix A1 = take_columns(blk.A, cs.z);
    if (numerical_rank(A1, kRankTolerance) != blk.rows()) return false;
    if (numerical_rank(blk.A, kRankTolerance) != blk.rows()) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Decomposition

Decomposition decompose(const CoupledProblem& p, bool preprocess) {
  p.validate();
  const auto sets = p.index_sets();
  const auto g = chordal::sparsity_graph(sets, p.n);
  auto emb = chordal::chordal_embed(g);
  auto tree = chordal::root_min_height(chordal::mwst_clique_tree(emb.cliques));
  Assignment asg = assign(p, tree);
  if (preprocess) asg = preprocess_equalities(p, tree, asg);
  return {p, std::move(tree), std::move(asg)};
}

std::vector<Component> split_components(const CoupledProblem& p) {
  p.validate();
  const auto sets = p.index_sets();
  const auto comps = chordal::connected_components(chordal::coupling_graph(sets));
  std::vector<Component> out;
  out.reserve(comps.size());
  for (const auto& members : comps) {
    Component c;
    c.subproblems = members;
    std::vector<int> vars;
    for (int s : members) vars.insert(vars.end(), sets[s].begin(), sets[s].end());
    c.variables = IndexSet::from_unsorted(std::move(vars)).vec();
    std::vector<int> local(p.n, -1);
    for (std::size_t k = 0; k < c.variables.size(); ++k) {
      local[c.variables[k]] = static_cast<int>(k);
    }
    c.problem.n = static_cast<int>(c.variables.size());
    for (int s : members) {
      Subproblem sp = p.subproblems[s];
      std::vector<int> J;
      for (int v : sp.J) J.push_back(local[v]);
      sp.J = IndexSet(std::move(J));
      c.problem.subproblems.push_back(std::move(sp));
    }
    if (p.x0) {
      Vector x0(c.problem.n);
      for (int k = 0; k < c.problem.n; ++k) x0(k) = (*p.x0)(c.variables[k]);
      c.problem.x0 = std::move(x0);
    }
    out.push_back(std::move(c));
  }
  return out;
}

bool structurally_equal(const CoupledProblem& a, const CoupledProblem& b) {
  if (a.n != b.n || a.size() != b.size()) return false;
  if (a.x0.has_value() != b.x0.has_value()) return false;
  if (a.x0 && *a.x0 != *b.x0) return false;
  for (int k = 0; k < a.size(); ++k) {
    const Subproblem& s = a.subproblems[k];
    const Subproblem& t = b.subproblems[k];
    if (s.J != t.J || s.objective.P != t.objective.P || s.objective.q != t.objective.q ||
        s.objective.r != t.objective.r || s.m() != t.m()) {
      return false;
    }
    for (int j = 0; j < s.m(); ++j) {
      const ConstraintFn& g = s.inequalities[j];
      const ConstraintFn& h = t.inequalities[j];
      if (g.kind != h.kind || g.a != h.a || g.b != h.b) return false;
      if (g.kind == ConstraintKind::quadratic && g.Q != h.Q) return false;
    }
    if (s.equalities.A.rows() != t.equalities.A.rows()) return false;
    if (s.equalities.A.rows() > 0 &&
        (s.equalities.A != t.equalities.A || s.equalities.b != t.equalities.b)) {
      return false;
    }
  }
  return true;
}

}  // namespace dipm::model
