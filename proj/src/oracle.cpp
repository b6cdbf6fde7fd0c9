#include "dipm/oracle.hpp"

#include <cmath>
#include <limits>

namespace dipm::oracle {

namespace {

struct Layout {
  std::vector<Eigen::Index> v_off;    // per clique
  std::vector<Eigen::Index> lam_off;  // per subproblem
  Eigen::Index nv = 0;
  Eigen::Index nlam = 0;
};

Layout layout(const Decomposition& d) {
  Layout l;
  for (const auto& blk : d.assignment.local_eq) {
    l.v_off.push_back(l.nv);
    l.nv += blk.rows();
  }
  for (const auto& sp : d.problem.subproblems) {
    l.lam_off.push_back(l.nlam);
    l.nlam += sp.m();
  }
  return l;
}

Matrix global_A(const Decomposition& d, const Layout& l, Vector* b) {
  Matrix A = Matrix::Zero(l.nv, d.problem.n);
  if (b) b->resize(l.nv);
  for (int i = 0; i < d.tree.size(); ++i) {
    const auto& blk = d.assignment.local_eq[i];
    const auto& C = d.tree.cliques[i];
    for (Eigen::Index r = 0; r < blk.rows(); ++r) {
      for (std::size_t c = 0; c < C.size(); ++c) {
        A(l.v_off[i] + r, C[c]) = blk.A(r, static_cast<Eigen::Index>(c));
      }
      if (b) (*b)(l.v_off[i] + r) = blk.b(r);
    }
  }
  return A;
}

DenseKkt assemble(const Decomposition& d, const Vector& x, const Vector& v, const Vector& lam,
                  double t) {
  const Layout l = layout(d);
  const int n = d.problem.n;
  DenseKkt k;
  k.H = Matrix::Zero(n, n);
  k.r = Vector::Zero(n);
  for (int s = 0; s < d.problem.size(); ++s) {
    const auto& sp = d.problem.subproblems[s];
    const auto e = model::eval_subproblem(sp, model::restrict_to(sp.J, x));
    const Vector ls = lam.segment(l.lam_off[s], sp.m());
    if (sp.m() > 0 && !(e.g.maxCoeff() < 0.0)) {
      throw NumericalError("iterate left interior at subproblem " + std::to_string(s));
    }
    Matrix Hs = e.hess;
    for (int j = 0; j < sp.m(); ++j) Hs += ls(j) * e.g_hess[j];
    const Vector w = (ls.array() / e.g.array()).matrix();
    Hs -= e.Dg.transpose() * w.asDiagonal() * e.Dg;
    const Vector r_cent = (-ls.array() * e.g.array() - 1.0 / t).matrix();
    const Vector rs = e.grad + e.Dg.transpose() * ls +
                      e.Dg.transpose() * (r_cent.array() / e.g.array()).matrix();
    for (std::size_t a = 0; a < sp.J.size(); ++a) {
      k.r(sp.J[a]) += rs(static_cast<Eigen::Index>(a));
      for (std::size_t b = 0; b < sp.J.size(); ++b) {
        k.H(sp.J[a], sp.J[b]) += Hs(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      }
    }
  }
  Vector b;
  k.A = global_A(d, l, &b);
  k.r += k.A.transpose() * v;
  k.r_primal = k.A * x - b;
  return k;
}

Vector dual_step_global(const Decomposition& d, const Vector& x, const Vector& lam, double t,
                        const Vector& dx) {
  const Layout l = layout(d);
  Vector out(l.nlam);
  for (int s = 0; s < d.problem.size(); ++s) {
    const auto& sp = d.problem.subproblems[s];
    const auto e = model::eval_subproblem(sp, model::restrict_to(sp.J, x));
    const Vector Ddx = e.Dg * model::restrict_to(sp.J, dx);
    for (int j = 0; j < sp.m(); ++j) {
      const double lj = lam(l.lam_off[s] + j);
      const double r_cent = -lj * e.g(j) - 1.0 / t;
      out(l.lam_off[s] + j) = (r_cent - lj * Ddx(j)) / e.g(j);
    }
  }
  return out;
}

GlobalResiduals residuals(const Decomposition& d, const Vector& x, const Vector& v,
                          const Vector& lam) {
  const Layout l = layout(d);
  GlobalResiduals out;
  Vector rd = Vector::Zero(d.problem.n);
  for (int s = 0; s < d.problem.size(); ++s) {
    const auto& sp = d.problem.subproblems[s];
    const auto e = model::eval_subproblem(sp, model::restrict_to(sp.J, x));
    const Vector ls = lam.segment(l.lam_off[s], sp.m());
    for (int j = 0; j < sp.m(); ++j) {
      if (!(e.g(j) < 0.0) || !(ls(j) > 0.0)) out.feasible = false;
    }
    const Vector c = e.grad + e.Dg.transpose() * ls;
    for (std::size_t a = 0; a < sp.J.size(); ++a) rd(sp.J[a]) += c(static_cast<Eigen::Index>(a));
    out.gap -= ls.dot(e.g);
  }
  Vector b;
  const Matrix A = global_A(d, l, &b);
  rd += A.transpose() * v;
  out.p2 = (A * x - b).squaredNorm();
  out.d2 = rd.squaredNorm();
  return out;
}

struct GlobalStep {
  double alpha;
  long backtracks;
  GlobalResiduals at_new;
};

GlobalStep line_search(const Decomposition& d, const Vector& x, const Vector& v,
                       const Vector& lam, const Vector& dx, const Vector& dv, const Vector& dlam,
                       double old_p2, double old_d2, const ipm::SolverParams& params) {
  double ratio = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < lam.size(); ++j) {
    if (dlam(j) < 0.0) ratio = std::min(ratio, -lam(j) / dlam(j));
  }
  double alpha = std::isfinite(ratio) ? std::min(1.0, params.step_init_factor * ratio) : 1.0;
  long b = 0;
  for (;;) {
    const auto res = residuals(d, x + alpha * dx, v + alpha * dv, lam + alpha * dlam);
    if (res.feasible && params.residual_decrease_ok(alpha, old_p2 + old_d2, res.p2 + res.d2)) {
      return {alpha, b, res};
    }
    alpha *= params.beta;
    ++b;
    if (alpha < params.min_step) throw NumericalError("line search failed");
  }
}

}  // namespace

Matrix DenseKkt::matrix() const {
  const Eigen::Index n = H.rows(), p = A.rows();
  Matrix K = Matrix::Zero(n + p, n + p);
  K.topLeftCorner(n, n) = H;
  K.topRightCorner(n, p) = A.transpose();
  K.bottomLeftCorner(p, n) = A;
  return K;
}

Vector DenseKkt::rhs() const {
  Vector out(r.size() + r_primal.size());
  out << -r, -r_primal;
  return out;
}

GlobalIterate flatten(const Decomposition& d, const IterateState& s) {
  const Layout l = layout(d);
  GlobalIterate g;
  g.x = ipm::global_x(d, s);
  g.v.resize(l.nv);
  for (int i = 0; i < d.tree.size(); ++i) g.v.segment(l.v_off[i], s.v[i].size()) = s.v[i];
  g.lambda.resize(l.nlam);
  for (int k = 0; k < d.problem.size(); ++k) {
    g.lambda.segment(l.lam_off[k], s.lambda[k].size()) = s.lambda[k];
  }
  return g;
}

GlobalIterate flatten(const Decomposition& d, const Directions& dirs) {
  IterateState s;
  s.x = dirs.dx;
  s.v = dirs.dv;
  s.lambda = dirs.dlambda;
  return flatten(d, s);
}

DenseKkt assemble_global(const Decomposition& d, const IterateState& s) {
  const auto g = flatten(d, s);
  return assemble(d, g.x, g.v, g.lambda, s.t);
}

DenseStep dense_kkt_solve(const DenseKkt& k) {
  const Matrix K = k.matrix();
  const Vector rhs = k.rhs();
  DenseStep out;
  if (K.rows() == 0) {
    out.dx.resize(0);
    out.dv.resize(0);
    return out;
  }
  // Barrier terms grow like 1/g² near the boundary; symmetric scaling keeps
  // the rank decision about structure rather than magnitude.
  Vector D(K.rows());
  for (Eigen::Index i = 0; i < K.rows(); ++i) {
    const double m = K.row(i).cwiseAbs().maxCoeff();
    if (m == 0.0) throw NumericalError("KKT matrix is singular");
    D(i) = 1.0 / std::sqrt(m);
  }
  Eigen::FullPivLU<Matrix> lu(D.asDiagonal() * K * D.asDiagonal());
  if (!lu.isInvertible()) {
    throw NumericalError("KKT matrix is singular");
  }
  const Vector sol = D.asDiagonal() * lu.solve((D.array() * rhs.array()).matrix());
  out.dx = sol.head(k.H.rows());
  out.dv = sol.tail(k.A.rows());
  return out;
}

DenseStep dense_kkt_solve_min_norm(const DenseKkt& k) {
  const Matrix K = k.matrix();
  DenseStep out;
  if (K.rows() == 0) {
    out.dx.resize(0);
    out.dv.resize(0);
    return out;
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(K);
  const Vector sol = cod.solve(k.rhs());
  out.dx = sol.head(k.H.rows());
  out.dv = sol.tail(k.A.rows());
  return out;
}

Vector dense_dual_step(const Decomposition& d, const IterateState& s, const Vector& dx) {
  const auto g = flatten(d, s);
  return dual_step_global(d, g.x, g.lambda, s.t, dx);
}

GlobalResiduals global_residuals(const Decomposition& d, const Vector& x, const Vector& v,
                                 const Vector& lambda) {
  return residuals(d, x, v, lambda);
}

StepResult centralized_step_size(const Decomposition& d, const IterateState& s,
                                 const Directions& dirs, const ipm::SolverParams& params) {
  const auto g = flatten(d, s);
  const auto dg = flatten(d, dirs);
  const auto old = residuals(d, g.x, g.v, g.lambda);
  const auto st = line_search(d, g.x, g.v, g.lambda, dg.x, dg.v, dg.lambda, old.p2, old.d2, params);
  return {st.alpha, st.backtracks};
}

CentralResult centralized_ipm(const Decomposition& d, const ipm::SolverParams& params,
                              const Vector& x0, double lambda0, double v0,
                              bool redundant_rows) {
  params.validate();
  if (x0.size() != d.problem.n) throw InputError("x0 has wrong length");
  const Layout l = layout(d);
  const int m = d.problem.total_inequalities();
  CentralResult out;
  out.x = x0;
  out.v = Vector::Constant(l.nv, v0);
  out.lambda = Vector::Constant(l.nlam, lambda0);

  auto res = residuals(d, out.x, out.v, out.lambda);
  if (!res.feasible) throw InputError("starting point is not strictly feasible");
  auto stop_test = [&params](const GlobalResiduals& r) {
    return std::sqrt(r.p2) <= params.eps_feas && std::sqrt(r.d2) <= params.eps_feas &&
           r.gap <= params.eps;
  };
  auto next_t = [&](double gap, double t_old) {
    if (m == 0) return t_old;
    if (!(gap > 0.0)) throw NumericalError("surrogate duality gap is not positive");
    return params.mu * m / gap;
  };
  double t = m > 0 ? next_t(res.gap, 1.0) : 1.0;
  bool stop = stop_test(res);
  out.trace.rows.push_back({0, std::sqrt(res.p2), std::sqrt(res.d2), res.gap, 0.0, 0, t, 0});

  int K = 0;
  long B = 0;
  while (!stop && K < params.max_iters) {
    const DenseKkt kkt = assemble(d, out.x, out.v, out.lambda, t);
    const DenseStep step = redundant_rows ? dense_kkt_solve_min_norm(kkt) : dense_kkt_solve(kkt);
    const Vector dlam = dual_step_global(d, out.x, out.lambda, t, step.dx);
    const auto st = line_search(d, out.x, out.v, out.lambda, step.dx, step.dv, dlam, res.p2,
                                res.d2, params);
    out.x += st.alpha * step.dx;
    out.v += st.alpha * step.dv;
    out.lambda += st.alpha * dlam;
    res = st.at_new;
    stop = stop_test(res);
    t = next_t(res.gap, t);
    ++K;
    B += st.backtracks;
    out.trace.rows.push_back(
        {K, std::sqrt(res.p2), std::sqrt(res.d2), res.gap, st.alpha, st.backtracks, t, 0});
  }
  out.trace.iterations = K;
  out.trace.total_backtracks = B;
  out.status = stop ? ipm::Status::converged : ipm::Status::max_iters;
  return out;
}

treeqp::QuadraticMessage parametric_min_oracle(const Matrix& Q, const Vector& q, double c,
                                               const Matrix& A, const Vector& b,
                                               const std::vector<int>& keep) {
  const Eigen::Index n = Q.rows();
  const Eigen::Index p = A.rows();
  std::vector<bool> kept(n, false);
  for (int k : keep) kept.at(k) = true;
  std::vector<int> elim;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!kept[k]) elim.push_back(static_cast<int>(k));
  }
  const Eigen::Index nz = static_cast<Eigen::Index>(elim.size());
  const Eigen::Index ny = static_cast<Eigen::Index>(keep.size());
  if (nz == 0 && p > 0) throw InputError("constraints remain but nothing is eliminated");

  // x = T·y + t0 with the eliminated block solving the constrained minimization.
  Matrix T = Matrix::Zero(n, ny);
  Vector t0 = Vector::Zero(n);
  for (Eigen::Index k = 0; k < ny; ++k) T(keep[k], k) = 1.0;
  if (nz > 0) {
    Matrix K = Matrix::Zero(nz + p, nz + p);
    Matrix R = Matrix::Zero(nz + p, ny + 1);
    for (Eigen::Index a = 0; a < nz; ++a) {
      for (Eigen::Index bb = 0; bb < nz; ++bb) K(a, bb) = Q(elim[a], elim[bb]);
      for (Eigen::Index r = 0; r < p; ++r) {
        K(a, nz + r) = A(r, elim[a]);
        K(nz + r, a) = A(r, elim[a]);
      }
      for (Eigen::Index k = 0; k < ny; ++k) R(a, k) = -Q(elim[a], keep[k]);
      R(a, ny) = -q(elim[a]);
    }
    for (Eigen::Index r = 0; r < p; ++r) {
      for (Eigen::Index k = 0; k < ny; ++k) R(nz + r, k) = -A(r, keep[k]);
      R(nz + r, ny) = b(r);
    }
    Eigen::FullPivLU<Matrix> lu(K);
    if (!lu.isInvertible()) throw NumericalError("parametric oracle: singular KKT block");
    const Matrix S = lu.solve(R);
    for (Eigen::Index a = 0; a < nz; ++a) {
      T.row(elim[a]) = S.row(a).head(ny);
      t0(elim[a]) = S(a, ny);
    }
  }
  treeqp::QuadraticMessage m;
  Matrix Qm = T.transpose() * Q * T;
  m.Q = 0.5 * (Qm + Qm.transpose());
  m.q = T.transpose() * (Q * t0) + T.transpose() * q;
  m.c = 0.5 * t0.dot(Q * t0) + q.dot(t0) + c;
  std::vector<int> sep(keep.begin(), keep.end());
  m.separator = IndexSet::from_unsorted(sep);
  return m;
}

}  // namespace dipm::oracle
