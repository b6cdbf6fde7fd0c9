#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>

#include <unistd.h>

namespace dipm::testing {

namespace {

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

Vector gaussian(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> nd;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

Matrix gaussian(Rng& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> nd;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = nd(rng);
  }
  return m;
}

std::vector<int> random_subset(Rng& rng, const std::vector<int>& from, int k) {
  std::vector<int> pool = from;
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

model::Subproblem random_subproblem(Rng& rng, const std::vector<int>& J, const Vector& xbar,
                                    const RandomQpOptions& opts) {
  model::Subproblem sp;
  sp.J = chordal::IndexSet(J);
  const auto k = static_cast<Eigen::Index>(J.size());
  const Vector xJ = model::restrict_to(sp.J, xbar);

  const Matrix B = gaussian(rng, k, k);
  Matrix P = B * B.transpose() / static_cast<double>(k) + 0.5 * Matrix::Identity(k, k);
  sp.objective.P = 0.5 * (P + P.transpose());
  sp.objective.q = gaussian(rng, k);

  const int m = uniform_int(rng, 0, 3);
  for (int j = 0; j < m; ++j) {
    const double slack = uniform(rng, 0.3, 2.0);
    const Vector a = gaussian(rng, k);
    if (opts.quadratic_constraints && uniform(rng, 0.0, 1.0) < 0.4) {
      const Matrix M = gaussian(rng, k, k);
      Matrix Q = M * M.transpose() / static_cast<double>(k);
      Q = 0.5 * (Q + Q.transpose());
      // ½(x−x̄)ᵀQ(x−x̄) + aᵀ(x−x̄) − slack, expanded.
      sp.inequalities.push_back(model::ConstraintFn::quadratic(
          Q, a - Q * xJ, 0.5 * xJ.dot(Q * xJ) - a.dot(xJ) - slack));
    } else {
      sp.inequalities.push_back(model::ConstraintFn::affine(a, -a.dot(xJ) - slack));
    }
  }

  std::vector<Vector> rows;
  if (uniform(rng, 0.0, 1.0) < opts.equality_prob) rows.push_back(gaussian(rng, k));
  if (opts.redundant_rows && !rows.empty()) {
    // Exact duplicates and multiples make the stacked blocks rank deficient.
    const int extra = uniform_int(rng, 1, 2);
    for (int e = 0; e < extra; ++e) rows.push_back(uniform(rng, -2.0, 2.0) * rows[0]);
  }
  sp.equalities.A.resize(static_cast<Eigen::Index>(rows.size()), k);
  sp.equalities.b.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    sp.equalities.A.row(ri) = rows[r].transpose();
    sp.equalities.b(ri) = rows[r].dot(xJ);
  }
  return sp;
}

}  // namespace

model::CoupledProblem random_loose_qp(Rng& rng, const RandomQpOptions& opts) {
  const int target = uniform_int(rng, 1, opts.max_cliques);
  std::vector<std::vector<int>> cliques;
  int n = 0;
  auto fresh = [&n](int k) {
    std::vector<int> v;
    for (int i = 0; i < k; ++i) v.push_back(n++);
    return v;
  };
  cliques.push_back(fresh(uniform_int(rng, 1, 3)));
  std::vector<int> parent{-1};
  while (static_cast<int>(cliques.size()) < target) {
    const int k = uniform_int(rng, 1, 3);
    if (n + k > opts.max_vars) break;
    const int par = uniform_int(rng, 0, static_cast<int>(cliques.size()) - 1);
    const auto& pc = cliques[static_cast<std::size_t>(par)];
    const int s = uniform_int(rng, 1, std::min<int>(2, static_cast<int>(pc.size())));
    std::vector<int> c = random_subset(rng, pc, s);
    for (int v : fresh(k)) c.push_back(v);
    std::sort(c.begin(), c.end());
    cliques.push_back(std::move(c));
    parent.push_back(par);
  }

  model::CoupledProblem p;
  p.n = n;
  Vector xbar(n);
  for (int i = 0; i < n; ++i) xbar(i) = uniform(rng, -1.0, 1.0);
  for (std::size_t c = 0; c < cliques.size(); ++c) {
    p.subproblems.push_back(random_subproblem(rng, cliques[c], xbar, opts));
    if (uniform(rng, 0.0, 1.0) < 0.5) {
      const int k = uniform_int(rng, 1, static_cast<int>(cliques[c].size()));
      p.subproblems.push_back(random_subproblem(rng, random_subset(rng, cliques[c], k), xbar, opts));
    }
    if (opts.redundant_rows && parent[c] >= 0 && uniform(rng, 0.0, 1.0) < 0.5) {
      // A row living only on the separator: the child cannot eliminate it.
      const auto sep = chordal::set_intersection(chordal::IndexSet(cliques[c]),
                                                 chordal::IndexSet(cliques[parent[c]]));
      model::Subproblem sp = random_subproblem(rng, sep.vec(), xbar, opts);
      if (sp.equalities.rows() == 0) {
        const Vector a = gaussian(rng, static_cast<Eigen::Index>(sep.size()));
        sp.equalities.A = a.transpose();
        sp.equalities.b = Vector::Constant(1, a.dot(model::restrict_to(sep, xbar)));
      }
      p.subproblems.push_back(std::move(sp));
    }
  }
  p.x0 = xbar;
  return p;
}

ipm::IterateState random_state(Rng& rng, const model::Decomposition& d) {
  ipm::IterateState s = ipm::initial_state(d, d.problem.x0.value_or(Vector::Zero(d.problem.n)));
  for (auto& l : s.lambda) {
    for (Eigen::Index j = 0; j < l.size(); ++j) l(j) = uniform(rng, 0.2, 2.0);
  }
  for (auto& v : s.v) {
    for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = uniform(rng, -1.0, 1.0);
  }
  s.t = uniform(rng, 0.5, 50.0);
  return s;
}

chordal::UndirectedGraph random_chordal_graph(Rng& rng, int max_vertices) {
  const int n = uniform_int(rng, 1, max_vertices);
  chordal::UndirectedGraph g(n);
  std::vector<std::vector<int>> cliques{{0}};
  for (int v = 1; v < n; ++v) {
    const auto& c = cliques[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<int>(cliques.size()) - 1))];
    std::vector<int> s = random_subset(rng, c, uniform_int(rng, 1, static_cast<int>(c.size())));
    for (int u : s) g.add_edge(u, v);
    s.push_back(v);
    cliques.push_back(std::move(s));
  }
  return g;
}

double rel_inf(const Vector& a, const Vector& b, double floor) {
  if (a.size() == 0 && b.size() == 0) return 0.0;
  return (a - b).lpNorm<Eigen::Infinity>() / std::max(b.lpNorm<Eigen::Infinity>(), floor);
}

double rel_inf(const Matrix& a, const Matrix& b, double floor) {
  if (a.size() == 0 && b.size() == 0) return 0.0;
  return (a - b).lpNorm<Eigen::Infinity>() / std::max(b.lpNorm<Eigen::Infinity>(), floor);
}

model::CoupledProblem example_problem() {
  const std::vector<std::vector<int>> js = {{0, 2}, {0, 1, 3}, {3, 4}, {2, 3}, {2, 5, 6}, {2, 7}};
  model::CoupledProblem p;
  p.n = 8;
  for (const auto& J : js) {
    model::Subproblem sp;
    sp.J = chordal::IndexSet(J);
    const auto k = static_cast<Eigen::Index>(J.size());
    sp.objective.P = Matrix::Identity(k, k);
    sp.objective.q = Vector::Zero(k);
    sp.equalities.A.resize(0, k);
    sp.equalities.b.resize(0);
    p.subproblems.push_back(std::move(sp));
  }
  return p;
}

model::CoupledProblem flow_problem(int height, std::uint64_t seed, int branching) {
  const auto tree = model::FlowTree::balanced(height, branching);
  return model::gen_flow_problem(tree, model::draw_flow_params(tree, seed));
}

std::string temp_path(const std::string& stem) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path();
  return (dir / (stem + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++)))
      .string();
}

}  // namespace dipm::testing
