#include <algorithm>
#include <random>

#include "dipm/model.hpp"

namespace dipm::model {

int FlowTree::root() const {
  int r = -1;
  for (int i = 0; i < size(); ++i) {
    if (parent[i] < 0) {
      if (r >= 0) throw InputError("flow tree has more than one root");
      r = i;
    }
  }
  if (r < 0) throw InputError("flow tree has no root");
  return r;
}

std::vector<std::vector<int>> FlowTree::children() const {
  std::vector<std::vector<int>> out(parent.size());
  for (int i = 0; i < size(); ++i) {
    if (parent[i] >= 0) out[parent[i]].push_back(i);
  }
  return out;
}

void FlowTree::validate() const {
  if (parent.empty()) throw InputError("flow tree needs at least one agent");
  for (int i = 0; i < size(); ++i) {
    if (parent[i] >= size() || parent[i] == i || parent[i] < -1) {
      throw InputError("flow tree: bad parent for agent " + std::to_string(i));
    }
  }
  const int r = root();
  // Every agent must reach the root without revisiting a node.
  for (int i = 0; i < size(); ++i) {
    int v = i;
    for (int steps = 0; v != r; ++steps) {
      if (steps > size()) throw InputError("flow tree contains a cycle");
      v = parent[v];
    }
  }
}

FlowTree FlowTree::balanced(int height, int branching) {
  if (height < 0) throw InputError("tree height must be non-negative");
  if (branching < 1) throw InputError("branching factor must be at least 1");
  long long q = 0, level = 1;
  for (int h = 0; h <= height; ++h) {
    q += level;
    level *= branching;
    if (q > 10'000'000) throw InputError("flow tree too large");
  }
  FlowTree t;
  t.parent.assign(static_cast<std::size_t>(q), -1);
  for (long long i = 1; i < q; ++i) t.parent[i] = static_cast<int>((i - 1) / branching);
  return t;
}

FlowParams draw_flow_params(const FlowTree& tree, std::uint64_t seed) {
  tree.validate();
  std::mt19937_64 rng(seed);
  auto draw = [&rng](double hi) {
    // Open interval (0, hi).
    std::uniform_real_distribution<double> dist(0.0, hi);
    double v = 0.0;
    while (v == 0.0) v = dist(rng);
    return v;
  };
  const int q = tree.size();
  FlowParams p;
  p.u.resize(q);
  p.mu.resize(q);
  p.rho.resize(q);
  p.c.resize(q);
  for (int i = 0; i < q; ++i) {
    p.u[i] = draw(20.0);
    p.mu[i] = draw(10.0);
    p.rho[i] = draw(5.0);
    p.c[i] = draw(15.0);
  }
  p.O_ref = draw(20.0);
  p.sigma = draw(50.0);
  return p;
}

CoupledProblem gen_flow_problem(const FlowTree& tree, const FlowParams& params) {
  tree.validate();
  const int q = tree.size();
  for (const auto* v : {&params.mu, &params.rho, &params.c, &params.u}) {
    if (static_cast<int>(v->size()) != q) throw InputError("flow parameters have wrong length");
  }
  for (double c : params.c) {
    if (!(c > 0.0)) throw InputError("flow capacities must be positive");
  }
  const int root = tree.root();
  const auto kids = tree.children();

  CoupledProblem p;
  p.n = 2 * q;
  p.subproblems.reserve(q);
  for (int i = 0; i < q; ++i) {
    const int d = i, f = q + i;
    std::vector<int> vars{d, f};
    for (int k : kids[i]) vars.push_back(q + k);
    Subproblem s;
    s.J = IndexSet::from_unsorted(vars);
    const int dim = s.dim();
    const int pd = s.J.position(d), pf = s.J.position(f);

    s.objective.P = Matrix::Zero(dim, dim);
    s.objective.q = Vector::Zero(dim);
    s.objective.P(pd, pd) = params.mu[i];
    if (i == root) {
      s.objective.P(pf, pf) = params.sigma;
      s.objective.q(pf) = -params.sigma * params.O_ref;
      s.objective.r = 0.5 * params.sigma * params.O_ref * params.O_ref;
    } else {
      s.objective.P(pf, pf) = 0.5 * params.rho[i];
    }
    for (int k : kids[i]) {
      const int pk = s.J.position(q + k);
      s.objective.P(pk, pk) = 0.5 * params.rho[k];
    }

    auto unit = [dim](int pos, double v) {
      Vector a = Vector::Zero(dim);
      a(pos) = v;
      return a;
    };
    s.inequalities.push_back(ConstraintFn::affine(unit(pd, 1.0), -params.c[i]));
    s.inequalities.push_back(ConstraintFn::affine(unit(pd, -1.0), -params.c[i]));
    s.inequalities.push_back(ConstraintFn::affine(unit(pf, -1.0), 0.0));

    s.equalities.A = Matrix::Zero(1, dim);
    s.equalities.b = Vector::Zero(1);
    s.equalities.A(0, pd) = 1.0;
    s.equalities.A(0, pf) = -1.0;
    if (kids[i].empty() && i != root) {
      s.equalities.b(0) = -params.u[i];
    } else {
      for (int k : kids[i]) s.equalities.A(0, s.J.position(q + k)) = 1.0;
    }
    p.subproblems.push_back(std::move(s));
  }

  Vector x0(2 * q);
  for (int i = 0; i < q; ++i) {
    x0(i) = params.c[i] / 2.0;
    x0(q + i) = 1.0;
  }
  p.x0 = std::move(x0);
  return p;
}

double flow_objective_unsplit(const FlowTree& tree, const FlowParams& params, const Vector& x) {
  const int q = tree.size();
  const int root = tree.root();
  double total = 0.0;
  for (int i = 0; i < q; ++i) {
    const double d = x(i), f = x(q + i);
    if (i == root) {
      total += 0.5 * (params.sigma * (f - params.O_ref) * (f - params.O_ref) +
                      params.mu[i] * d * d);
    } else {
      total += 0.5 * (params.mu[i] * d * d + params.rho[i] * f * f);
    }
  }
  return total;
}

}  // namespace dipm::model
