#include "dipm/ipm.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

namespace dipm::ipm {

using model::Subproblem;
using netsim::EnvelopeKind;
using netsim::ScalarBundle;

void SolverParams::validate() const {
  if (!(mu > 1.0)) throw InputError("mu must be greater than 1");
  if (!(eps > 0.0)) throw InputError("eps must be positive");
  if (!(eps_feas > 0.0)) throw InputError("eps-feas must be positive");
  if (!(beta > 0.0 && beta < 1.0)) throw InputError("beta must lie in (0, 1)");
  if (!(gamma >= 0.01 && gamma <= 0.1)) throw InputError("gamma must lie in [0.01, 0.1]");
  if (max_iters < 0) throw InputError("max-iters must be non-negative");
  if (!(step_init_factor > 0.0 && step_init_factor <= 1.0)) {
    throw InputError("step init factor must lie in (0, 1]");
  }
  if (!(min_step > 0.0)) throw InputError("minimum step must be positive");
  if (!(residual_floor >= 0.0)) throw InputError("residual floor must be non-negative");
}

const char* to_string(Status s) {
  return s == Status::converged ? "converged" : "max_iters";
}

std::string ConvergenceTrace::to_csv() const {
  std::ostringstream os;
  os << "iter,r_primal_norm,r_dual_norm,eta_hat,alpha,backtracks,t,mp_steps_cum\n";
  os << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.iter << ',' << r.r_primal_norm << ',' << r.r_dual_norm << ',' << r.eta_hat << ','
       << r.alpha << ',' << r.backtracks << ',' << r.t << ',' << r.mp_steps_cum << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Agent-local arithmetic

namespace {

struct Agent {
  int clique = -1;
  IndexSet C;
  IndexSet sep;  // separator towards the parent
  std::map<int, IndexSet> child_sep;
  std::vector<int> sub_ids;
  std::vector<Subproblem> subs;
  std::vector<std::vector<int>> sub_pos;  // positions of each J inside C
  model::EqualityBlock eq;
  int m = 0;

  Vector x, v;
  std::vector<Vector> lambda;
  double t = 1.0;

  treeqp::EliminationRecord rec;
  Vector dx, dv;
  std::vector<Vector> dlambda;

  double alpha = 0.0;  // current candidate step
  Vector x_new, v_new;
  std::vector<Vector> lambda_new;

  // Root bookkeeping.
  int m_total = 0;
  double p2 = 0.0, d2 = 0.0, gap = 0.0;
  bool accepted = false;
  bool stop = false;
  double alpha_accepted = 0.0;
  double t_next = 1.0;
};

Vector take(const Vector& v, const std::vector<int>& pos) {
  Vector out(static_cast<Eigen::Index>(pos.size()));
  for (std::size_t k = 0; k < pos.size(); ++k) out(k) = v(pos[k]);
  return out;
}

Agent make_agent(const Decomposition& d, int i) {
  const auto& t = d.tree;
  Agent a;
  a.clique = i;
  a.C = t.cliques[i];
  a.sep = t.parent_separator(i);
  for (int k : t.children[i]) a.child_sep[k] = t.separator(i, k);
  a.sub_ids = d.assignment.phi[i];
  for (int s : a.sub_ids) {
    a.subs.push_back(d.problem.subproblems[s]);
    a.sub_pos.push_back(a.C.positions_of(d.problem.subproblems[s].J));
    a.m += d.problem.subproblems[s].m();
  }
  a.eq = d.assignment.local_eq[i];
  return a;
}

void load_iterate(Agent& a, const IterateState& s) {
  a.x = s.x[a.clique];
  a.v = s.v[a.clique];
  a.lambda.clear();
  for (int id : a.sub_ids) a.lambda.push_back(s.lambda[id]);
  a.t = s.t;
}

std::string agent_tag(const Agent& a) { return "clique " + std::to_string(a.clique); }

treeqp::CliqueQpData qp_data(const Agent& a) {
  const Eigen::Index w = static_cast<Eigen::Index>(a.C.size());
  treeqp::CliqueQpData d;
  d.H = Matrix::Zero(w, w);
  d.r = Vector::Zero(w);
  for (std::size_t k = 0; k < a.subs.size(); ++k) {
    const Subproblem& sp = a.subs[k];
    const auto& pos = a.sub_pos[k];
    const Vector xJ = take(a.x, pos);
    const auto e = model::eval_subproblem(sp, xJ);
    const Vector& lam = a.lambda[k];
    Matrix Hk = e.hess;
    Vector rk = e.grad;
    for (int j = 0; j < sp.m(); ++j) {
      const double g = e.g(j);
      if (!(g < 0.0)) {
        throw NumericalError("iterate left interior at " + agent_tag(a) + ", subproblem " +
                             std::to_string(a.sub_ids[k]));
      }
      const Vector grad = e.Dg.row(j).transpose();
      Hk += lam(j) * e.g_hess[j] - (lam(j) / g) * grad * grad.transpose();
      const double r_cent = -lam(j) * g - 1.0 / a.t;
      rk += lam(j) * grad + (r_cent / g) * grad;
    }
    for (std::size_t p = 0; p < pos.size(); ++p) {
      d.r(pos[p]) += rk(static_cast<Eigen::Index>(p));
      for (std::size_t q = 0; q < pos.size(); ++q) {
        d.H(pos[p], pos[q]) += Hk(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
      }
    }
  }
  d.A = a.eq.A;
  if (a.eq.rows() > 0) {
    d.r += a.eq.A.transpose() * a.v;
    d.beta = a.eq.b - a.eq.A * a.x;
  } else {
    d.A.resize(0, w);
    d.beta.resize(0);
  }
  return d;
}

void set_dual_steps(Agent& a) {
  a.dlambda.clear();
  for (std::size_t k = 0; k < a.subs.size(); ++k) {
    const auto& pos = a.sub_pos[k];
    a.dlambda.push_back(dual_step(a.subs[k], take(a.x, pos), a.lambda[k], take(a.dx, pos), a.t));
  }
}

/// Local pieces of the feasibility / residual / gap evaluation at a point.
struct LocalEval {
  bool feasible = true;
  double p2 = 0.0;
  Vector dual;  // clique-ordered contribution to ∇f + Dgᵀλ + Aᵀv
  double gap = 0.0;
};

LocalEval evaluate(const Agent& a, const Vector& x, const Vector& v,
                   const std::vector<Vector>& lambda) {
  LocalEval ev;
  ev.dual = Vector::Zero(static_cast<Eigen::Index>(a.C.size()));
  for (std::size_t k = 0; k < a.subs.size(); ++k) {
    const auto& pos = a.sub_pos[k];
    const auto e = model::eval_subproblem(a.subs[k], take(x, pos));
    const Vector& lam = lambda[k];
    for (int j = 0; j < a.subs[k].m(); ++j) {
      if (!(e.g(j) < 0.0) || !(lam(j) > 0.0)) ev.feasible = false;
    }
    const Vector contrib = e.grad + e.Dg.transpose() * lam;
    for (std::size_t p = 0; p < pos.size(); ++p) ev.dual(pos[p]) += contrib(static_cast<Eigen::Index>(p));
    ev.gap -= lam.dot(e.g);
  }
  if (a.eq.rows() > 0) {
    ev.p2 = (a.eq.A * x - a.eq.b).squaredNorm();
    ev.dual += a.eq.A.transpose() * v;
  }
  return ev;
}

/// Folds child partials into `ev`, returning the completed squared dual norm
/// of the clique's own variables and the separator vector for the parent.
struct Folded {
  bool feasible;
  double p2, d2, gap;
  Vector sep_vec;
};

template <class Ctx>
Folded fold_children(Ctx& ctx, const Agent& a, LocalEval ev, EnvelopeKind kind) {
  Folded f{ev.feasible, ev.p2, 0.0, ev.gap, Vector()};
  double d2_children = 0.0;
  for (int k : ctx.children()) {
    const auto& b = std::get<ScalarBundle>(ctx.receive(k, kind).payload);
    f.feasible = f.feasible && b.flag;
    f.p2 += b.values[0];
    d2_children += b.values[1];
    f.gap += b.values[2];
    const auto pos = a.C.positions_of(a.child_sep.at(k));
    for (std::size_t p = 0; p < pos.size(); ++p) ev.dual(pos[p]) += b.vec(static_cast<Eigen::Index>(p));
  }
  double own = 0.0;
  std::vector<int> sep_pos;
  for (std::size_t p = 0; p < a.C.size(); ++p) {
    if (a.sep.contains(a.C[p])) {
      sep_pos.push_back(static_cast<int>(p));
    } else {
      own += ev.dual(static_cast<Eigen::Index>(p)) * ev.dual(static_cast<Eigen::Index>(p));
    }
  }
  f.d2 = own + d2_children;
  f.sep_vec = take(ev.dual, sep_pos);
  return f;
}

bool stop_test(double p2, double d2, double gap, const SolverParams& params) {
  return std::sqrt(p2) <= params.eps_feas && std::sqrt(d2) <= params.eps_feas &&
         gap <= params.eps;
}

double next_t(int m_total, double gap, double t_old, const SolverParams& params) {
  if (m_total == 0) return t_old;
  if (!(gap > 0.0)) throw NumericalError("surrogate duality gap is not positive");
  return params.mu * m_total / gap;
}

}  // namespace

Vector dual_step(const Subproblem& sp, const Vector& xJ, const Vector& lambda, const Vector& dxJ,
                 double t) {
  const int m = sp.m();
  Vector out(m);
  const auto e = model::eval_subproblem(sp, xJ);
  const Vector Ddx = e.Dg * dxJ;
  for (int j = 0; j < m; ++j) {
    const double r_cent = -lambda(j) * e.g(j) - 1.0 / t;
    out(j) = -(lambda(j) * Ddx(j) - r_cent) / e.g(j);
  }
  return out;
}

IterateState initial_state(const Decomposition& d, const Vector& x0, double lambda0, double v0) {
  if (x0.size() != d.problem.n) throw InputError("x0 has wrong length");
  IterateState s;
  for (int i = 0; i < d.tree.size(); ++i) {
    s.x.push_back(model::restrict_to(d.tree.cliques[i], x0));
    s.v.push_back(Vector::Constant(d.assignment.local_eq[i].rows(), v0));
  }
  for (const auto& sp : d.problem.subproblems) s.lambda.push_back(Vector::Constant(sp.m(), lambda0));
  return s;
}

Vector global_x(const Decomposition& d, const IterateState& s) {
  Vector x = Vector::Zero(d.problem.n);
  std::vector<bool> set(d.problem.n, false);
  for (int i = 0; i < d.tree.size(); ++i) {
    const IndexSet& C = d.tree.cliques[i];
    for (std::size_t k = 0; k < C.size(); ++k) {
      if (!set[C[k]]) {
        x(C[k]) = s.x[i](static_cast<Eigen::Index>(k));
        set[C[k]] = true;
      }
    }
  }
  return x;
}

treeqp::CliqueQpData local_qp_data(const Decomposition& d, const IterateState& s, int clique) {
  Agent a = make_agent(d, clique);
  load_iterate(a, s);
  return qp_data(a);
}

DirectionResult compute_directions(const Decomposition& d, const IterateState& s) {
  DirectionResult out;
  const int q = d.tree.size();
  std::vector<Agent> agents;
  for (int i = 0; i < q; ++i) {
    agents.push_back(make_agent(d, i));
    load_iterate(agents.back(), s);
    out.data.push_back(qp_data(agents.back()));
  }
  auto up = treeqp::upward_pass(d.tree, out.data);
  auto sol = treeqp::downward_pass(d.tree, up.records);
  out.dirs.dx.resize(q);
  out.dirs.dv.resize(q);
  out.dirs.dlambda.resize(d.problem.size());
  for (int i = 0; i < q; ++i) {
    agents[i].dx = sol[i].dx;
    set_dual_steps(agents[i]);
    out.dirs.dx[i] = std::move(sol[i].dx);
    out.dirs.dv[i] = std::move(sol[i].dv);
    for (std::size_t k = 0; k < agents[i].sub_ids.size(); ++k) {
      out.dirs.dlambda[agents[i].sub_ids[k]] = agents[i].dlambda[k];
    }
  }
  out.records = std::move(up.records);
  out.messages = std::move(up.messages);
  return out;
}

// ---------------------------------------------------------------------------
// Network solver

namespace {

using Net = netsim::Network<Agent>;
using Ctx = netsim::AgentContext<Agent>;

IterateState snapshot(const Net& net, const Decomposition& d) {
  IterateState s;
  s.lambda.resize(d.problem.size());
  for (const Agent& a : net.agents()) {
    s.x.push_back(a.x);
    s.v.push_back(a.v);
    for (std::size_t k = 0; k < a.sub_ids.size(); ++k) s.lambda[a.sub_ids[k]] = a.lambda[k];
    s.t = a.t;
  }
  return s;
}

Directions snapshot_directions(const Net& net, const Decomposition& d) {
  Directions dirs;
  dirs.dlambda.resize(d.problem.size());
  for (const Agent& a : net.agents()) {
    dirs.dx.push_back(a.dx);
    dirs.dv.push_back(a.dv);
    for (std::size_t k = 0; k < a.sub_ids.size(); ++k) dirs.dlambda[a.sub_ids[k]] = a.dlambda[k];
  }
  return dirs;
}

}  // namespace

ComponentResult solve_component(const Decomposition& d, const SolverParams& params,
                                const Vector& x0, const SolveOptions& opts) {
  params.validate();
  if (x0.size() != d.problem.n) throw InputError("x0 has wrong length");
  const int q = d.tree.size();
  const int root = d.tree.root;

  std::vector<Agent> agents;
  agents.reserve(q);
  for (int i = 0; i < q; ++i) {
    agents.push_back(make_agent(d, i));
    agents.back().x = model::restrict_to(d.tree.cliques[i], x0);
  }
  Net net(netsim::Topology::from_tree(d.tree), std::move(agents),
          {opts.threaded, opts.log});

  // Equality preprocessing: rank-deficient rows travel towards the root.
  net.run_pass(
      netsim::Direction::up,
      [](Ctx& ctx) {
        Agent& a = ctx.own("equalities");
        std::vector<std::pair<IndexSet, model::EqualityBlock>> from_children;
        for (int k : ctx.children()) {
          from_children.emplace_back(
              a.child_sep.at(k),
              std::get<model::EqualityBlock>(ctx.receive(k, EnvelopeKind::eq_constraint_push).payload));
        }
        auto step = model::preprocess_clique(a.C, a.sep, a.eq, from_children, ctx.parent() < 0);
        a.eq = std::move(step.retained);
        if (ctx.parent() >= 0) {
          ctx.send(ctx.parent(), EnvelopeKind::eq_constraint_push, std::move(step.pushed));
        }
      },
      false, "preprocess");

  // Initial duals, residuals, gap and barrier parameter.
  net.run_pass(
      netsim::Direction::up,
      [&params](Ctx& ctx) {
        Agent& a = ctx.own("iterate");
        a.v = Vector::Ones(a.eq.rows());
        a.lambda.clear();
        for (const auto& sp : a.subs) a.lambda.push_back(Vector::Ones(sp.m()));
        LocalEval ev = evaluate(a, a.x, a.v, a.lambda);
        if (!ev.feasible) {
          throw InputError("starting point is not strictly feasible at clique " +
                           std::to_string(a.clique));
        }
        int m = a.m;
        for (int k : ctx.children()) {
          m += static_cast<int>(
              std::get<ScalarBundle>(ctx.receive(k, EnvelopeKind::gap_partial).payload).values[3]);
        }
        Folded f = fold_children(ctx, a, ev, EnvelopeKind::gap_partial);
        if (ctx.parent() >= 0) {
          ctx.send(ctx.parent(), EnvelopeKind::gap_partial,
                   ScalarBundle{{f.p2, f.d2, f.gap, static_cast<double>(m)}, f.sep_vec, f.feasible});
        } else {
          a.m_total = m;
          a.p2 = f.p2;
          a.d2 = f.d2;
          a.gap = f.gap;
          a.stop = stop_test(f.p2, f.d2, f.gap, params);
          a.t_next = m > 0 ? next_t(m, f.gap, 1.0, params) : 1.0;
        }
      },
      false, "setup");
  net.run_pass(
      netsim::Direction::down,
      [](Ctx& ctx) {
        Agent& a = ctx.own("iterate");
        if (ctx.parent() >= 0) {
          const auto& b = std::get<ScalarBundle>(ctx.receive(ctx.parent(), EnvelopeKind::stop_broadcast).payload);
          a.t_next = b.values[0];
          a.stop = b.flag;
        }
        a.t = a.t_next;
        for (int k : ctx.children()) {
          ctx.send(k, EnvelopeKind::stop_broadcast, ScalarBundle{{a.t_next}, Vector(), a.stop});
        }
      },
      false, "setup");

  ComponentResult res;
  res.x0 = x0;
  {
    const Agent& r = net.agents()[root];
    res.trace.rows.push_back({0, std::sqrt(r.p2), std::sqrt(r.d2), r.gap, 0.0, 0, r.t, 0});
  }

  int K = 0;
  long B = 0;
  while (!net.agents()[root].stop && K < params.max_iters) {
    IterateState before;
    if (opts.observer) before = snapshot(net, d);

    // Directions: parametric elimination up, separator solutions down.
    net.run_pass(
        netsim::Direction::up,
        [](Ctx& ctx) {
          Agent& a = ctx.own("iterate");
          const auto data = qp_data(a);
          std::vector<treeqp::QuadraticMessage> msgs;
          for (int k : ctx.children()) {
            msgs.push_back(std::get<treeqp::QuadraticMessage>(
                ctx.receive(k, EnvelopeKind::qp_message).payload));
          }
          auto e = treeqp::eliminate(a.clique, a.C, data, msgs, a.sep);
          ctx.count_factorization();
          a.rec = std::move(e.record);
          if (ctx.parent() >= 0) {
            ctx.send(ctx.parent(), EnvelopeKind::qp_message, std::move(e.message));
          }
        },
        true, "directions");
    net.run_pass(
        netsim::Direction::down,
        [](Ctx& ctx) {
          Agent& a = ctx.own("iterate");
          Vector y(0);
          if (ctx.parent() >= 0) {
            y = std::get<Vector>(ctx.receive(ctx.parent(), EnvelopeKind::separator_solution).payload);
          }
          auto sol = treeqp::recover(a.rec, y);
          a.dx = std::move(sol.dx);
          a.dv = std::move(sol.dv);
          set_dual_steps(a);
          for (int k : ctx.children()) {
            ctx.send(k, EnvelopeKind::separator_solution, treeqp::gather(a.C, a.dx, a.child_sep.at(k)));
          }
        },
        true, "directions");

    // Stage 1: the largest step keeping λ positive.
    net.run_pass(
        netsim::Direction::up,
        [&params](Ctx& ctx) {
          Agent& a = ctx.own("iterate");
          double ratio = std::numeric_limits<double>::infinity();
          for (std::size_t k = 0; k < a.lambda.size(); ++k) {
            for (Eigen::Index j = 0; j < a.lambda[k].size(); ++j) {
              if (a.dlambda[k](j) < 0.0) ratio = std::min(ratio, -a.lambda[k](j) / a.dlambda[k](j));
            }
          }
          for (int k : ctx.children()) {
            ratio = std::min(ratio, std::get<ScalarBundle>(
                                        ctx.receive(k, EnvelopeKind::alpha_bound).payload).values[0]);
          }
          if (ctx.parent() >= 0) {
            ctx.send(ctx.parent(), EnvelopeKind::alpha_bound, ScalarBundle{{ratio}, Vector(), false});
          } else {
            a.alpha = std::isfinite(ratio) ? std::min(1.0, params.step_init_factor * ratio) : 1.0;
          }
        },
        true, "step-bound");
    net.run_pass(
        netsim::Direction::down,
        [](Ctx& ctx) {
          Agent& a = ctx.own("iterate");
          if (ctx.parent() >= 0) {
            a.alpha = std::get<ScalarBundle>(
                ctx.receive(ctx.parent(), EnvelopeKind::alpha_broadcast).payload).values[0];
          }
          for (int k : ctx.children()) {
            ctx.send(k, EnvelopeKind::alpha_broadcast, ScalarBundle{{a.alpha}, Vector(), false});
          }
        },
        true, "step-bound");

    // Stage 2: trial points until the root accepts one.
    long b = 0;
    for (;;) {
      net.run_pass(
          netsim::Direction::up,
          [&params](Ctx& ctx) {
            Agent& a = ctx.own("iterate");
            a.x_new = a.x + a.alpha * a.dx;
            a.v_new = a.v + a.alpha * a.dv;
            a.lambda_new.clear();
            for (std::size_t k = 0; k < a.lambda.size(); ++k) {
              a.lambda_new.push_back(a.lambda[k] + a.alpha * a.dlambda[k]);
            }
            LocalEval ev = evaluate(a, a.x_new, a.v_new, a.lambda_new);
            Folded f = fold_children(ctx, a, std::move(ev), EnvelopeKind::residual_partial);
            if (ctx.parent() >= 0) {
              ctx.send(ctx.parent(), EnvelopeKind::residual_partial,
                       ScalarBundle{{f.p2, f.d2, f.gap}, f.sep_vec, f.feasible});
              return;
            }
            a.accepted =
                f.feasible && params.residual_decrease_ok(a.alpha, a.p2 + a.d2, f.p2 + f.d2);
            if (a.accepted) {
              a.alpha_accepted = a.alpha;
              a.p2 = f.p2;
              a.d2 = f.d2;
              a.gap = f.gap;
              a.stop = stop_test(f.p2, f.d2, f.gap, params);
              a.t_next = next_t(a.m_total, f.gap, a.t, params);
            } else {
              a.alpha *= params.beta;
              if (a.alpha < params.min_step) {
                throw NumericalError("line search failed: step fell below the minimum");
              }
            }
          },
          true, "trial");
      net.run_pass(
          netsim::Direction::down,
          [](Ctx& ctx) {
            Agent& a = ctx.own("iterate");
            if (ctx.parent() >= 0) {
              const auto& env = ctx.inbox().at(0);
              const auto& bundle = std::get<ScalarBundle>(env.payload);
              a.accepted = env.kind == EnvelopeKind::stop_broadcast;
              if (a.accepted) {
                a.alpha_accepted = bundle.values[0];
                a.t_next = bundle.values[1];
                a.stop = bundle.flag;
              } else {
                a.alpha = bundle.values[0];
              }
            }
            if (a.accepted) {
              a.x = a.x_new;
              a.v = a.v_new;
              a.lambda = a.lambda_new;
              a.t = a.t_next;
            }
            for (int k : ctx.children()) {
              if (a.accepted) {
                ctx.send(k, EnvelopeKind::stop_broadcast,
                         ScalarBundle{{a.alpha_accepted, a.t_next}, Vector(), a.stop});
              } else {
                ctx.send(k, EnvelopeKind::alpha_broadcast, ScalarBundle{{a.alpha}, Vector(), false});
              }
            }
          },
          true, "trial");
      if (net.agents()[root].accepted) break;
      ++b;
    }
    ++K;
    B += b;
    const Agent& r = net.agents()[root];
    if (opts.observer) opts.observer(before, snapshot_directions(net, d), r.alpha_accepted);
    res.trace.rows.push_back({K, std::sqrt(r.p2), std::sqrt(r.d2), r.gap, r.alpha_accepted, b,
                              r.t, net.counters().mp_steps});
  }

  res.trace.iterations = K;
  res.trace.total_backtracks = B;
  res.status = net.agents()[root].stop ? Status::converged : Status::max_iters;
  res.accounting = netsim::accounting(net.counters(), net.topology(), K, B);
  res.state = snapshot(net, d);
  res.state.iter = K;
  res.decomposition = d;
  for (int i = 0; i < q; ++i) res.decomposition.assignment.local_eq[i] = net.agents()[i].eq;
  if (opts.log) res.log = net.log();
  return res;
}

double feasibility_margin(const model::CoupledProblem& p, const Vector& x) {
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& sp : p.subproblems) {
    const Vector xJ = model::restrict_to(sp.J, x);
    for (const auto& g : sp.inequalities) margin = std::min(margin, -g.value(xJ));
  }
  return margin;
}

SolveResult solve(const model::CoupledProblem& p, const SolverParams& params,
                  const SolveOptions& opts) {
  p.validate();
  params.validate();
  Vector x0 = opts.x0 ? *opts.x0 : (p.x0 ? *p.x0 : Vector::Zero(p.n));
  if (x0.size() != p.n) throw InputError("x0 has wrong length");

  SolveResult out;
  out.x = Vector::Zero(p.n);
  for (auto& comp : model::split_components(p)) {
    Vector xc(comp.problem.n);
    for (int k = 0; k < comp.problem.n; ++k) xc(k) = x0(comp.variables[k]);
    if (!(feasibility_margin(comp.problem, xc) > 0.0)) {
      if (!opts.phase_one) throw InputError("starting point is not strictly feasible");
      comp.problem.x0 = xc;
      xc = phase_one(comp.problem, params, opts.eps_slack);
    }
    auto d = model::decompose(comp.problem, false);
    auto r = solve_component(d, params, xc, opts);
    const Vector xs = global_x(r.decomposition, r.state);
    for (int k = 0; k < comp.problem.n; ++k) out.x(comp.variables[k]) = xs(k);
    if (r.status != Status::converged) out.status = r.status;
    out.components.push_back(std::move(r));
    out.variables.push_back(std::move(comp.variables));
  }
  return out;
}

}  // namespace dipm::ipm
