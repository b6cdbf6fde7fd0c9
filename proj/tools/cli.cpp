#include "dipm/cli.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "dipm/chordal.hpp"
#include "dipm/ipm.hpp"
#include "dipm/model.hpp"
#include "dipm/oracle.hpp"

namespace dipm::cli {

using nlohmann::json;

namespace {

struct Config {
  ipm::SolverParams params;
  std::uint64_t seed = 1;
  int height = 2;
  int branching = 2;
  std::string tree_file;
  std::string problem;
  std::string out;
  std::string dump_tree;
  std::string run_log;
  bool compare = false;
  bool threaded = false;
  std::string trace_a, trace_b;
  double tol = 1e-10;
};

void add_solver_flags(CLI::App* cmd, Config& cfg) {
  cmd->add_option("--mu", cfg.params.mu, "barrier multiplier")->capture_default_str();
  cmd->add_option("--eps", cfg.params.eps, "surrogate gap tolerance")->capture_default_str();
  cmd->add_option("--eps-feas", cfg.params.eps_feas, "residual norm tolerance")
      ->capture_default_str();
  cmd->add_option("--beta", cfg.params.beta, "backtracking factor")->capture_default_str();
  cmd->add_option("--gamma", cfg.params.gamma, "residual decrease slope")->capture_default_str();
  cmd->add_option("--max-iters", cfg.params.max_iters, "iteration limit")->capture_default_str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path);
  f << text;
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

double objective_value(const model::CoupledProblem& p, const Vector& x) {
  double f = 0.0;
  for (const auto& sp : p.subproblems) f += model::eval_subproblem(sp, model::restrict_to(sp.J, x)).f;
  return f;
}

std::string trace_path(const std::string& out, std::size_t c, std::size_t count) {
  if (count == 1) return out + ".trace.csv";
  return out + ".trace_c" + std::to_string(c) + ".csv";
}

json tree_dump(const model::CoupledProblem& p) {
  json comps = json::array();
  for (const auto& comp : model::split_components(p)) {
    const auto d = model::decompose(comp.problem, false);
    json c = chordal::to_json(d.tree);
    c["variables"] = comp.variables;
    c["subproblems"] = comp.subproblems;
    c["phi"] = d.assignment.phi;
    comps.push_back(std::move(c));
  }
  json graph = chordal::to_json(chordal::sparsity_graph(p.index_sets(), p.n));
  return {{"sparsity_graph", std::move(graph)}, {"components", std::move(comps)}};
}

int cmd_gen_flow(const Config& cfg, std::ostream& out) {
  model::FlowTree tree;
  if (!cfg.tree_file.empty()) {
    std::ifstream f(cfg.tree_file);
    if (!f) throw InputError("cannot open tree file " + cfg.tree_file);
    tree = model::load_flow_tree(json::parse(f));
  } else {
    tree = model::FlowTree::balanced(cfg.height, cfg.branching);
  }
  const auto params = model::draw_flow_params(tree, cfg.seed);
  const auto problem = model::gen_flow_problem(tree, params);
  model::write_problem_file(problem, cfg.out);
  out << json{{"agents", tree.size()}, {"variables", problem.n}, {"out", cfg.out}}.dump() << '\n';
  return kExitConverged;
}

int cmd_solve(const Config& cfg, std::ostream& out) {
  const auto problem = model::read_problem_file(cfg.problem);
  if (!cfg.dump_tree.empty()) write_text(cfg.dump_tree, tree_dump(problem).dump(2) + "\n");

  ipm::SolveOptions opts;
  opts.threaded = cfg.threaded;
  opts.log = !cfg.run_log.empty();
  const auto res = ipm::solve(problem, cfg.params, opts);

  const std::size_t nc = res.components.size();
  json comps = json::array();
  json acc = json::array();
  std::string log_lines;
  int iterations = 0;
  for (std::size_t c = 0; c < nc; ++c) {
    const auto& r = res.components[c];
    write_text(trace_path(cfg.out, c, nc), r.trace.to_csv());
    iterations = std::max(iterations, r.trace.iterations);
    comps.push_back({{"status", ipm::to_string(r.status)},
                     {"iterations", r.trace.iterations},
                     {"backtracks", r.trace.total_backtracks},
                     {"variables", res.variables[c]}});
    json a = r.accounting.to_json();
    a["formula"] = "2*L*(B+3*K)";
    acc.push_back(std::move(a));
    if (opts.log) {
      const auto audit = netsim::audit_privacy(r.log);
      acc.back()["privacy_violations"] = audit.violations.size();
      log_lines += r.log.to_json_lines();
    }
  }
  if (opts.log) write_text(cfg.run_log, log_lines);

  json sol = {{"status", ipm::to_string(res.status)},
              {"iterations", iterations},
              {"objective", objective_value(problem, res.x)},
              {"x", vec_json(res.x)},
              {"components", std::move(comps)}};
  json summary = {{"status", ipm::to_string(res.status)},
                  {"iterations", iterations},
                  {"components", nc}};

  if (cfg.compare) {
    double diff = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
      const auto& r = res.components[c];
      const auto central = oracle::centralized_ipm(
          r.decomposition, cfg.params, r.x0);
      const Vector xs = ipm::global_x(r.decomposition, r.state);
      diff = std::max(diff, (xs - central.x).lpNorm<Eigen::Infinity>());
    }
    sol["central_inf_norm_diff"] = diff;
    summary["central_inf_norm_diff"] = diff;
  }

  write_text(cfg.out + ".solution.json", sol.dump(2) + "\n");
  write_text(cfg.out + ".accounting.json",
             (nc == 1 ? acc[0] : json{{"components", acc}}).dump(2) + "\n");
  out << summary.dump() << '\n';
  return res.status == ipm::Status::converged ? kExitConverged : kExitMaxIters;
}

int cmd_solve_central(const Config& cfg, std::ostream& out) {
  auto problem = model::read_problem_file(cfg.problem);
  const Vector x0 = problem.x0.value_or(Vector::Zero(problem.n));
  Vector x = Vector::Zero(problem.n);
  const auto comps = model::split_components(problem);
  bool converged = true;
  int iterations = 0;
  for (std::size_t c = 0; c < comps.size(); ++c) {
    auto cp = comps[c].problem;
    Vector xc(cp.n);
    for (int k = 0; k < cp.n; ++k) xc(k) = x0(comps[c].variables[k]);
    if (!(ipm::feasibility_margin(cp, xc) > 0.0)) {
      cp.x0 = xc;
      xc = ipm::phase_one(cp, cfg.params);
    }
    const auto d = model::decompose(cp, true);
    const auto r = oracle::centralized_ipm(d, cfg.params, xc);
    write_text(trace_path(cfg.out, c, comps.size()), r.trace.to_csv());
    for (int k = 0; k < cp.n; ++k) x(comps[c].variables[k]) = r.x(k);
    converged = converged && r.status == ipm::Status::converged;
    iterations = std::max(iterations, r.trace.iterations);
  }
  const char* status = converged ? "converged" : "max_iters";
  write_text(cfg.out + ".solution.json",
             json{{"status", status},
                  {"iterations", iterations},
                  {"objective", objective_value(problem, x)},
                  {"x", vec_json(x)}}
                     .dump(2) +
                 "\n");
  out << json{{"status", status}, {"iterations", iterations}}.dump() << '\n';
  return converged ? kExitConverged : kExitMaxIters;
}

struct TraceTable {
  std::vector<std::vector<double>> rows;
};

TraceTable read_trace(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open trace " + path);
  TraceTable t;
  std::string line;
  std::getline(f, line);
  if (line.rfind("iter,", 0) != 0) throw InputError(path + ": not a trace file");
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != 8) throw InputError(path + ": malformed row");
    t.rows.push_back(std::move(row));
  }
  return t;
}

int cmd_compare(const Config& cfg, std::ostream& out) {
  const auto a = read_trace(cfg.trace_a);
  const auto b = read_trace(cfg.trace_b);
  static const char* names[] = {"r_primal_norm", "r_dual_norm", "eta_hat", "alpha", "t"};
  static const int cols[] = {1, 2, 3, 4, 6};
  const std::size_t common = std::min(a.rows.size(), b.rows.size());
  std::vector<double> max_dev(5, 0.0);
  out << "iter";
  for (const char* n : names) out << ',' << "d_" << n;
  out << '\n' << std::setprecision(6) << std::scientific;
  for (std::size_t r = 0; r < common; ++r) {
    out << static_cast<long>(a.rows[r][0]);
    for (int k = 0; k < 5; ++k) {
      const double x = a.rows[r][cols[k]], y = b.rows[r][cols[k]];
      const double dev = std::abs(x - y) / std::max(1.0, std::max(std::abs(x), std::abs(y)));
      max_dev[k] = std::max(max_dev[k], dev);
      out << ',' << dev;
    }
    out << '\n';
  }
  bool match = a.rows.size() == b.rows.size();
  json summary = {{"iterations_a", static_cast<long>(a.rows.size()) - 1},
                  {"iterations_b", static_cast<long>(b.rows.size()) - 1},
                  {"iteration_counts_match", match}};
  for (int k = 0; k < 5; ++k) {
    summary[std::string("max_rel_dev_") + names[k]] = max_dev[k];
    match = match && max_dev[k] <= cfg.tol;
  }
  summary["match"] = match;
  out << summary.dump() << '\n';
  return kExitConverged;
}

int cmd_dump_tree(const Config& cfg, std::ostream& out) {
  const auto problem = model::read_problem_file(cfg.problem);
  const std::string text = tree_dump(problem).dump(2) + "\n";
  if (cfg.out.empty()) {
    out << text;
  } else {
    write_text(cfg.out, text);
  }
  return kExitConverged;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::input:
      return kExitUsage;
    case ErrorKind::infeasible:
      return kExitInfeasible;
    case ErrorKind::numerical:
      return kExitNumerical;
    case ErrorKind::internal:
      return kExitInternal;
  }
  return kExitInternal;
}

void report(std::ostream& err, const std::string& kind, const std::string& message) {
  err << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Config cfg;
  CLI::App app{"Distributed primal-dual interior-point solver over clique trees", "dipm"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-flow", "generate a random flow benchmark problem");
  gen->add_option("--height", cfg.height, "tree height in edges")->capture_default_str();
  gen->add_option("--branching", cfg.branching, "children per agent")->capture_default_str();
  gen->add_option("--tree", cfg.tree_file, "JSON parent list instead of a balanced tree");
  gen->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
  gen->add_option("--out", cfg.out, "problem file to write")->required();

  auto* solve = app.add_subcommand("solve", "distributed solve over the clique tree");
  solve->add_option("problem", cfg.problem, "problem file")->required();
  solve->add_option("--out", cfg.out, "output prefix")->required();
  solve->add_option("--dump-tree", cfg.dump_tree, "write the clique tree JSON here");
  solve->add_option("--run-log", cfg.run_log, "write the network run log (JSON lines) here");
  solve->add_flag("--compare", cfg.compare, "also run the centralized solver and report the difference");
  solve->add_flag("--threaded", cfg.threaded, "run agents of one level on worker threads");
  solve->add_option("--seed", cfg.seed, "accepted for symmetry with gen-flow; unused");
  add_solver_flags(solve, cfg);

  auto* central = app.add_subcommand("solve-central", "centralized reference solve");
  central->add_option("problem", cfg.problem, "problem file")->required();
  central->add_option("--out", cfg.out, "output prefix")->required();
  add_solver_flags(central, cfg);

  auto* cmp = app.add_subcommand("compare", "compare two trace files");
  cmp->add_option("trace_a", cfg.trace_a, "first trace")->required();
  cmp->add_option("trace_b", cfg.trace_b, "second trace")->required();
  cmp->add_option("--tol", cfg.tol, "relative deviation counted as a match")->capture_default_str();

  auto* dump = app.add_subcommand("dump-tree", "print the sparsity graph and clique tree");
  dump->add_option("problem", cfg.problem, "problem file")->required();
  dump->add_option("--out", cfg.out, "write here instead of stdout");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    report(err, "usage", e.what());
    return kExitUsage;
  }

  try {
    cfg.params.validate();
    if (*gen) return cmd_gen_flow(cfg, out);
    if (*solve) return cmd_solve(cfg, out);
    if (*central) return cmd_solve_central(cfg, out);
    if (*cmp) return cmd_compare(cfg, out);
    if (*dump) return cmd_dump_tree(cfg, out);
  } catch (const Error& e) {
    report(err, to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    report(err, "input", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    report(err, "internal", e.what());
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace dipm::cli
