#include <fstream>
#include <sstream>

#include "dipm/model.hpp"

namespace dipm::model {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw InputError(path + ": " + what);
}

const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) fail(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(path + "/" + key, "missing");
  return *it;
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

Vector vector_of(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) {
    out(k) = number(v[k], path + "/" + std::to_string(k));
  }
  return out;
}

Matrix matrix_of(const json& v, const std::string& path, Eigen::Index cols_if_empty) {
  if (!v.is_array()) fail(path, "expected an array of rows");
  if (v.empty()) return Matrix(0, cols_if_empty);
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  Matrix out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < v.size(); ++r) {
    const std::string rp = path + "/" + std::to_string(r);
    if (!v[r].is_array() || v[r].size() != cols) fail(rp, "rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c) {
      out(r, c) = number(v[r][c], rp + "/" + std::to_string(c));
    }
  }
  return out;
}

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

json save_problem(const CoupledProblem& p) {
  json subs = json::array();
  for (const auto& s : p.subproblems) {
    json ineqs = json::array();
    for (const auto& g : s.inequalities) {
      if (g.kind == ConstraintKind::affine) {
        ineqs.push_back({{"kind", "affine"}, {"a", to_json(g.a)}, {"b", g.b}});
      } else {
        ineqs.push_back(
            {{"kind", "quadratic"}, {"Q", to_json(g.Q)}, {"a", to_json(g.a)}, {"b", g.b}});
      }
    }
    subs.push_back({
        {"J", s.J.vec()},
        {"objective",
         {{"P", to_json(s.objective.P)}, {"q", to_json(s.objective.q)}, {"r", s.objective.r}}},
        {"inequalities", std::move(ineqs)},
        {"equalities", {{"A", to_json(s.equalities.A)}, {"b", to_json(s.equalities.b)}}},
    });
  }
  json doc = {{"n", p.n}, {"subproblems", std::move(subs)}};
  if (p.x0) doc["x0"] = to_json(*p.x0);
  return doc;
}

CoupledProblem load_problem(const json& doc) {
  CoupledProblem p;
  const json& n = field(doc, "n", "");
  if (!n.is_number_integer() || n.get<long long>() < 0) fail("/n", "expected a non-negative integer");
  p.n = n.get<int>();
  const json& subs = field(doc, "subproblems", "");
  if (!subs.is_array()) fail("/subproblems", "expected an array");
  for (std::size_t k = 0; k < subs.size(); ++k) {
    const std::string sp = "/subproblems/" + std::to_string(k);
    const json& s = subs[k];
    Subproblem out;
    const json& J = field(s, "J", sp);
    if (!J.is_array()) fail(sp + "/J", "expected an array");
    std::vector<int> idx;
    for (std::size_t e = 0; e < J.size(); ++e) {
      if (!J[e].is_number_integer()) fail(sp + "/J/" + std::to_string(e), "expected an integer");
      idx.push_back(J[e].get<int>());
    }
    try {
      out.J = IndexSet(std::move(idx));
    } catch (const InputError& e) {
      fail(sp + "/J", e.what());
    }
    const Eigen::Index d = out.dim();

    const json& obj = field(s, "objective", sp);
    out.objective.P = matrix_of(field(obj, "P", sp + "/objective"), sp + "/objective/P", d);
    out.objective.q = vector_of(field(obj, "q", sp + "/objective"), sp + "/objective/q");
    out.objective.r = obj.contains("r") ? number(obj["r"], sp + "/objective/r") : 0.0;

    if (s.contains("inequalities")) {
      const json& ineqs = s["inequalities"];
      if (!ineqs.is_array()) fail(sp + "/inequalities", "expected an array");
      for (std::size_t j = 0; j < ineqs.size(); ++j) {
        const std::string gp = sp + "/inequalities/" + std::to_string(j);
        const json& g = ineqs[j];
        const json& kind = field(g, "kind", gp);
        Vector a = vector_of(field(g, "a", gp), gp + "/a");
        const double b = number(field(g, "b", gp), gp + "/b");
        if (kind == "affine") {
          out.inequalities.push_back(ConstraintFn::affine(std::move(a), b));
        } else if (kind == "quadratic") {
          Matrix Q = matrix_of(field(g, "Q", gp), gp + "/Q", d);
          out.inequalities.push_back(ConstraintFn::quadratic(std::move(Q), std::move(a), b));
        } else {
          fail(gp + "/kind", "expected \"affine\" or \"quadratic\"");
        }
      }
    }
    if (s.contains("equalities")) {
      const json& eq = s["equalities"];
      out.equalities.A = matrix_of(field(eq, "A", sp + "/equalities"), sp + "/equalities/A", d);
      out.equalities.b = vector_of(field(eq, "b", sp + "/equalities"), sp + "/equalities/b");
      if (out.equalities.A.rows() == 0) out.equalities.A.resize(0, d);
    } else {
      out.equalities.A.resize(0, d);
      out.equalities.b.resize(0);
    }
    p.subproblems.push_back(std::move(out));
  }
  if (doc.contains("x0")) p.x0 = vector_of(doc["x0"], "/x0");

  // Re-raise validation failures with the subproblem's pointer when possible.
  try {
    p.validate();
  } catch (const InputError& e) {
    const std::string msg = e.what();
    const std::string key = "subproblem ";
    if (msg.rfind(key, 0) == 0) {
      const std::size_t end = msg.find_first_of(",:", key.size());
      fail("/subproblems/" + msg.substr(key.size(), end - key.size()), msg);
    }
    fail("", msg);
  }
  return p;
}

CoupledProblem read_problem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open problem file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
  return load_problem(doc);
}

void write_problem_file(const CoupledProblem& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << save_problem(p).dump() << '\n';
}

FlowTree load_flow_tree(const json& doc) {
  const json& parents = doc.is_array() ? doc : field(doc, "parent", "");
  if (!parents.is_array()) fail("/parent", "expected an array");
  FlowTree t;
  for (std::size_t k = 0; k < parents.size(); ++k) {
    if (!parents[k].is_number_integer()) {
      fail("/parent/" + std::to_string(k), "expected an integer");
    }
    t.parent.push_back(parents[k].get<int>());
  }
  t.validate();
  return t;
}

}  // namespace dipm::model
