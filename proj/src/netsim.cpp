#include "dipm/netsim.hpp"

#include <fstream>
#include <sstream>

namespace dipm::netsim {

const char* to_string(EnvelopeKind kind) {
  switch (kind) {
    case EnvelopeKind::qp_message:
      return "qp-message";
    case EnvelopeKind::separator_solution:
      return "separator-solution";
    case EnvelopeKind::alpha_bound:
      return "alpha-bound";
    case EnvelopeKind::residual_partial:
      return "residual-partial";
    case EnvelopeKind::gap_partial:
      return "gap-partial";
    case EnvelopeKind::alpha_broadcast:
      return "alpha-broadcast";
    case EnvelopeKind::stop_broadcast:
      return "stop-broadcast";
    case EnvelopeKind::eq_constraint_push:
      return "eq-constraint-push";
  }
  return "unknown";
}

Topology Topology::from_tree(const chordal::CliqueTree& t) {
  if (!t.rooted()) throw InputError("network topology requires a rooted clique tree");
  Topology topo;
  topo.parent = t.parent;
  topo.children = t.children;
  topo.levels = t.levels();
  topo.height = t.height;
  return topo;
}

std::string RunLog::to_json_lines() const {
  std::ostringstream os;
  for (const auto& r : records_) os << r.dump() << '\n';
  return os.str();
}

void RunLog::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write run log " + path);
  out << to_json_lines();
}

PrivacyReport audit_privacy(const RunLog& log) {
  PrivacyReport rep;
  for (const auto& r : log.records()) {
    if (r.value("type", "") != "activation") continue;
    ++rep.activations;
    const int agent = r.at("agent").get<int>();
    for (const auto& a : r.at("accesses")) {
      ++rep.accesses;
      const int owner = a.at("owner").get<int>();
      if (owner == agent || owner == kEnvelopeOwner) continue;
      rep.violations.push_back(
          {r.at("pass").get<long>(), agent, owner, a.at("field").get<std::string>()});
    }
  }
  return rep;
}

nlohmann::json StepAccounting::to_json() const {
  return {{"mp_steps", mp_steps},
          {"mp_steps_levels", mp_steps_levels},
          {"L_edges", L},
          {"L_levels", L + 1},
          {"K", K},
          {"B", B},
          {"factorizations", factorizations},
          {"comm_rounds", comm_rounds},
          {"envelopes", envelopes},
          {"degree", degree}};
}

StepAccounting accounting(const Counters& c, const Topology& topo, int K, long B) {
  StepAccounting acc;
  acc.mp_steps = c.mp_steps;
  acc.mp_steps_levels = c.mp_steps_levels;
  acc.L = topo.height;
  acc.K = K;
  acc.B = B;
  acc.factorizations = c.factorizations;
  acc.comm_rounds = c.comm_rounds;
  const int q = topo.size();
  acc.envelopes.resize(q);
  acc.degree.resize(q);
  for (int i = 0; i < q; ++i) {
    acc.envelopes[i] = c.envelopes_sent[i] + c.envelopes_received[i];
    acc.degree[i] = topo.degree(i);
  }

  auto bug = [](const std::string& what) {
    throw InternalError("scheduling bug: " + what);
  };
  const long rounds = 2 * (B + 3L * K);
  if (c.counted_passes != rounds) {
    bug("counted passes " + std::to_string(c.counted_passes) + " != 2(B+3K) = " +
        std::to_string(rounds));
  }
  if (c.mp_steps != step_formula(topo.height, K, B)) bug("mp_steps != 2L(B+3K)");
  if (c.mp_steps_levels != step_formula(topo.height + 1, K, B)) {
    bug("level-convention steps != 2(L+1)(B+3K)");
  }
  for (int i = 0; i < q; ++i) {
    if (c.factorizations[i] != K) {
      bug("agent " + std::to_string(i) + " factorized " + std::to_string(c.factorizations[i]) +
          " times, expected K = " + std::to_string(K));
    }
    if (c.comm_rounds[i] != rounds) bug("agent " + std::to_string(i) + " round count");
    if (acc.envelopes[i] != rounds * acc.degree[i]) {
      bug("agent " + std::to_string(i) + " envelope count " + std::to_string(acc.envelopes[i]) +
          " != 2(B+3K)deg = " + std::to_string(rounds * acc.degree[i]));
    }
  }
  return acc;
}

}  // namespace dipm::netsim
