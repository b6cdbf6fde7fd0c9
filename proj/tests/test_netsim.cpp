#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>

#include "dipm/chordal.hpp"
#include "dipm/netsim.hpp"
#include "support.hpp"

using namespace dipm;
using namespace dipm::netsim;
using chordal::IndexSet;

namespace {

struct Agent {
  int fired_at = -1;
  double value = 0.0;
};

const std::vector<IndexSet> kExampleCliques = {{0, 1, 3}, {0, 2, 3}, {3, 4}, {2, 5, 6}, {2, 7}};

Topology example_topology() {
  return Topology::from_tree(chordal::root_at(chordal::mwst_clique_tree(kExampleCliques), 0));
}

Topology path_topology(int cliques) {
  std::vector<IndexSet> cl;
  for (int k = 0; k < cliques; ++k) cl.push_back(IndexSet{k, k + 1});
  return Topology::from_tree(chordal::root_min_height(chordal::mwst_clique_tree(cl)));
}

Topology flow_topology(int height) {
  const auto p = testing::flow_problem(height, 1);
  return Topology::from_tree(model::decompose(p).tree);
}

// Every agent sends one envelope to each neighbour that fires after it.
void exchange(AgentContext<Agent>& ctx, Direction dir) {
  for (const auto& e : ctx.inbox()) ctx.own("value").value += std::get<Vector>(e.payload)(0);
  const Vector one = Vector::Constant(1, 1.0);
  if (dir == Direction::up) {
    if (ctx.parent() >= 0) ctx.send(ctx.parent(), EnvelopeKind::qp_message, one);
  } else {
    for (int c : ctx.children()) ctx.send(c, EnvelopeKind::separator_solution, one);
  }
}

// The schedule of K iterations with B extra backtracking round trips: three
// round trips per iteration plus one per backtrack, one factorization per
// agent per iteration.
Counters synthetic_run(const Topology& topo, int K, int B) {
  Network<Agent> net(topo, std::vector<Agent>(static_cast<std::size_t>(topo.size())));
  for (int k = 0; k < K; ++k) {
    const int trips = 3 + (k == 0 ? B : 0);
    for (int r = 0; r < trips; ++r) {
      net.run_pass(Direction::up, [&](AgentContext<Agent>& ctx) {
        if (r == 0) ctx.count_factorization();
        exchange(ctx, Direction::up);
      });
      net.run_pass(Direction::down, [](AgentContext<Agent>& ctx) { exchange(ctx, Direction::down); });
    }
  }
  return net.counters();
}

}  // namespace

TEST_CASE("upward pass on the seven-agent flow tree") {
  const auto topo = flow_topology(2);
  CHECK(topo.size() == 7);
  CHECK(topo.levels.size() == 3);
  Network<Agent> net(topo, std::vector<Agent>(7));
  net.run_pass(Direction::up, [](AgentContext<Agent>& ctx) { exchange(ctx, Direction::up); });
  CHECK(net.counters().envelopes == 6);
  CHECK(net.counters().mp_steps == 2);
  CHECK(net.counters().mp_steps_levels == 3);
}

TEST_CASE("single agent passes are local") {
  const auto topo = path_topology(1);
  Network<Agent> net(topo, std::vector<Agent>(1));
  net.run_pass(Direction::up, [](AgentContext<Agent>& ctx) { exchange(ctx, Direction::up); });
  net.run_pass(Direction::down, [](AgentContext<Agent>& ctx) { exchange(ctx, Direction::down); });
  CHECK(net.counters().envelopes == 0);
  CHECK(net.counters().mp_steps == 0);
}

TEST_CASE("a parent fires only after all of its children") {
  const auto topo = example_topology();
  Network<Agent> net(topo, std::vector<Agent>(5));
  int clock = 0;
  net.run_pass(Direction::up, [&clock](AgentContext<Agent>& ctx) {
    ctx.own("fired_at").fired_at = clock++;
    exchange(ctx, Direction::up);
  });
  const auto& a = net.agents();
  CHECK(a[1].fired_at > a[3].fired_at);
  CHECK(a[1].fired_at > a[4].fired_at);
  CHECK(a[0].fired_at > a[1].fired_at);
  CHECK(a[0].fired_at > a[2].fired_at);
  // Agent 1 received one envelope from each child.
  CHECK(a[1].value == 2.0);
}

TEST_CASE("topology and schedule violations are internal errors") {
  const auto topo = example_topology();
  Network<Agent> net(topo, std::vector<Agent>(5));
  // 3 and 4 are siblings, not neighbours.
  CHECK_THROWS_WITH_AS(net.run_pass(Direction::up,
                                    [](AgentContext<Agent>& ctx) {
                                      if (ctx.id() == 3) ctx.send(4, EnvelopeKind::qp_message, {});
                                    }),
                       doctest::Contains("topology violation"), InternalError);

  Network<Agent> net2(topo, std::vector<Agent>(5));
  // In an upward pass a parent may not send to a child that already fired.
  CHECK_THROWS_WITH_AS(net2.run_pass(Direction::up,
                                     [](AgentContext<Agent>& ctx) {
                                       if (ctx.id() == 1) ctx.send(3, EnvelopeKind::qp_message, {});
                                     }),
                       doctest::Contains("schedule violation"), InternalError);
}

TEST_CASE("step formula instances") {
  CHECK(step_formula(3, 14, 7) == 294);
  CHECK(step_formula(14, 27, 21) == 2856);
  CHECK(step_formula(1, 1, 0) == 6);
}

TEST_CASE("synthetic schedules satisfy the accounting identities") {
  SUBCASE("seven-clique path, K=14, B=7") {
    const auto topo = path_topology(7);
    CHECK(topo.height == 3);
    const auto c = synthetic_run(topo, 14, 7);
    const auto acc = accounting(c, topo, 14, 7);
    CHECK(acc.mp_steps == 294);
    for (int i = 0; i < topo.size(); ++i) {
      CHECK(acc.factorizations[i] == 14);
      CHECK(acc.comm_rounds[i] == 98);
    }
  }
  SUBCASE("height-14 path, K=27, B=21") {
    const auto topo = path_topology(29);
    CHECK(topo.height == 14);
    const auto c = synthetic_run(topo, 27, 21);
    const auto acc = accounting(c, topo, 27, 21);
    CHECK(acc.mp_steps == 2856);
    CHECK(acc.factorizations[0] == 27);
    CHECK(acc.comm_rounds[0] == 204);
  }
  SUBCASE("single edge, K=1, B=0") {
    const auto topo = path_topology(2);
    const auto acc = accounting(synthetic_run(topo, 1, 0), topo, 1, 0);
    CHECK(acc.mp_steps == 6);
  }
}

TEST_CASE("accounting rejects a schedule with a missing pass") {
  const auto topo = path_topology(3);
  Network<Agent> net(topo, std::vector<Agent>(3));
  for (int r = 0; r < 5; ++r) {
    net.run_pass(Direction::up, [](AgentContext<Agent>& ctx) { ctx.count_factorization(); });
  }
  CHECK_THROWS_WITH_AS(accounting(net.counters(), topo, 1, 0), doctest::Contains("scheduling bug"),
                       InternalError);
}

TEST_CASE("setup passes are not counted") {
  const auto topo = path_topology(3);
  Network<Agent> net(topo, std::vector<Agent>(3));
  net.run_pass(Direction::up, [](AgentContext<Agent>& ctx) { exchange(ctx, Direction::up); }, false);
  CHECK(net.counters().setup_passes == 1);
  CHECK(net.counters().counted_passes == 0);
  CHECK(net.counters().envelopes == 0);
  CHECK(net.counters().mp_steps == 0);
}

TEST_CASE("privacy audit flags reads of another agent's state") {
  const auto topo = example_topology();
  Network<Agent> net(topo, std::vector<Agent>(5), NetworkOptions{false, true});
  net.run_pass(Direction::up, [](AgentContext<Agent>& ctx) { exchange(ctx, Direction::up); });
  CHECK(audit_privacy(net.log()).clean());

  net.run_pass(Direction::down, [](AgentContext<Agent>& ctx) {
    if (ctx.id() == 2) (void)ctx.peek(0, "x");
    exchange(ctx, Direction::down);
  });
  const auto rep = audit_privacy(net.log());
  REQUIRE(rep.violations.size() == 1);
  CHECK(rep.violations[0].agent == 2);
  CHECK(rep.violations[0].owner == 0);
  CHECK(rep.violations[0].field == "x");

  net.run_pass(Direction::up, [](AgentContext<Agent>& ctx) {
    if (ctx.id() == 4) ctx.record_access(kGlobalOwner, "global x");
  });
  CHECK(audit_privacy(net.log()).violations.size() == 2);
}

TEST_CASE("threaded passes produce the same log and state as sequential ones") {
  const auto topo = flow_topology(4);
  auto run = [&](bool threaded) {
    Network<Agent> net(topo, std::vector<Agent>(static_cast<std::size_t>(topo.size())),
                       NetworkOptions{threaded, true});
    for (int r = 0; r < 4; ++r) {
      net.run_pass(Direction::up, [](AgentContext<Agent>& ctx) { exchange(ctx, Direction::up); });
      net.run_pass(Direction::down,
                   [](AgentContext<Agent>& ctx) { exchange(ctx, Direction::down); });
    }
    std::vector<double> values;
    for (const auto& a : net.agents()) values.push_back(a.value);
    return std::make_pair(net.log().to_json_lines(), values);
  };
  const auto seq = run(false);
  const auto par = run(true);
  CHECK(seq.first == par.first);
  CHECK(seq.second == par.second);
}

TEST_CASE("network requires one agent per node") {
  CHECK_THROWS_AS(Network<Agent>(path_topology(3), std::vector<Agent>(2)), InputError);
}
