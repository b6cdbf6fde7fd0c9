#pragma once

// Deterministic level-synchronous agent network over a rooted clique tree.
//
// A pass fires every agent's handler exactly once, level by level (deepest
// first for upward passes, root first for downward passes). Envelopes travel
// only along tree edges and only towards agents that have not fired yet in the
// current pass. Within a level, handlers may run on worker threads; their
// sends and log entries are merged in ascending agent order afterwards, so the
// outcome never depends on thread interleaving.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <future>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "dipm/chordal.hpp"
#include "dipm/common.hpp"
#include "dipm/model.hpp"
#include "dipm/treeqp.hpp"

namespace dipm::netsim {

enum class EnvelopeKind {
  qp_message,
  separator_solution,
  alpha_bound,
  residual_partial,
  gap_partial,
  alpha_broadcast,
  stop_broadcast,
  eq_constraint_push,
};

const char* to_string(EnvelopeKind kind);

struct ScalarBundle {
  std::vector<double> values;
  Vector vec;
  bool flag = false;
};

using Payload = std::variant<std::monostate, treeqp::QuadraticMessage, Vector, ScalarBundle,
                             model::EqualityBlock>;

struct Envelope {
  EnvelopeKind kind;
  int src = -1;
  int dst = -1;
  Payload payload;
};

enum class Direction { up, down };

/// Owner ids used in access logs besides agent ids.
inline constexpr int kGlobalOwner = -1;
inline constexpr int kEnvelopeOwner = -2;

struct Topology {
  std::vector<int> parent;
  std::vector<std::vector<int>> children;
  std::vector<std::vector<int>> levels;  // levels[0] = {root}
  int height = 0;                        // edges

  static Topology from_tree(const chordal::CliqueTree& t);
  int size() const { return static_cast<int>(parent.size()); }
  int degree(int i) const {
    return static_cast<int>(children[i].size()) + (parent[i] >= 0 ? 1 : 0);
  }
  bool adjacent(int a, int b) const {
    return (parent[a] == b) || (parent[b] == a);
  }
};

struct Access {
  int owner;
  std::string field;
  friend auto operator<=>(const Access&, const Access&) = default;
};

/// One JSON object per envelope and per agent activation.
class RunLog {
 public:
  void add(nlohmann::json record) { records_.push_back(std::move(record)); }
  const std::vector<nlohmann::json>& records() const { return records_; }
  std::string to_json_lines() const;
  void write(const std::string& path) const;
  void clear() { records_.clear(); }

 private:
  std::vector<nlohmann::json> records_;
};

struct PrivacyViolation {
  long pass = 0;
  int agent = -1;
  int owner = -1;
  std::string field;
};

struct PrivacyReport {
  std::size_t activations = 0;
  std::size_t accesses = 0;
  std::vector<PrivacyViolation> violations;
  bool clean() const { return violations.empty(); }
};

/// Flags every logged read whose owner is neither the reader nor an envelope.
PrivacyReport audit_privacy(const RunLog& log);

struct Counters {
  long counted_passes = 0;
  long setup_passes = 0;
  long mp_steps = 0;         // one per tree edge level per counted pass
  long mp_steps_levels = 0;  // one per tree level per counted pass
  long envelopes = 0;        // delivered in counted passes
  std::vector<long> factorizations;
  std::vector<long> comm_rounds;
  std::vector<long> envelopes_sent;
  std::vector<long> envelopes_received;
};

struct StepAccounting {
  long mp_steps = 0;
  long mp_steps_levels = 0;
  int L = 0;  // height in edges
  int K = 0;
  long B = 0;
  std::vector<long> factorizations;
  std::vector<long> comm_rounds;
  std::vector<long> envelopes;  // sent + received
  std::vector<int> degree;

  nlohmann::json to_json() const;
};

/// 2·L·(B + 3K).
inline long step_formula(long L, long K, long B) { return 2 * L * (B + 3 * K); }

/// Checks the per-run identities and throws InternalError ("scheduling bug") on mismatch.
StepAccounting accounting(const Counters& c, const Topology& topo, int K, long B);

struct NetworkOptions {
  bool threaded = false;
  bool log = false;
};

template <class Agent>
class Network;

template <class Agent>
class AgentContext {
 public:
  int id() const { return id_; }
  int parent() const { return net_->topo_.parent[id_]; }
  const std::vector<int>& children() const { return net_->topo_.children[id_]; }

  const std::vector<Envelope>& inbox() {
    if (!(*inbox_).empty()) log_access(kEnvelopeOwner, "inbox");
    return *inbox_;
  }

  /// The envelope of `kind` from `src`; throws InternalError if absent.
  const Envelope& receive(int src, EnvelopeKind kind) {
    for (const Envelope& e : inbox()) {
      if (e.src == src && e.kind == kind) return e;
    }
    throw InternalError("agent " + std::to_string(id_) + " expected " + to_string(kind) +
                        " from " + std::to_string(src));
  }

  void send(int dst, EnvelopeKind kind, Payload payload) {
    const Topology& topo = net_->topo_;
    if (dst < 0 || dst >= topo.size() || !topo.adjacent(id_, dst)) {
      throw InternalError("topology violation: agent " + std::to_string(id_) +
                          " sent to non-neighbour " + std::to_string(dst));
    }
    if (net_->fired_[dst]) {
      throw InternalError("schedule violation: agent " + std::to_string(id_) +
                          " sent to agent " + std::to_string(dst) +
                          " which already fired this pass");
    }
    outbox_.push_back(Envelope{kind, id_, dst, std::move(payload)});
  }

  Agent& own(std::string_view field) {
    log_access(id_, field);
    return net_->agents_[id_];
  }

  /// Reads another agent's state; always a privacy violation when logged.
  const Agent& peek(int other, std::string_view field) {
    log_access(other, field);
    return net_->agents_.at(other);
  }

  void record_access(int owner, std::string_view field) { log_access(owner, field); }
  void count_factorization() { ++factorizations_; }

 private:
  friend class Network<Agent>;
  AgentContext(Network<Agent>* net, int id, const std::vector<Envelope>* inbox)
      : net_(net), id_(id), inbox_(inbox) {}

  void log_access(int owner, std::string_view field) {
    if (net_->options_.log) accesses_.insert(Access{owner, std::string(field)});
  }

  Network<Agent>* net_;
  int id_;
  const std::vector<Envelope>* inbox_;
  std::vector<Envelope> outbox_;
  std::set<Access> accesses_;
  long factorizations_ = 0;
};

template <class Agent>
class Network {
 public:
  using Handler = std::function<void(AgentContext<Agent>&)>;

  Network(Topology topo, std::vector<Agent> agents, NetworkOptions options = {})
      : topo_(std::move(topo)), agents_(std::move(agents)), options_(options) {
    const int q = topo_.size();
    if (static_cast<int>(agents_.size()) != q) {
      throw InputError("network: one agent per tree node required");
    }
    inboxes_.assign(q, {});
    fired_.assign(q, false);
    counters_.factorizations.assign(q, 0);
    counters_.comm_rounds.assign(q, 0);
    counters_.envelopes_sent.assign(q, 0);
    counters_.envelopes_received.assign(q, 0);
  }

  /// Runs one pass. Setup passes (counted = false) are excluded from the
  /// message-passing step and communication counters.
  void run_pass(Direction dir, const Handler& handler, bool counted = true,
                std::string_view label = {}) {
    const int q = topo_.size();
    std::fill(fired_.begin(), fired_.end(), false);
    for (auto& box : inboxes_) box.clear();
    const long pass_id = counters_.counted_passes + counters_.setup_passes;

    const int nlev = static_cast<int>(topo_.levels.size());
    for (int step = 0; step < nlev; ++step) {
      const int lev = dir == Direction::up ? nlev - 1 - step : step;
      const std::vector<int>& ids = topo_.levels[lev];
      std::vector<AgentContext<Agent>> ctxs;
      ctxs.reserve(ids.size());
      for (int i : ids) ctxs.push_back(AgentContext<Agent>(this, i, &inboxes_[i]));

      if (options_.threaded && ids.size() > 1) {
        // Contiguous chunks, one task each; the merge below fixes the order.
        const std::size_t workers = std::min<std::size_t>(
            ctxs.size(), std::max(1u, std::thread::hardware_concurrency()));
        const std::size_t chunk = (ctxs.size() + workers - 1) / workers;
        std::vector<std::future<void>> jobs;
        for (std::size_t lo = 0; lo < ctxs.size(); lo += chunk) {
          const std::size_t hi = std::min(ctxs.size(), lo + chunk);
          jobs.push_back(std::async(std::launch::async, [&handler, &ctxs, lo, hi] {
            for (std::size_t k = lo; k < hi; ++k) handler(ctxs[k]);
          }));
        }
        for (auto& j : jobs) j.get();
      } else {
        for (auto& ctx : ctxs) handler(ctx);
      }

      // Deterministic merge in ascending agent order.
      for (auto& ctx : ctxs) {
        const int i = ctx.id();
        fired_[i] = true;
        inboxes_[i].clear();
        counters_.factorizations[i] += ctx.factorizations_;
        if (counted) ++counters_.comm_rounds[i];
        if (options_.log) {
          nlohmann::json acc = nlohmann::json::array();
          for (const Access& a : ctx.accesses_) acc.push_back({{"owner", a.owner}, {"field", a.field}});
          log_.add({{"type", "activation"},
                    {"pass", pass_id},
                    {"label", std::string(label)},
                    {"direction", dir == Direction::up ? "up" : "down"},
                    {"agent", i},
                    {"accesses", std::move(acc)}});
        }
        for (Envelope& e : ctx.outbox_) {
          if (!topo_.adjacent(e.src, e.dst)) {
            throw InternalError("edge-locality violated on delivery");
          }
          if (counted) {
            ++counters_.envelopes_sent[e.src];
            ++counters_.envelopes_received[e.dst];
            ++counters_.envelopes;
          }
          if (options_.log) {
            log_.add({{"type", "envelope"},
                      {"pass", pass_id},
                      {"label", std::string(label)},
                      {"kind", to_string(e.kind)},
                      {"src", e.src},
                      {"dst", e.dst}});
          }
          inboxes_[e.dst].push_back(std::move(e));
        }
      }
    }
    for (int i = 0; i < q; ++i) {
      if (!inboxes_[i].empty()) throw InternalError("undelivered envelopes after pass");
    }
    if (counted) {
      ++counters_.counted_passes;
      counters_.mp_steps += topo_.height;
      counters_.mp_steps_levels += topo_.height + 1;
    } else {
      ++counters_.setup_passes;
    }
  }

  const Topology& topology() const { return topo_; }
  const Counters& counters() const { return counters_; }
  const RunLog& log() const { return log_; }
  /// Driver-side view of the agents, for collecting results after a run.
  const std::vector<Agent>& agents() const { return agents_; }
  std::vector<Agent>& agents() { return agents_; }

 private:
  friend class AgentContext<Agent>;

  Topology topo_;
  std::vector<Agent> agents_;
  NetworkOptions options_;
  std::vector<std::vector<Envelope>> inboxes_;
  std::vector<bool> fired_;
  Counters counters_;
  RunLog log_;
};

}  // namespace dipm::netsim
