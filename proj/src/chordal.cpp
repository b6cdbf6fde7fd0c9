#include "dipm/chordal.hpp"

#include <algorithm>
#include <deque>
#include <iterator>
#include <numeric>
#include <queue>
#include <sstream>
#include <tuple>

namespace dipm::chordal {

// ---------------------------------------------------------------------------
// IndexSet

IndexSet::IndexSet(std::initializer_list<int> elems)
    : IndexSet(std::vector<int>(elems)) {}

IndexSet::IndexSet(std::vector<int> sorted) : elems_(std::move(sorted)) {
  for (std::size_t k = 0; k < elems_.size(); ++k) {
    if (elems_[k] < 0) throw InputError("index set contains a negative index");
    if (k > 0 && elems_[k] <= elems_[k - 1]) {
      throw InputError("index set must be strictly increasing: " + to_string(*this));
    }
  }
}

IndexSet IndexSet::from_unsorted(std::vector<int> elems) {
  std::sort(elems.begin(), elems.end());
  elems.erase(std::unique(elems.begin(), elems.end()), elems.end());
  return IndexSet(std::move(elems));
}

bool IndexSet::contains(int v) const {
  return std::binary_search(elems_.begin(), elems_.end(), v);
}

int IndexSet::position(int v) const {
  auto it = std::lower_bound(elems_.begin(), elems_.end(), v);
  if (it == elems_.end() || *it != v) return -1;
  return static_cast<int>(it - elems_.begin());
}

std::vector<int> IndexSet::positions_of(const IndexSet& sub) const {
  std::vector<int> pos;
  pos.reserve(sub.size());
  for (int v : sub) {
    int p = position(v);
    if (p < 0) {
      throw InputError("index " + std::to_string(v) + " is not in " + to_string(*this));
    }
    pos.push_back(p);
  }
  return pos;
}

void IndexSet::check_universe(int universe, const std::string& what) const {
  if (!elems_.empty() && elems_.back() >= universe) {
    throw InputError(what + ": index " + std::to_string(elems_.back()) +
                     " out of range (universe size " + std::to_string(universe) + ")");
  }
}

IndexSet set_intersection(const IndexSet& a, const IndexSet& b) {
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return IndexSet(std::move(out));
}

IndexSet set_union(const IndexSet& a, const IndexSet& b) {
  std::vector<int> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return IndexSet(std::move(out));
}

IndexSet set_difference(const IndexSet& a, const IndexSet& b) {
  std::vector<int> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return IndexSet(std::move(out));
}

bool is_subset(const IndexSet& sub, const IndexSet& super) {
  return std::includes(super.begin(), super.end(), sub.begin(), sub.end());
}

std::string to_string(const IndexSet& s) {
  std::ostringstream os;
  os << '{';
  for (std::size_t k = 0; k < s.size(); ++k) os << (k ? "," : "") << s[k];
  os << '}';
  return os.str();
}

// ---------------------------------------------------------------------------
// UndirectedGraph

UndirectedGraph::UndirectedGraph(int n_vertices) {
  if (n_vertices < 0) throw InputError("negative vertex count");
  adj_.resize(static_cast<std::size_t>(n_vertices));
}

void UndirectedGraph::add_edge(int u, int v) {
  if (u == v) throw InputError("self-loop at vertex " + std::to_string(u));
  if (u < 0 || v < 0 || u >= vertex_count() || v >= vertex_count()) {
    throw InputError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                     ") out of range");
  }
  if (adj_[u].insert(v).second) {
    adj_[v].insert(u);
    ++edge_count_;
  }
}

bool UndirectedGraph::has_edge(int u, int v) const {
  if (u < 0 || u >= vertex_count()) return false;
  return adj_[u].count(v) != 0;
}

std::vector<std::pair<int, int>> UndirectedGraph::edges() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(edge_count_);
  for (int u = 0; u < vertex_count(); ++u) {
    for (int v : adj_[u]) {
      if (u < v) out.emplace_back(u, v);
    }
  }
  return out;
}

bool UndirectedGraph::is_complete(const IndexSet& vertices) const {
  for (std::size_t a = 0; a < vertices.size(); ++a) {
    for (std::size_t b = a + 1; b < vertices.size(); ++b) {
      if (!has_edge(vertices[a], vertices[b])) return false;
    }
  }
  return true;
}

UndirectedGraph sparsity_graph(std::span<const IndexSet> index_sets, int n) {
  UndirectedGraph g(n);
  for (std::size_t k = 0; k < index_sets.size(); ++k) {
    const IndexSet& J = index_sets[k];
    J.check_universe(n, "index set " + std::to_string(k));
    for (std::size_t a = 0; a < J.size(); ++a) {
      for (std::size_t b = a + 1; b < J.size(); ++b) g.add_edge(J[a], J[b]);
    }
  }
  return g;
}

UndirectedGraph coupling_graph(std::span<const IndexSet> index_sets) {
  if (index_sets.empty()) throw InputError("coupling graph needs at least one index set");
  const int N = static_cast<int>(index_sets.size());
  // Sets sharing a variable are adjacent; bucket by variable to avoid the N^2 scan.
  std::map<int, std::vector<int>> users;
  for (int k = 0; k < N; ++k) {
    for (int v : index_sets[k]) users[v].push_back(k);
  }
  UndirectedGraph g(N);
  for (const auto& [v, ks] : users) {
    for (std::size_t a = 0; a < ks.size(); ++a) {
      for (std::size_t b = a + 1; b < ks.size(); ++b) g.add_edge(ks[a], ks[b]);
    }
  }
  return g;
}

std::vector<std::vector<int>> connected_components(const UndirectedGraph& g) {
  const int n = g.vertex_count();
  std::vector<int> comp(n, -1);
  std::vector<std::vector<int>> out;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    const int id = static_cast<int>(out.size());
    out.emplace_back();
    std::deque<int> queue{s};
    comp[s] = id;
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      out[id].push_back(u);
      for (int w : g.neighbors(u)) {
        if (comp[w] < 0) {
          comp[w] = id;
          queue.push_back(w);
        }
      }
    }
    std::sort(out[id].begin(), out[id].end());
  }
  return out;
}

bool is_chordal(const UndirectedGraph& g) {
  const int n = g.vertex_count();
  if (n == 0) return true;
  // Maximum cardinality search; the reverse visit order is a perfect
  // elimination ordering iff the graph is chordal.
  std::vector<int> weight(n, 0);
  std::vector<bool> visited(n, false);
  std::set<std::pair<int, int>> frontier;  // (-weight, vertex)
  for (int v = 0; v < n; ++v) frontier.emplace(0, v);
  std::vector<int> visit_order;
  visit_order.reserve(n);
  while (!frontier.empty()) {
    auto [negw, v] = *frontier.begin();
    frontier.erase(frontier.begin());
    visited[v] = true;
    visit_order.push_back(v);
    for (int w : g.neighbors(v)) {
      if (visited[w]) continue;
      frontier.erase({-weight[w], w});
      ++weight[w];
      frontier.emplace(-weight[w], w);
    }
  }
  std::vector<int> elim(visit_order.rbegin(), visit_order.rend());
  std::vector<int> rank(n);
  for (int k = 0; k < n; ++k) rank[elim[k]] = k;
  for (int v : elim) {
    // Neighbours eliminated later must form a clique; checking them against
    // the earliest one of them suffices.
    std::vector<int> later;
    for (int w : g.neighbors(v)) {
      if (rank[w] > rank[v]) later.push_back(w);
    }
    if (later.size() < 2) continue;
    int first = *std::min_element(later.begin(), later.end(),
                                  [&](int a, int b) { return rank[a] < rank[b]; });
    for (int w : later) {
      if (w != first && !g.has_edge(first, w)) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Chordal embedding

ChordalEmbedding chordal_embed(const UndirectedGraph& g) {
  const int n = g.vertex_count();
  UndirectedGraph filled = g;
  std::vector<std::set<int>> work(n);  // the shrinking elimination graph
  for (int v = 0; v < n; ++v) work[v] = g.neighbors(v);

  std::set<std::pair<int, int>> by_degree;  // (degree, vertex)
  for (int v = 0; v < n; ++v) by_degree.emplace(static_cast<int>(work[v].size()), v);

  std::vector<IndexSet> cliques;
  std::vector<std::vector<int>> cliques_with(n);  // stored cliques containing a vertex

  auto reinsert = [&](int v, int old_degree) {
    by_degree.erase({old_degree, v});
    by_degree.emplace(static_cast<int>(work[v].size()), v);
  };

  auto simplicial = [&work](int v) {
    for (auto a = work[v].begin(); a != work[v].end(); ++a) {
      for (auto b = std::next(a); b != work[v].end(); ++b) {
        if (!work[*a].count(*b)) return false;
      }
    }
    return true;
  };

  while (!by_degree.empty()) {
    // Min-degree, but a simplicial vertex (zero fill) wins whenever one
    // exists, so chordal inputs come back unchanged.
    auto pick = by_degree.begin();
    for (auto it = by_degree.begin(); it != by_degree.end(); ++it) {
      if (simplicial(it->second)) {
        pick = it;
        break;
      }
    }
    const int i = pick->second;
    by_degree.erase(pick);
    std::vector<int> ne(work[i].begin(), work[i].end());

    for (std::size_t a = 0; a < ne.size(); ++a) {
      for (std::size_t b = a + 1; b < ne.size(); ++b) {
        const int u = ne[a], w = ne[b];
        if (work[u].count(w)) continue;
        const int du = static_cast<int>(work[u].size());
        const int dw = static_cast<int>(work[w].size());
        work[u].insert(w);
        work[w].insert(u);
        reinsert(u, du);
        reinsert(w, dw);
        filled.add_edge(u, w);
      }
    }
    for (int u : ne) {
      const int du = static_cast<int>(work[u].size());
      work[u].erase(i);
      reinsert(u, du);
    }
    work[i].clear();

    std::vector<int> members = ne;
    members.push_back(i);
    IndexSet candidate = IndexSet::from_unsorted(std::move(members));

    bool contained = false;
    for (int k : cliques_with[i]) {
      if (is_subset(candidate, cliques[k])) {
        contained = true;
        break;
      }
    }
    if (!contained) {
      const int id = static_cast<int>(cliques.size());
      for (int v : candidate) cliques_with[v].push_back(id);
      cliques.push_back(std::move(candidate));
    }
  }

  // The containment test above only looks backwards; prune any stored clique
  // that ended up inside another one as well.
  std::vector<bool> keep(cliques.size(), true);
  for (std::size_t a = 0; a < cliques.size(); ++a) {
    if (cliques[a].empty()) continue;
    for (int b : cliques_with[cliques[a][0]]) {
      if (static_cast<std::size_t>(b) == a || !keep[b]) continue;
      if (is_subset(cliques[a], cliques[b]) &&
          (cliques[a].size() < cliques[b].size() || static_cast<std::size_t>(b) < a)) {
        keep[a] = false;
        break;
      }
    }
  }
  std::vector<IndexSet> maximal;
  for (std::size_t a = 0; a < cliques.size(); ++a) {
    if (keep[a]) maximal.push_back(std::move(cliques[a]));
  }
  std::sort(maximal.begin(), maximal.end());
  return {std::move(filled), std::move(maximal)};
}

// ---------------------------------------------------------------------------
// Clique trees

namespace {

std::string describe_components(const std::vector<std::vector<int>>& comps) {
  std::ostringstream os;
  os << "disconnected components: intersection graph has " << comps.size()
     << " components";
  return os.str();
}

std::vector<std::vector<int>> tree_adjacency(const CliqueTree& t) {
  std::vector<std::vector<int>> adj(t.cliques.size());
  for (auto [i, j] : t.edges) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  return adj;
}

// Weighted intersection graph as (weight, i, j) with i < j.
std::vector<std::vector<std::pair<int, int>>> intersection_graph(
    std::span<const IndexSet> cliques) {
  std::map<int, std::vector<int>> users;
  for (int k = 0; k < static_cast<int>(cliques.size()); ++k) {
    for (int v : cliques[k]) users[v].push_back(k);
  }
  std::map<std::pair<int, int>, int> weight;
  for (const auto& [v, ks] : users) {
    for (std::size_t a = 0; a < ks.size(); ++a) {
      for (std::size_t b = a + 1; b < ks.size(); ++b) ++weight[{ks[a], ks[b]}];
    }
  }
  std::vector<std::vector<std::pair<int, int>>> adj(cliques.size());
  for (const auto& [e, w] : weight) {
    adj[e.first].emplace_back(e.second, w);
    adj[e.second].emplace_back(e.first, w);
  }
  return adj;
}

}  // namespace

DisconnectedError::DisconnectedError(std::vector<std::vector<int>> components)
    : InputError(describe_components(components)), components_(std::move(components)) {}

bool CliqueTree::is_edge(int i, int j) const {
  const std::pair<int, int> e{std::min(i, j), std::max(i, j)};
  return std::find(edges.begin(), edges.end(), e) != edges.end();
}

std::vector<int> CliqueTree::neighbors(int i) const {
  std::vector<int> out;
  for (auto [a, b] : edges) {
    if (a == i) out.push_back(b);
    if (b == i) out.push_back(a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

IndexSet CliqueTree::separator(int i, int j) const {
  return set_intersection(cliques.at(i), cliques.at(j));
}

IndexSet CliqueTree::parent_separator(int i) const {
  if (!rooted() || parent.at(i) < 0) return {};
  return separator(i, parent[i]);
}

std::vector<int> CliqueTree::postorder() const {
  if (!rooted()) throw InputError("postorder requires a rooted clique tree");
  std::vector<int> out;
  out.reserve(cliques.size());
  // (node, next child slot)
  std::vector<std::pair<int, std::size_t>> stack{{root, 0}};
  while (!stack.empty()) {
    auto& [node, slot] = stack.back();
    if (slot < children[node].size()) {
      const int child = children[node][slot++];
      stack.emplace_back(child, 0);
    } else {
      out.push_back(node);
      stack.pop_back();
    }
  }
  return out;
}

std::vector<std::vector<int>> CliqueTree::levels() const {
  if (!rooted()) throw InputError("levels require a rooted clique tree");
  std::vector<std::vector<int>> out(static_cast<std::size_t>(height) + 1);
  for (int k = 0; k < size(); ++k) out[depth[k]].push_back(k);
  return out;
}

int CliqueTree::total_separator_weight() const {
  int w = 0;
  for (auto [i, j] : edges) w += static_cast<int>(separator(i, j).size());
  return w;
}

CliqueTree mwst_clique_tree(std::span<const IndexSet> cliques) {
  const int q = static_cast<int>(cliques.size());
  if (q == 0) throw InputError("clique tree needs at least one clique");
  CliqueTree t;
  t.cliques.assign(cliques.begin(), cliques.end());
  const auto adj = intersection_graph(cliques);

  // Prim with a lazily cleaned heap ordered by (weight desc, canonical pair asc).
  using Cand = std::tuple<int, int, int, int>;  // (-w, lo, hi, outside vertex)
  std::priority_queue<Cand, std::vector<Cand>, std::greater<>> heap;
  std::vector<bool> in_tree(q, false);
  auto admit = [&](int v) {
    in_tree[v] = true;
    for (auto [u, w] : adj[v]) {
      if (!in_tree[u]) heap.emplace(-w, std::min(u, v), std::max(u, v), u);
    }
  };
  admit(0);
  int added = 1;
  while (!heap.empty()) {
    auto [negw, lo, hi, out] = heap.top();
    heap.pop();
    if (in_tree[out]) continue;
    t.edges.emplace_back(lo, hi);
    admit(out);
    ++added;
  }
  if (added < q) {
    UndirectedGraph ig(q);
    for (int v = 0; v < q; ++v) {
      for (auto [u, w] : adj[v]) {
        if (u > v) ig.add_edge(v, u);
      }
    }
    throw DisconnectedError(connected_components(ig));
  }
  std::sort(t.edges.begin(), t.edges.end());
  t.parent.assign(q, -1);
  t.children.assign(q, {});
  t.depth.assign(q, 0);
  return t;
}

CliqueForest clique_forest(std::span<const IndexSet> cliques) {
  const int q = static_cast<int>(cliques.size());
  const auto adj = intersection_graph(cliques);
  UndirectedGraph ig(q);
  for (int v = 0; v < q; ++v) {
    for (auto [u, w] : adj[v]) {
      if (u > v) ig.add_edge(v, u);
    }
  }
  CliqueForest forest;
  forest.component_of.assign(q, -1);
  forest.local_index.assign(q, -1);
  const auto comps = connected_components(ig);
  for (std::size_t c = 0; c < comps.size(); ++c) {
    std::vector<IndexSet> sub;
    for (std::size_t k = 0; k < comps[c].size(); ++k) {
      forest.component_of[comps[c][k]] = static_cast<int>(c);
      forest.local_index[comps[c][k]] = static_cast<int>(k);
      sub.push_back(cliques[comps[c][k]]);
    }
    forest.trees.push_back(mwst_clique_tree(sub));
  }
  return forest;
}

CliqueTree root_at(CliqueTree t, int root) {
  const int q = t.size();
  if (root < 0 || root >= q) throw InputError("root index out of range");
  const auto adj = tree_adjacency(t);
  t.root = root;
  t.parent.assign(q, -1);
  t.children.assign(q, {});
  t.depth.assign(q, 0);
  t.height = 0;
  std::vector<bool> seen(q, false);
  std::deque<int> queue{root};
  seen[root] = true;
  int reached = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    ++reached;
    for (int w : adj[u]) {
      if (seen[w]) continue;
      seen[w] = true;
      t.parent[w] = u;
      t.children[u].push_back(w);
      t.depth[w] = t.depth[u] + 1;
      t.height = std::max(t.height, t.depth[w]);
      queue.push_back(w);
    }
  }
  if (reached != q) throw InputError("clique tree edges do not span all cliques");
  return t;
}

CliqueTree root_min_height(CliqueTree t) {
  const int q = t.size();
  if (q == 0) throw InputError("empty clique tree");
  if (static_cast<int>(t.edges.size()) != q - 1) {
    throw InputError("clique tree must have exactly q-1 edges");
  }
  // Peel leaves layer by layer; the last one or two survivors are the centers.
  const auto adj = tree_adjacency(t);
  std::vector<int> degree(q);
  std::vector<int> layer;
  for (int v = 0; v < q; ++v) {
    degree[v] = static_cast<int>(adj[v].size());
    if (degree[v] <= 1) layer.push_back(v);
  }
  int remaining = q;
  while (remaining > 2) {
    remaining -= static_cast<int>(layer.size());
    std::vector<int> next;
    for (int v : layer) {
      for (int w : adj[v]) {
        if (--degree[w] == 1) next.push_back(w);
      }
    }
    layer = std::move(next);
  }
  const int center = *std::min_element(layer.begin(), layer.end());
  return root_at(std::move(t), center);
}

TreeSets tree_sets(const CliqueTree& t, int i, int j, std::span<const std::vector<int>> phi) {
  if (!t.is_edge(i, j)) {
    throw InputError("(" + std::to_string(i) + "," + std::to_string(j) +
                     ") is not a clique tree edge");
  }
  const auto adj = tree_adjacency(t);
  TreeSets out;
  std::vector<bool> seen(t.size(), false);
  seen[i] = seen[j] = true;
  std::deque<int> queue{i};
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    out.W.push_back(u);
    for (int w : adj[u]) {
      if (!seen[w]) {
        seen[w] = true;
        queue.push_back(w);
      }
    }
  }
  std::sort(out.W.begin(), out.W.end());
  for (int k : out.W) {
    out.V = set_union(out.V, t.cliques[k]);
    if (static_cast<std::size_t>(k) < phi.size()) {
      out.Phi.insert(out.Phi.end(), phi[k].begin(), phi[k].end());
    }
  }
  std::sort(out.Phi.begin(), out.Phi.end());
  out.S = t.separator(i, j);
  return out;
}

bool check_cip(const CliqueTree& t) {
  // Equivalent running-intersection form: for every variable the cliques
  // containing it induce a connected subtree (count - internal edges == 1).
  std::map<int, int> holders;
  for (const auto& c : t.cliques) {
    for (int v : c) ++holders[v];
  }
  std::map<int, int> internal_edges;
  for (auto [a, b] : t.edges) {
    for (int v : t.separator(a, b)) ++internal_edges[v];
  }
  for (const auto& [v, count] : holders) {
    auto it = internal_edges.find(v);
    const int e = it == internal_edges.end() ? 0 : it->second;
    if (count - e != 1) return false;
  }
  return true;
}

nlohmann::json to_json(const UndirectedGraph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (auto [u, v] : g.edges()) edges.push_back({u, v});
  return {{"n_vertices", g.vertex_count()}, {"edges", std::move(edges)}};
}

nlohmann::json to_json(const CliqueTree& t) {
  nlohmann::json cliques = nlohmann::json::array();
  for (const auto& c : t.cliques) cliques.push_back(c.vec());
  nlohmann::json edges = nlohmann::json::array();
  nlohmann::json seps = nlohmann::json::array();
  for (auto [i, j] : t.edges) {
    edges.push_back({i, j});
    seps.push_back({{"edge", {i, j}}, {"set", t.separator(i, j).vec()}});
  }
  nlohmann::json out = {{"cliques", std::move(cliques)},
                        {"tree_edges", std::move(edges)},
                        {"separators", std::move(seps)},
                        {"root", t.root}};
  if (t.rooted()) {
    out["parent"] = t.parent;
    out["height_edges"] = t.height;
    out["height_levels"] = t.level_count();
  }
  return out;
}

}  // namespace dipm::chordal
