#pragma once

// Sparsity/coupling graphs, greedy chordal embedding and clique trees.
//
// All indices are 0-based. Cliques returned by chordal_embed are sorted
// lexicographically, which for tree-structured problems makes the clique
// index coincide with the index of the subproblem that generated it.

#include <cstddef>
#include <initializer_list>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dipm/common.hpp"

namespace dipm::chordal {

/// Strictly increasing list of non-negative indices.
class IndexSet {
 public:
  IndexSet() = default;
  IndexSet(std::initializer_list<int> elems);
  /// Throws InputError unless `sorted` is strictly increasing and non-negative.
  explicit IndexSet(std::vector<int> sorted);
  /// Sorts and removes duplicates.
  static IndexSet from_unsorted(std::vector<int> elems);

  std::span<const int> elements() const { return elems_; }
  const std::vector<int>& vec() const { return elems_; }
  std::size_t size() const { return elems_.size(); }
  bool empty() const { return elems_.empty(); }
  int operator[](std::size_t k) const { return elems_[k]; }
  auto begin() const { return elems_.begin(); }
  auto end() const { return elems_.end(); }

  bool contains(int v) const;
  /// Position of `v` inside the set, or -1.
  int position(int v) const;
  /// Positions of every element of `sub` inside this set; throws if `sub` is not a subset.
  std::vector<int> positions_of(const IndexSet& sub) const;
  /// Throws InputError if any element is >= `universe`.
  void check_universe(int universe, const std::string& what) const;

  friend bool operator==(const IndexSet&, const IndexSet&) = default;
  friend auto operator<=>(const IndexSet& a, const IndexSet& b) {
    return a.elems_ <=> b.elems_;
  }

 private:
  std::vector<int> elems_;
};

IndexSet set_intersection(const IndexSet& a, const IndexSet& b);
IndexSet set_union(const IndexSet& a, const IndexSet& b);
IndexSet set_difference(const IndexSet& a, const IndexSet& b);
bool is_subset(const IndexSet& sub, const IndexSet& super);
std::string to_string(const IndexSet& s);

class UndirectedGraph {
 public:
  explicit UndirectedGraph(int n_vertices = 0);

  int vertex_count() const { return static_cast<int>(adj_.size()); }
  std::size_t edge_count() const { return edge_count_; }
  /// Adds (u, v); no-op if present. Self-loops and out-of-range vertices throw.
  void add_edge(int u, int v);
  bool has_edge(int u, int v) const;
  const std::set<int>& neighbors(int v) const { return adj_.at(v); }
  /// Canonical (min, max) pairs in lexicographic order.
  std::vector<std::pair<int, int>> edges() const;
  bool is_complete(const IndexSet& vertices) const;

  friend bool operator==(const UndirectedGraph&, const UndirectedGraph&) = default;

 private:
  std::vector<std::set<int>> adj_;
  std::size_t edge_count_ = 0;
};

/// Edge (i, j) iff some index set contains both i and j.
UndirectedGraph sparsity_graph(std::span<const IndexSet> index_sets, int n);
/// Vertices are the sets; edge (i, j) iff the sets intersect.
UndirectedGraph coupling_graph(std::span<const IndexSet> index_sets);
/// Components as sorted vertex lists, ordered by smallest vertex.
std::vector<std::vector<int>> connected_components(const UndirectedGraph& g);

/// Maximum cardinality search + perfect elimination ordering test.
bool is_chordal(const UndirectedGraph& g);

struct ChordalEmbedding {
  UndirectedGraph graph;
  std::vector<IndexSet> cliques;
};

/// Greedy min-degree elimination (ties: lowest vertex index), taking the
/// lowest-degree simplicial vertex first when one exists so that chordal
/// graphs get no fill. Returns the filled graph and its maximal cliques,
/// sorted lexicographically.
ChordalEmbedding chordal_embed(const UndirectedGraph& g);

class DisconnectedError : public InputError {
 public:
  DisconnectedError(std::vector<std::vector<int>> components);
  const std::vector<std::vector<int>>& components() const { return components_; }

 private:
  std::vector<std::vector<int>> components_;
};

struct CliqueTree {
  std::vector<IndexSet> cliques;
  /// Canonical (min, max) pairs.
  std::vector<std::pair<int, int>> edges;
  /// -1 while unrooted.
  int root = -1;
  std::vector<int> parent;
  std::vector<std::vector<int>> children;
  std::vector<int> depth;
  /// Maximum number of edges on a root-to-leaf path.
  int height = 0;

  int size() const { return static_cast<int>(cliques.size()); }
  bool rooted() const { return root >= 0; }
  bool is_edge(int i, int j) const;
  std::vector<int> neighbors(int i) const;
  IndexSet separator(int i, int j) const;
  /// C_i ∩ C_parent(i); empty for the root.
  IndexSet parent_separator(int i) const;
  /// Children before parents; siblings in ascending index order.
  std::vector<int> postorder() const;
  /// Cliques grouped by depth, level 0 holding the root.
  std::vector<std::vector<int>> levels() const;
  /// Height counted in levels (nodes) rather than edges.
  int level_count() const { return height + 1; }
  int total_separator_weight() const;
};

/// Prim's algorithm from clique 0 over the weighted intersection graph.
/// Equal weights are resolved by the lexicographically smallest canonical pair.
/// Throws DisconnectedError if the intersection graph is disconnected.
CliqueTree mwst_clique_tree(std::span<const IndexSet> cliques);

/// One unrooted clique tree per connected component of the intersection graph.
/// `component_of[k]` gives the tree that clique k went to and `local_index[k]`
/// its index there.
struct CliqueForest {
  std::vector<CliqueTree> trees;
  std::vector<int> component_of;
  std::vector<int> local_index;
};
CliqueForest clique_forest(std::span<const IndexSet> cliques);

/// Roots the tree at a center (minimum height, ties to the smallest index).
CliqueTree root_min_height(CliqueTree t);
/// Roots the tree at `root`.
CliqueTree root_at(CliqueTree t, int root);

struct TreeSets {
  std::vector<int> W;  // cliques on the i-side of edge (i, j)
  IndexSet V;          // union of those cliques
  IndexSet S;          // C_i ∩ C_j
  std::vector<int> Phi;  // subproblems assigned to cliques in W
};

/// `phi[k]` lists the subproblems assigned to clique k (may be empty).
TreeSets tree_sets(const CliqueTree& t, int i, int j,
                   std::span<const std::vector<int>> phi = {});

/// Clique intersection property: C_i ∩ C_j ⊆ C_k for every k on the path.
bool check_cip(const CliqueTree& t);

nlohmann::json to_json(const UndirectedGraph& g);
nlohmann::json to_json(const CliqueTree& t);

}  // namespace dipm::chordal
