//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "mid/fragments.hpp"

#include <algorithm>
#include <unordered_set>

#include "mid/canon.hpp"
#include "mid/error.hpp"

namespace mid {
namespace {

std::uint64_t pack_sorted(const std::vector<int> &bonds) {
  std::uint64_t key = 0;
  for (int b : bonds) key = (key << 16) | static_cast<std::uint64_t>(b + 1);
  return key;
}

class SubsetWalker {
 public:
  SubsetWalker(const Graph &g, int max_edges,
               const std::function<void(std::span<const int>)> &visit,
               int min_bond)
      : g_(g), max_edges_(max_edges), visit_(visit), min_bond_(min_bond) {}

  void grow(std::vector<int> &set) {
    std::vector<int> sorted = set;
    std::sort(sorted.begin(), sorted.end());
    if (!seen_.insert(pack_sorted(sorted)).second) return;
    visit_(sorted);
    if (static_cast<int>(set.size()) == max_edges_) return;
    // Frontier: bonds touching the subset's atoms.
    std::vector<int> frontier;
    for (int b : set) {
      const Bond &bond = g_.bonds()[b];
      for (int atom : {bond.a, bond.b}) {
        for (const Neighbor &nb : g_.neighbors(atom)) {
          if (nb.bond < min_bond_) continue;
          if (std::find(set.begin(), set.end(), nb.bond) != set.end()) continue;
          frontier.push_back(nb.bond);
        }
      }
    }
    std::sort(frontier.begin(), frontier.end());
    frontier.erase(std::unique(frontier.begin(), frontier.end()),
                   frontier.end());
    for (int b : frontier) {
      set.push_back(b);
      grow(set);
      set.pop_back();
    }
  }

 private:
  const Graph &g_;
  int max_edges_;
  const std::function<void(std::span<const int>)> &visit_;
  int min_bond_;
  std::unordered_set<std::uint64_t> seen_;
};

}  // namespace

FragmentPattern FragmentPattern::from_graph(Graph graph) {
  if (graph.num_bonds() < 1 || graph.num_bonds() > kMaxFragmentEdges) {
    throw ValidationError("fragment must have 1..4 bonds");
  }
  if (!graph.connected()) throw ValidationError("fragment is not connected");
  FragmentPattern f;
  f.key = canonical_key(graph);
  f.edge_count = graph.num_bonds();
  f.graph = std::move(graph);
  return f;
}

FragmentPattern FragmentPattern::from_key(std::string_view key) {
  Graph g = graph_from_key(key);
  FragmentPattern f = from_graph(std::move(g));
  if (f.key != key) {
    throw ValidationError("fragment key '" + std::string(key) +
                          "' is not in canonical form");
  }
  return f;
}

void for_each_connected_subset(
    const Graph &graph, int max_edges,
    const std::function<void(std::span<const int>)> &visit) {
  for (int b = 0; b < graph.num_bonds(); ++b) {
    // Subsets whose smallest bond is b.
    SubsetWalker walker(graph, max_edges, visit, b);
    std::vector<int> set{b};
    walker.grow(set);
  }
}

void for_each_connected_subset_containing(
    const Graph &graph, int bond, int max_edges,
    const std::function<void(std::span<const int>)> &visit) {
  SubsetWalker walker(graph, max_edges, visit, 0);
  std::vector<int> set{bond};
  walker.grow(set);
}

Graph bond_subgraph(const Graph &graph, std::span<const int> bonds) {
  Graph sub;
  std::vector<int> local(graph.num_atoms(), -1);
  for (int b : bonds) {
    const Bond &bond = graph.bonds()[b];
    for (int atom : {bond.a, bond.b}) {
      if (local[atom] < 0) local[atom] = sub.add_atom(graph.element(atom));
    }
    sub.add_bond(local[bond.a], local[bond.b], bond.order);
  }
  return sub;
}

std::uint64_t FragmentKeyCache::raw_code(const Graph &graph,
                                         std::span<const int> bonds) {
  // Per bond: local ids (3 bits each), order (2 bits), elements (3 bits
  // each). Four bonds fit in 56 bits; the count goes on top.
  int local_ids[32];
  int atoms[32];
  int next = 0;
  std::uint64_t code = 0;
  auto local = [&](int atom) {
    for (int i = 0; i < next; ++i) {
      if (atoms[i] == atom) return local_ids[i];
    }
    atoms[next] = atom;
    local_ids[next] = next;
    return next++;
  };
  for (int b : bonds) {
    const Bond &bond = graph.bonds()[b];
    const std::uint64_t la = static_cast<std::uint64_t>(local(bond.a));
    const std::uint64_t lb = static_cast<std::uint64_t>(local(bond.b));
    const std::uint64_t ea = static_cast<std::uint64_t>(graph.element(bond.a));
    const std::uint64_t eb = static_cast<std::uint64_t>(graph.element(bond.b));
    code = (code << 14) | (la << 11) | (lb << 8) |
           (static_cast<std::uint64_t>(bond.order) << 6) | (ea << 3) | eb;
  }
  return code | (static_cast<std::uint64_t>(bonds.size()) << 58);
}

const std::string &FragmentKeyCache::key(const Graph &graph,
                                         std::span<const int> bonds) {
  const std::uint64_t code = raw_code(graph, bonds);
  auto it = cache_.find(code);
  if (it != cache_.end()) return it->second;
  return cache_.emplace(code, canonical_key(bond_subgraph(graph, bonds)))
      .first->second;
}

int count_fragment(const Molecule &molecule, const FragmentPattern &fragment) {
  FragmentKeyCache cache;
  int count = 0;
  const Graph &g = molecule.graph();
  for_each_connected_subset(g, fragment.edge_count,
                            [&](std::span<const int> bonds) {
                              if (static_cast<int>(bonds.size()) ==
                                      fragment.edge_count &&
                                  cache.key(g, bonds) == fragment.key) {
                                ++count;
                              }
                            });
  return count;
}

std::map<std::string, int> fragment_census(const Graph &graph, int max_edges,
                                           FragmentKeyCache &cache) {
  std::map<std::string, int> counts;
  for_each_connected_subset(graph, max_edges, [&](std::span<const int> bonds) {
    ++counts[cache.key(graph, bonds)];
  });
  return counts;
}

}  // namespace mid
