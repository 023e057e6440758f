//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mid/graph.hpp"

namespace mid {

inline constexpr int kMaxFragmentEdges = 4;

// A small connected labelled subgraph identified by its canonical key.
struct FragmentPattern {
  Graph graph;
  std::string key;
  int edge_count = 0;

  // Throws ValidationError unless `graph` is connected with 1..4 bonds.
  static FragmentPattern from_graph(Graph graph);
  // Rebuilds the pattern from a canonical key such as "C,O|1".
  static FragmentPattern from_key(std::string_view key);
};

// Visits every connected bond subset with 1..max_edges bonds exactly
// once. The span holds sorted bond indices.
void for_each_connected_subset(
    const Graph &graph, int max_edges,
    const std::function<void(std::span<const int>)> &visit);

// Same, restricted to subsets that contain `bond`.
void for_each_connected_subset_containing(
    const Graph &graph, int bond, int max_edges,
    const std::function<void(std::span<const int>)> &visit);

// Labelled subgraph spanned by a set of bonds and their end atoms.
Graph bond_subgraph(const Graph &graph, std::span<const int> bonds);

// Memoizes canonical keys of small bond subsets. The memo key is an
// index-order encoding of the subset, so repeated local shapes skip the
// canonical labelling search. Not thread-safe; use one per thread.
class FragmentKeyCache {
 public:
  const std::string &key(const Graph &graph, std::span<const int> bonds);

  static std::uint64_t raw_code(const Graph &graph, std::span<const int> bonds);

 private:
  std::unordered_map<std::uint64_t, std::string> cache_;
};

// Distinct connected bond subsets of `molecule` whose labelled subgraph
// is isomorphic to the pattern.
int count_fragment(const Molecule &molecule, const FragmentPattern &fragment);

// Canonical key -> occurrence count for every fragment with 1..max_edges
// bonds.
std::map<std::string, int> fragment_census(const Graph &graph, int max_edges,
                                           FragmentKeyCache &cache);

}  // namespace mid
