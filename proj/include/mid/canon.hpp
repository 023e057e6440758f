//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mid/graph.hpp"

namespace mid {

class Molecule;

// Vertex-coloured graph with labelled edges; the input of the canonical
// labelling search. Colours must be small non-negative integers; lower
// colours sort first in the canonical order.
struct ColoredGraph {
  std::vector<int> color;
  std::vector<std::vector<std::pair<int, int>>> adjacency;  // (vertex, label)

  int size() const { return static_cast<int>(color.size()); }
  void resize(int n) {
    color.assign(n, 0);
    adjacency.assign(n, {});
  }
  void add_edge(int a, int b, int label) {
    adjacency[a].emplace_back(b, label);
    adjacency[b].emplace_back(a, label);
  }
};

struct Labeling {
  std::vector<int> position;  // vertex -> canonical position
  std::vector<int> order;     // canonical position -> vertex
  std::vector<int> orbit;     // vertex -> smallest vertex of its orbit
  // Generators of the automorphism group (vertex -> image).
  std::vector<std::vector<int>> generators;
  // Serialized relabelled graph: colours by position, then the upper
  // triangle of the edge-label matrix. Equal codes <=> isomorphic.
  std::vector<int> code;
};

// Individualization-refinement search: equitable refinement of the
// colouring, branching on the first largest non-singleton cell, keeping
// the lexicographically smallest leaf code. Automorphisms are harvested
// from leaves with equal codes and used to prune sibling branches.
Labeling canonical_labeling(const ColoredGraph &graph);

// Colour classes after refining the initial colouring, without any
// branching. Vertex v can only take canonical position 0 if
// refined_colors(g)[v] == 0.
std::vector<int> refined_colors(const ColoredGraph &graph);

// Initial colouring used for chemical graphs: rank of
// (degree, element, incident bond-order multiset). Leaves sort first.
ColoredGraph to_colored_graph(const Graph &graph);

// Orbits (as sorted vertex lists) of the group spanned by `generators`.
std::vector<int> orbit_representatives(
    int n, const std::vector<std::vector<int>> &generators);

struct CanonicalForm {
  // Element sequence in canonical order followed by the upper triangle of
  // the bond-order matrix, e.g. "C,C,O|101" for ethanol.
  std::string key;
  std::vector<int> labeling;  // atom index -> canonical position
  std::vector<std::vector<int>> orbits;
};

CanonicalForm canonical_form(const Graph &graph);
CanonicalForm canonical_form(const Molecule &molecule);
std::string canonical_key(const Graph &graph);
std::string canonical_key(const Molecule &molecule);

// Inverse of the key serialization. Throws ValidationError on malformed
// input; does not check that the key is canonical.
Graph graph_from_key(std::string_view key);

}  // namespace mid
