//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <compare>
#include <span>
#include <vector>

#include "mid/element.hpp"

namespace mid {

struct Bond {
  int a = 0;  // a < b
  int b = 0;
  int order = 1;

  friend auto operator<=>(const Bond &, const Bond &) = default;
};

struct Neighbor {
  int atom;
  int order;
  int bond;  // index into Graph::bonds()
};

// Element- and bond-order-labelled simple graph with no hydrogen
// bookkeeping. Fragment patterns and partially built structures use it
// directly; Molecule wraps a validated one.
class Graph {
 public:
  Graph() = default;

  int add_atom(Element e);
  // Throws ValidationError on self-loops, parallel bonds, or order
  // outside 1..3.
  int add_bond(int a, int b, int order);

  int num_atoms() const { return static_cast<int>(elements_.size()); }
  int num_bonds() const { return static_cast<int>(bonds_.size()); }
  Element element(int i) const { return elements_[i]; }
  const std::vector<Element> &elements() const { return elements_; }
  const std::vector<Bond> &bonds() const { return bonds_; }
  std::span<const Neighbor> neighbors(int i) const { return adjacency_[i]; }
  int degree(int i) const { return static_cast<int>(adjacency_[i].size()); }

  // 0 when the atoms are not bonded.
  int bond_order(int i, int j) const;
  int bond_index(int i, int j) const;  // -1 when absent
  // Sum of incident bond orders.
  int bond_order_sum(int i) const;
  bool connected() const;

  // Raises the order of an existing bond.
  void set_bond_order(int bond, int order);

 private:
  std::vector<Element> elements_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

// A connected, valence-satisfied molecular graph of heavy atoms with
// implicit hydrogens. Immutable once built.
class Molecule {
 public:
  // Validates connectivity and valences, then derives implicit hydrogen
  // counts. Throws ValidationError on violations.
  static Molecule from_graph(Graph graph);

  const Graph &graph() const { return graph_; }
  int num_atoms() const { return graph_.num_atoms(); }
  int num_bonds() const { return graph_.num_bonds(); }
  Element element(int i) const { return graph_.element(i); }
  int implicit_h(int i) const { return hydrogens_[i]; }
  const std::vector<Bond> &bonds() const { return graph_.bonds(); }
  std::span<const Neighbor> neighbors(int i) const {
    return graph_.neighbors(i);
  }
  int count(Element e) const;

 private:
  Molecule() = default;
  Graph graph_;
  std::vector<int> hydrogens_;
};

}  // namespace mid
