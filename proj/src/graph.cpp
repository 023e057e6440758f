//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "mid/graph.hpp"

#include <algorithm>
#include <string>

#include "mid/error.hpp"

namespace mid {

int Graph::add_atom(Element e) {
  elements_.push_back(e);
  adjacency_.emplace_back();
  return num_atoms() - 1;
}

int Graph::add_bond(int a, int b, int order) {
  if (a == b) throw ValidationError("self-loop on atom " + std::to_string(a));
  if (a < 0 || b < 0 || a >= num_atoms() || b >= num_atoms()) {
    throw ValidationError("bond references a missing atom");
  }
  if (order < 1 || order > 3) {
    throw ValidationError("bond order " + std::to_string(order) +
                          " outside 1..3");
  }
  if (bond_index(a, b) >= 0) {
    throw ValidationError("parallel bond between atoms " + std::to_string(a) +
                          " and " + std::to_string(b));
  }
  if (a > b) std::swap(a, b);
  const int index = num_bonds();
  bonds_.push_back(Bond{a, b, order});
  adjacency_[a].push_back(Neighbor{b, order, index});
  adjacency_[b].push_back(Neighbor{a, order, index});
  return index;
}

int Graph::bond_index(int i, int j) const {
  const auto &row = adjacency_[i].size() <= adjacency_[j].size()
                        ? adjacency_[i]
                        : adjacency_[j];
  const int other = adjacency_[i].size() <= adjacency_[j].size() ? j : i;
  for (const Neighbor &n : row) {
    if (n.atom == other) return n.bond;
  }
  return -1;
}

int Graph::bond_order(int i, int j) const {
  const int b = bond_index(i, j);
  return b < 0 ? 0 : bonds_[b].order;
}

int Graph::bond_order_sum(int i) const {
  int sum = 0;
  for (const Neighbor &n : adjacency_[i]) sum += n.order;
  return sum;
}

bool Graph::connected() const {
  if (elements_.empty()) return false;
  std::vector<char> seen(elements_.size(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int visited = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (const Neighbor &n : adjacency_[v]) {
      if (!seen[n.atom]) {
        seen[n.atom] = 1;
        ++visited;
        stack.push_back(n.atom);
      }
    }
  }
  return visited == num_atoms();
}

void Graph::set_bond_order(int bond, int order) {
  Bond &b = bonds_[bond];
  b.order = order;
  for (Neighbor &n : adjacency_[b.a]) {
    if (n.bond == bond) n.order = order;
  }
  for (Neighbor &n : adjacency_[b.b]) {
    if (n.bond == bond) n.order = order;
  }
}

Molecule Molecule::from_graph(Graph graph) {
  if (graph.num_atoms() == 0) throw ValidationError("empty molecule");
  if (!graph.connected()) {
    throw ValidationError("molecule is not connected");
  }
  Molecule m;
  m.hydrogens_.resize(graph.num_atoms());
  for (int i = 0; i < graph.num_atoms(); ++i) {
    const int h = valence(graph.element(i)) - graph.bond_order_sum(i);
    if (h < 0) {
      throw ValidationError("valence overflow on atom " + std::to_string(i) +
                            " (" + std::string(symbol(graph.element(i))) +
                            ")");
    }
    m.hydrogens_[i] = h;
  }
  m.graph_ = std::move(graph);
  return m;
}

int Molecule::count(Element e) const {
  return static_cast<int>(std::count(graph_.elements().begin(),
                                     graph_.elements().end(), e));
}

}  // namespace mid
