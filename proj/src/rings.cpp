//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "mid/rings.hpp"

#include <algorithm>
#include <cstdint>
#include <queue>
#include <set>

namespace mid {
namespace {

// Shortest cycle through bond `skip` (a-b): BFS from a to b avoiding it.
// Returns bond indices in cycle order, or empty when the bond is a bridge.
std::vector<int> shortest_cycle_through(const Graph &g, int skip) {
  const Bond &bond = g.bonds()[skip];
  const int n = g.num_atoms();
  std::vector<int> via(n, -1);  // bond used to reach the atom
  std::vector<char> seen(n, 0);
  std::queue<int> queue;
  queue.push(bond.a);
  seen[bond.a] = 1;
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop();
    if (v == bond.b) break;
    for (const Neighbor &nb : g.neighbors(v)) {
      if (nb.bond == skip || seen[nb.atom]) continue;
      seen[nb.atom] = 1;
      via[nb.atom] = nb.bond;
      queue.push(nb.atom);
    }
  }
  if (!seen[bond.b]) return {};
  std::vector<int> cycle{skip};
  int v = bond.b;
  while (v != bond.a) {
    const int b = via[v];
    cycle.push_back(b);
    const Bond &e = g.bonds()[b];
    v = e.a == v ? e.b : e.a;
  }
  return cycle;
}

using BitRow = std::vector<std::uint64_t>;

BitRow to_bits(const std::vector<int> &bonds, int num_bonds) {
  BitRow row((num_bonds + 63) / 64, 0);
  for (int b : bonds) row[b / 64] |= std::uint64_t{1} << (b % 64);
  return row;
}

// Gaussian elimination over GF(2); returns true when `row` is independent
// of `basis` (and then appends its reduced form).
bool add_if_independent(std::vector<BitRow> &basis, std::vector<int> &pivots,
                        BitRow row) {
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const int p = pivots[i];
    if ((row[p / 64] >> (p % 64)) & 1u) {
      for (std::size_t w = 0; w < row.size(); ++w) row[w] ^= basis[i][w];
    }
  }
  for (std::size_t w = 0; w < row.size(); ++w) {
    if (row[w] != 0) {
      int bit = 0;
      while (!((row[w] >> bit) & 1u)) ++bit;
      pivots.push_back(static_cast<int>(w * 64 + bit));
      basis.push_back(std::move(row));
      return true;
    }
  }
  return false;
}

}  // namespace

int ring_count(const Graph &graph) {
  return graph.num_bonds() - graph.num_atoms() + 1;
}

int ring_count(const Molecule &molecule) {
  return ring_count(molecule.graph());
}

std::vector<std::vector<int>> smallest_rings(const Graph &graph) {
  const int wanted = ring_count(graph);
  if (wanted <= 0) return {};
  std::vector<std::vector<int>> candidates;
  std::set<std::vector<int>> seen;
  for (int b = 0; b < graph.num_bonds(); ++b) {
    std::vector<int> cycle = shortest_cycle_through(graph, b);
    if (cycle.empty()) continue;
    std::vector<int> sorted = cycle;
    std::sort(sorted.begin(), sorted.end());
    if (seen.insert(sorted).second) candidates.push_back(std::move(cycle));
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto &x, const auto &y) {
                     if (x.size() != y.size()) return x.size() < y.size();
                     std::vector<int> a = x, b = y;
                     std::sort(a.begin(), a.end());
                     std::sort(b.begin(), b.end());
                     return a < b;
                   });
  std::vector<BitRow> basis;
  std::vector<int> pivots;
  std::vector<std::vector<int>> rings;
  for (auto &cycle : candidates) {
    if (static_cast<int>(rings.size()) == wanted) break;
    if (add_if_independent(basis, pivots,
                           to_bits(cycle, graph.num_bonds()))) {
      rings.push_back(cycle);
    }
  }
  return rings;
}

int aromatic_ring_count(const Graph &graph) {
  int count = 0;
  for (const auto &ring : smallest_rings(graph)) {
    if (ring.size() != 6) continue;
    bool ok = true;
    for (std::size_t i = 0; i < ring.size() && ok; ++i) {
      const Bond &bond = graph.bonds()[ring[i]];
      const Bond &next = graph.bonds()[ring[(i + 1) % ring.size()]];
      ok = graph.element(bond.a) == Element::C &&
           graph.element(bond.b) == Element::C && bond.order <= 2 &&
           next.order <= 2 && bond.order != next.order;
    }
    if (ok) ++count;
  }
  return count;
}

int aromatic_ring_count(const Molecule &molecule) {
  return aromatic_ring_count(molecule.graph());
}

std::vector<char> bridge_flags(const Graph &graph) {
  const int n = graph.num_atoms();
  std::vector<char> bridge(graph.num_bonds(), 0);
  std::vector<int> disc(n, -1), low(n, 0);
  int timer = 0;
  // Iterative Tarjan lowlink.
  struct Frame {
    int v;
    int parent_bond;
    std::size_t next;
  };
  for (int root = 0; root < n; ++root) {
    if (disc[root] >= 0) continue;
    std::vector<Frame> stack{{root, -1, 0}};
    disc[root] = low[root] = timer++;
    while (!stack.empty()) {
      Frame &f = stack.back();
      auto nbrs = graph.neighbors(f.v);
      if (f.next < nbrs.size()) {
        const Neighbor nb = nbrs[f.next++];
        if (nb.bond == f.parent_bond) continue;
        if (disc[nb.atom] >= 0) {
          low[f.v] = std::min(low[f.v], disc[nb.atom]);
        } else {
          disc[nb.atom] = low[nb.atom] = timer++;
          stack.push_back({nb.atom, nb.bond, 0});
        }
        continue;
      }
      const Frame done = f;
      stack.pop_back();
      if (!stack.empty()) {
        Frame &parent = stack.back();
        low[parent.v] = std::min(low[parent.v], low[done.v]);
        if (low[done.v] > disc[parent.v]) bridge[done.parent_bond] = 1;
      }
    }
  }
  return bridge;
}

}  // namespace mid
