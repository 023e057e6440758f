//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <vector>

#include "mid/graph.hpp"

namespace mid {

// Cyclomatic number |bonds| - |atoms| + 1 of a connected graph.
int ring_count(const Graph &graph);
int ring_count(const Molecule &molecule);

// Smallest set of smallest rings, each ring given as its bond indices in
// cycle order. Built from the shortest cycle through every bond and
// reduced to a GF(2)-independent basis of size ring_count().
std::vector<std::vector<int>> smallest_rings(const Graph &graph);

// Rings of the SSSR that are six-membered, all carbon, and alternate
// single and double bonds.
int aromatic_ring_count(const Graph &graph);
int aromatic_ring_count(const Molecule &molecule);

// Bridges (bonds whose removal disconnects the graph), as a per-bond flag.
std::vector<char> bridge_flags(const Graph &graph);

}  // namespace mid
