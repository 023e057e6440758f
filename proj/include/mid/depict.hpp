//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

// 2D structure drawings as standalone SVG documents.

#pragma once

#include <string>
#include <vector>

#include "mid/graph.hpp"

namespace mid {

struct Point {
  double x = 0;
  double y = 0;
};

// Stress-majorization layout with unit bond length. Deterministic: the
// same molecule in the same atom order always gets the same coordinates.
std::vector<Point> layout_2d(const Graph &graph);

inline constexpr int kMaxDepictAtoms = 100;

// Draws the molecule in its canonical atom order, so isomorphic inputs
// give byte-identical output.
std::string depict_svg(const Molecule &molecule, int size = 240);

}  // namespace mid
