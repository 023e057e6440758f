//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <string>
#include <string_view>

#include "mid/element.hpp"
#include "mid/graph.hpp"

namespace mid {

// Parses a SMILES subset: organic-subset atoms (C N O F S Cl Br),
// bracket atoms with explicit H counts, bonds - = # :, branches, ring
// closures 1-9 and %nn, and lowercase aromatic atoms which are
// kekulized on the fly. Charges, isotopes, stereo markers, wildcards and
// dot-disconnected structures are rejected.
//
// Throws ParseError (position annotated) for grammar violations and
// ValidationError for valence problems or elements outside `elements`.
Molecule parse_smiles(std::string_view text,
                      ElementSet elements = ElementSet::extended());

// Canonical SMILES: depth-first walk from canonical position 0 with
// branches and ring closures ordered by canonical position. Isomorphic
// inputs give byte-identical output.
std::string write_smiles(const Molecule &molecule);

}  // namespace mid
