//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mid/element.hpp"
#include "mid/graph.hpp"

namespace mid {

// Molecules with one real value per declared property.
struct PropertyTable {
  ElementSet elements = ElementSet::standard();
  std::vector<std::string> properties;
  std::vector<Molecule> molecules;
  std::vector<std::string> smiles;  // canonical, aligned with molecules
  std::vector<std::vector<double>> values;  // row -> property values

  std::size_t size() const { return molecules.size(); }
  // Throws NotFoundError for an unknown property.
  std::size_t property_index(std::string_view name) const;
  Eigen::VectorXd column(std::string_view name) const;

  nlohmann::ordered_json to_json() const;
  static PropertyTable from_json(const nlohmann::json &doc);
};

// CSV contract: RFC 4180, header row, one `smiles` column (any case),
// every other column a numeric property. Errors name the data row
// (1-based, header excluded). Structures repeated under a different
// spelling are rejected.
PropertyTable parse_property_csv(std::string_view text,
                                 ElementSet elements = ElementSet::standard());

std::string to_property_csv(const PropertyTable &table);

// Builds a `smiles,e_lumo,e_gap` table from the public QM9 CSV export
// (columns SMILES, LUMO_au, HOMO_LUMO_gap_au). Rows are visited in a
// seeded random order; rows the parser rejects (charged species) and
// repeated structures are skipped until `count` rows are collected.
std::string convert_qm9(const std::vector<std::string> &sources, int count,
                        std::uint64_t seed);

}  // namespace mid
