//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "mid/dataset.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>

#include "mid/canon.hpp"
#include "mid/csv.hpp"
#include "mid/error.hpp"
#include "mid/hash.hpp"
#include "mid/smiles.hpp"

namespace mid {

namespace {

std::string lower(std::string_view s) {
  std::string out;
  for (char c : s) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return std::string(s.substr(first, last - first + 1));
}

// Plain decimal number: optional sign, digits with one optional point,
// optional exponent. Rejects thousands separators, hex, inf and nan.
bool parse_real(const std::string &text, double &out) {
  if (text.empty()) return false;
  std::size_t i = 0;
  if (text[i] == '+' || text[i] == '-') ++i;
  bool digits = false;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
    ++i;
    digits = true;
  }
  if (i < text.size() && text[i] == '.') {
    ++i;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      ++i;
      digits = true;
    }
  }
  if (!digits) return false;
  if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
    ++i;
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) ++i;
    if (i >= text.size() || !std::isdigit(static_cast<unsigned char>(text[i]))) return false;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
  }
  if (i != text.size()) return false;
  errno = 0;
  out = std::strtod(text.c_str(), nullptr);
  return errno == 0 && std::isfinite(out);
}

}  // namespace

std::size_t PropertyTable::property_index(std::string_view name) const {
  for (std::size_t i = 0; i < properties.size(); ++i) {
    if (properties[i] == name) return i;
  }
  throw NotFoundError("unknown property '" + std::string(name) + "'");
}

Eigen::VectorXd PropertyTable::column(std::string_view name) const {
  const std::size_t p = property_index(name);
  Eigen::VectorXd y(static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) y(static_cast<Eigen::Index>(i)) = values[i][p];
  return y;
}

nlohmann::ordered_json PropertyTable::to_json() const {
  nlohmann::ordered_json doc;
  doc["format"] = "mid-dataset/1";
  doc["elements"] = elements.to_string();
  doc["properties"] = properties;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < size(); ++i) {
    rows.push_back({{"smiles", smiles[i]}, {"values", values[i]}});
  }
  doc["rows"] = std::move(rows);
  return doc;
}

PropertyTable PropertyTable::from_json(const nlohmann::json &doc) {
  try {
    if (doc.at("format") != "mid-dataset/1") {
      throw ValidationError("unsupported dataset document format");
    }
    PropertyTable t;
    t.elements = ElementSet::parse(doc.at("elements").get<std::string>());
    t.properties = doc.at("properties").get<std::vector<std::string>>();
    for (const auto &row : doc.at("rows")) {
      t.smiles.push_back(row.at("smiles").get<std::string>());
      t.molecules.push_back(parse_smiles(t.smiles.back(), t.elements));
      t.values.push_back(row.at("values").get<std::vector<double>>());
      if (t.values.back().size() != t.properties.size()) {
        throw ValidationError("dataset row has wrong number of values");
      }
    }
    return t;
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError(std::string("malformed dataset document: ") + e.what());
  }
}

PropertyTable parse_property_csv(std::string_view text, ElementSet elements) {
  const std::vector<CsvRecord> records = read_csv(text);
  if (records.empty()) throw ValidationError("CSV is empty", "csv_syntax");
  const auto &header = records.front().fields;
  int smiles_col = -1;
  PropertyTable table;
  table.elements = elements;
  std::vector<int> property_cols;
  std::set<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name = trim(header[c]);
    if (lower(name) == "smiles") {
      if (smiles_col >= 0) throw ValidationError("header has two smiles columns", "csv_syntax");
      smiles_col = static_cast<int>(c);
      continue;
    }
    if (name.empty()) {
      throw ValidationError("header column " + std::to_string(c + 1) + " has no name",
                            "csv_syntax");
    }
    if (!names.insert(name).second) {
      throw ValidationError("duplicate property column '" + name + "'", "csv_syntax");
    }
    table.properties.push_back(name);
    property_cols.push_back(static_cast<int>(c));
  }
  if (smiles_col < 0) throw ValidationError("header lacks a smiles column", "csv_syntax");

  std::map<std::string, int> seen;  // canonical key -> row
  for (std::size_t r = 1; r < records.size(); ++r) {
    const int row = static_cast<int>(r);
    const std::string where = "row " + std::to_string(row);
    const auto &fields = records[r].fields;
    if (fields.size() != header.size()) {
      throw ValidationError(where + ": expected " + std::to_string(header.size()) +
                                " columns, found " + std::to_string(fields.size()),
                            "csv_syntax");
    }
    const std::string text_smiles = trim(fields[smiles_col]);
    if (text_smiles.empty()) throw ValidationError(where + ": missing smiles", "missing_value");
    Molecule m = [&] {
      try {
        return parse_smiles(text_smiles, elements);
      } catch (const ValidationError &e) {
        throw ValidationError(where + ", column smiles: " + e.what(), "smiles_error");
      }
    }();
    const std::string key = canonical_key(m);
    if (auto [it, fresh] = seen.emplace(key, row); !fresh) {
      throw ValidationError(where + ": structure duplicates row " + std::to_string(it->second),
                            "duplicate_structure");
    }
    std::vector<double> vals;
    for (std::size_t p = 0; p < property_cols.size(); ++p) {
      const std::string cell = trim(fields[property_cols[p]]);
      if (cell.empty()) {
        throw ValidationError(where + ": missing value for '" + table.properties[p] + "'",
                              "missing_value");
      }
      double v = 0;
      if (!parse_real(cell, v)) {
        throw ValidationError(where + ", column " + table.properties[p] + ": '" + cell +
                                  "' is not a finite decimal number",
                              "invalid_number");
      }
      vals.push_back(v);
    }
    table.smiles.push_back(write_smiles(m));
    table.molecules.push_back(std::move(m));
    table.values.push_back(std::move(vals));
  }
  if (table.size() == 0) throw ValidationError("CSV has no data rows", "csv_syntax");
  return table;
}

std::string to_property_csv(const PropertyTable &table) {
  std::string out = "smiles";
  for (const auto &p : table.properties) out += "," + csv_field(p);
  out += "\n";
  char buf[64];
  for (std::size_t i = 0; i < table.size(); ++i) {
    out += csv_field(table.smiles[i]);
    for (double v : table.values[i]) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

std::string convert_qm9(const std::vector<std::string> &sources, int count,
                        std::uint64_t seed) {
  struct Row {
    std::string smiles, lumo, gap;
  };
  std::vector<Row> rows;
  for (const std::string &text : sources) {
    const auto records = read_csv(text);
    if (records.empty()) continue;
    int cs = -1, cl = -1, cg = -1;
    for (std::size_t c = 0; c < records[0].fields.size(); ++c) {
      const std::string &h = records[0].fields[c];
      if (h == "SMILES") cs = static_cast<int>(c);
      if (h == "LUMO_au") cl = static_cast<int>(c);
      if (h == "HOMO_LUMO_gap_au") cg = static_cast<int>(c);
    }
    if (cs < 0 || cl < 0 || cg < 0) {
      throw ValidationError("QM9 source lacks SMILES, LUMO_au or HOMO_LUMO_gap_au");
    }
    for (std::size_t r = 1; r < records.size(); ++r) {
      const auto &f = records[r].fields;
      rows.push_back({f.at(cs), f.at(cl), f.at(cg)});
    }
  }
  const std::vector<int> order = seeded_permutation(static_cast<int>(rows.size()), seed);
  std::string out = "smiles,e_lumo,e_gap\n";
  std::set<std::string> keys;
  int taken = 0;
  for (int idx : order) {
    if (taken == count) break;
    const Row &row = rows[idx];
    double lumo = 0, gap = 0;
    if (!parse_real(row.lumo, lumo) || !parse_real(row.gap, gap)) continue;
    try {
      Molecule m = parse_smiles(row.smiles, ElementSet::standard());
      if (!keys.insert(canonical_key(m)).second) continue;
    } catch (const ValidationError &) {
      continue;
    }
    out += csv_field(row.smiles) + "," + row.lumo + "," + row.gap + "\n";
    ++taken;
  }
  if (taken < count) {
    throw ValidationError("QM9 sources hold only " + std::to_string(taken) +
                          " usable rows");
  }
  return out;
}

}  // namespace mid
