//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "mid/featurizer.hpp"

#include <algorithm>
#include <sstream>

#include "mid/error.hpp"
#include "mid/rings.hpp"

namespace mid {

Descriptor Descriptor::element_count(Element e) {
  Descriptor d;
  d.kind = DescriptorKind::Element;
  d.element = e;
  return d;
}

Descriptor Descriptor::rings() {
  Descriptor d;
  d.kind = DescriptorKind::Rings;
  return d;
}

Descriptor Descriptor::aromatic_rings() {
  Descriptor d;
  d.kind = DescriptorKind::AromaticRings;
  return d;
}

Descriptor Descriptor::fragment_count(FragmentPattern f) {
  Descriptor d;
  d.kind = DescriptorKind::Fragment;
  d.fragment = std::move(f);
  return d;
}

std::string Descriptor::id() const {
  switch (kind) {
    case DescriptorKind::Element:
      return "element:" + std::string(symbol(element));
    case DescriptorKind::Rings:
      return "rings";
    case DescriptorKind::AromaticRings:
      return "aromatic_rings";
    case DescriptorKind::Fragment:
      return "fragment:" + fragment->key;
  }
  return {};
}

Descriptor Descriptor::from_id(std::string_view id) {
  if (id == "rings") return rings();
  if (id == "aromatic_rings") return aromatic_rings();
  if (id.starts_with("element:")) {
    auto e = element_from_symbol(id.substr(8));
    if (!e) throw ValidationError("unknown element in '" + std::string(id) + "'");
    return element_count(*e);
  }
  if (id.starts_with("fragment:")) {
    return fragment_count(FragmentPattern::from_key(id.substr(9)));
  }
  throw ValidationError("unknown descriptor id '" + std::string(id) + "'");
}

namespace {

bool canonical_less(const Descriptor &a, const Descriptor &b) {
  if (a.kind != b.kind) return a.kind < b.kind;
  switch (a.kind) {
    case DescriptorKind::Element:
      return a.element < b.element;
    case DescriptorKind::Fragment:
      if (a.fragment->edge_count != b.fragment->edge_count) {
        return a.fragment->edge_count < b.fragment->edge_count;
      }
      return a.fragment->key < b.fragment->key;
    default:
      return false;
  }
}

}  // namespace

FeatureSchema::FeatureSchema(std::vector<Descriptor> descriptors,
                             std::set<int> levels)
    : levels_(std::move(levels)) {
  std::stable_sort(descriptors.begin(), descriptors.end(), canonical_less);
  std::set<std::string> seen;
  for (auto &d : descriptors) {
    if (seen.insert(d.id()).second) descriptors_.push_back(std::move(d));
  }
  index();
}

void FeatureSchema::index() {
  by_id_.clear();
  by_fragment_.clear();
  max_edges_ = 0;
  for (std::size_t i = 0; i < descriptors_.size(); ++i) {
    by_id_.emplace(descriptors_[i].id(), i);
    if (descriptors_[i].fragment) {
      by_fragment_.emplace(descriptors_[i].fragment->key, i);
      max_edges_ = std::max(max_edges_, descriptors_[i].fragment->edge_count);
    }
  }
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> FeatureSchema::fragment_index(
    const std::string &key) const {
  auto it = by_fragment_.find(key);
  if (it == by_fragment_.end()) return std::nullopt;
  return it->second;
}

std::vector<Element> FeatureSchema::elements() const {
  std::vector<Element> out;
  for (const auto &d : descriptors_) {
    if (d.kind == DescriptorKind::Element) out.push_back(d.element);
  }
  return out;
}

std::string FeatureSchema::manifest() const {
  std::string out;
  for (const auto &d : descriptors_) {
    switch (d.kind) {
      case DescriptorKind::Element:
        out += "element\t" + std::string(symbol(d.element)) + "\t0\n";
        break;
      case DescriptorKind::Rings:
        out += "rings\t-\t0\n";
        break;
      case DescriptorKind::AromaticRings:
        out += "aromatic_rings\t-\t0\n";
        break;
      case DescriptorKind::Fragment:
        out += "fragment\t" + d.fragment->key + "\t" +
               std::to_string(d.fragment->edge_count) + "\n";
        break;
    }
  }
  return out;
}

FeatureSchema FeatureSchema::from_manifest(std::string_view text) {
  std::vector<Descriptor> descriptors;
  std::set<int> levels;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 3) {
      throw ValidationError("schema manifest line " + std::to_string(line_no) +
                            ": expected 3 tab-separated columns");
    }
    if (cols[0] == "element") {
      descriptors.push_back(Descriptor::from_id("element:" + cols[1]));
    } else if (cols[0] == "rings") {
      descriptors.push_back(Descriptor::rings());
    } else if (cols[0] == "aromatic_rings") {
      descriptors.push_back(Descriptor::aromatic_rings());
    } else if (cols[0] == "fragment") {
      Descriptor d = Descriptor::from_id("fragment:" + cols[1]);
      if (std::to_string(d.fragment->edge_count) != cols[2]) {
        throw ValidationError("schema manifest line " +
                              std::to_string(line_no) +
                              ": edge count does not match fragment");
      }
      levels.insert(d.fragment->edge_count);
      descriptors.push_back(std::move(d));
    } else {
      throw ValidationError("schema manifest line " + std::to_string(line_no) +
                            ": unknown kind '" + cols[0] + "'");
    }
  }
  return FeatureSchema(std::move(descriptors), std::move(levels));
}

FeatureSchema FeatureSchema::filter(const std::vector<std::string> &ids,
                                    bool keep) const {
  std::set<std::string> wanted(ids.begin(), ids.end());
  std::vector<Descriptor> out;
  for (const auto &d : descriptors_) {
    if (wanted.contains(d.id()) == keep) out.push_back(d);
  }
  return FeatureSchema(std::move(out), levels_);
}

FeatureSchema extract_vocabulary(const std::vector<Molecule> &dataset,
                                 const std::set<int> &levels) {
  if (dataset.empty()) throw ValidationError("empty dataset");
  if (levels.empty()) throw ValidationError("no fragment levels requested");
  for (int level : levels) {
    if (level < 1 || level > kMaxFragmentEdges) {
      throw ValidationError("fragment level " + std::to_string(level) +
                            " outside 1..4");
    }
  }
  const int max_edges = *levels.rbegin();
  ElementSet present;
  std::set<std::string> keys;
  FragmentKeyCache cache;
  for (const Molecule &m : dataset) {
    for (Element e : m.graph().elements()) present.insert(e);
    for_each_connected_subset(m.graph(), max_edges,
                              [&](std::span<const int> bonds) {
                                if (levels.contains(
                                        static_cast<int>(bonds.size()))) {
                                  keys.insert(cache.key(m.graph(), bonds));
                                }
                              });
  }
  std::vector<Descriptor> descriptors;
  for (Element e : present.members()) {
    descriptors.push_back(Descriptor::element_count(e));
  }
  descriptors.push_back(Descriptor::rings());
  descriptors.push_back(Descriptor::aromatic_rings());
  for (const std::string &key : keys) {
    descriptors.push_back(
        Descriptor::fragment_count(FragmentPattern::from_key(key)));
  }
  return FeatureSchema(std::move(descriptors), levels);
}

std::vector<int> encode_values(const Molecule &molecule,
                               const FeatureSchema &schema,
                               FragmentKeyCache &cache) {
  std::vector<int> values(schema.size(), 0);
  const Graph &g = molecule.graph();
  bool need_aromatic = false;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const Descriptor &d = schema[i];
    switch (d.kind) {
      case DescriptorKind::Element:
        values[i] = molecule.count(d.element);
        break;
      case DescriptorKind::Rings:
        values[i] = ring_count(g);
        break;
      case DescriptorKind::AromaticRings:
        need_aromatic = true;
        break;
      case DescriptorKind::Fragment:
        break;
    }
  }
  if (need_aromatic) {
    const int aromatic = aromatic_ring_count(g);
    values[*schema.index_of("aromatic_rings")] = aromatic;
  }
  if (schema.max_edges() > 0) {
    for_each_connected_subset(g, schema.max_edges(),
                              [&](std::span<const int> bonds) {
                                if (auto idx = schema.fragment_index(
                                        cache.key(g, bonds))) {
                                  ++values[*idx];
                                }
                              });
  }
  return values;
}

FeatureVector encode(const Molecule &molecule, const SchemaRef &schema) {
  FragmentKeyCache cache;
  return FeatureVector{schema, encode_values(molecule, *schema, cache)};
}

FeatureSchema merge_schemas(const FeatureSchema &a, const FeatureSchema &b) {
  if (a.elements() != b.elements()) {
    throw ValidationError("cannot merge schemas over different element sets");
  }
  std::vector<Descriptor> all = a.descriptors();
  all.insert(all.end(), b.descriptors().begin(), b.descriptors().end());
  std::set<int> levels = a.levels();
  levels.insert(b.levels().begin(), b.levels().end());
  return FeatureSchema(std::move(all), std::move(levels));
}

}  // namespace mid
