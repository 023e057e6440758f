//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mid/element.hpp"
#include "mid/fragments.hpp"
#include "mid/graph.hpp"

namespace mid {

enum class DescriptorKind { Element = 0, Rings = 1, AromaticRings = 2, Fragment = 3 };

struct Descriptor {
  DescriptorKind kind = DescriptorKind::Element;
  Element element = Element::C;  // ElementCount only
  std::optional<FragmentPattern> fragment;

  static Descriptor element_count(Element e);
  static Descriptor rings();
  static Descriptor aromatic_rings();
  static Descriptor fragment_count(FragmentPattern f);

  // Stable identifier used by rule files and model documents:
  // "element:C", "rings", "aromatic_rings", "fragment:<key>".
  std::string id() const;
  int edge_count() const { return fragment ? fragment->edge_count : 0; }
  static Descriptor from_id(std::string_view id);
};

// Ordered descriptor list. Order is canonical: element counts (in
// element-set order), ring count, aromatic ring count, then fragments by
// (edge count, key).
class FeatureSchema {
 public:
  FeatureSchema() = default;
  // Deduplicates by id and sorts into canonical order.
  FeatureSchema(std::vector<Descriptor> descriptors, std::set<int> levels);

  std::size_t size() const { return descriptors_.size(); }
  const std::vector<Descriptor> &descriptors() const { return descriptors_; }
  const Descriptor &operator[](std::size_t i) const { return descriptors_[i]; }
  const std::set<int> &levels() const { return levels_; }
  // Largest fragment edge count present (0 when no fragments).
  int max_edges() const { return max_edges_; }

  std::optional<std::size_t> index_of(std::string_view id) const;
  std::optional<std::size_t> fragment_index(const std::string &key) const;
  std::vector<Element> elements() const;

  // One descriptor per line: kind<TAB>key<TAB>edge_count.
  std::string manifest() const;
  static FeatureSchema from_manifest(std::string_view text);

  // Keeps (or drops) the descriptors whose ids are listed.
  FeatureSchema filter(const std::vector<std::string> &ids, bool keep) const;

  friend bool operator==(const FeatureSchema &a, const FeatureSchema &b) {
    return a.manifest() == b.manifest() && a.levels_ == b.levels_;
  }

 private:
  void index();

  std::vector<Descriptor> descriptors_;
  std::set<int> levels_;
  int max_edges_ = 0;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::size_t> by_fragment_;
};

using SchemaRef = std::shared_ptr<const FeatureSchema>;

struct FeatureVector {
  SchemaRef schema;
  std::vector<int> values;
};

// Vocabulary of all elements present plus ring counts plus every
// connected fragment of the requested edge counts found in the dataset.
FeatureSchema extract_vocabulary(const std::vector<Molecule> &dataset,
                                 const std::set<int> &levels);

FeatureVector encode(const Molecule &molecule, const SchemaRef &schema);
std::vector<int> encode_values(const Molecule &molecule,
                               const FeatureSchema &schema,
                               FragmentKeyCache &cache);

// Union by descriptor id, in canonical order. Both schemas must cover
// the same element set.
FeatureSchema merge_schemas(const FeatureSchema &a, const FeatureSchema &b);

}  // namespace mid
