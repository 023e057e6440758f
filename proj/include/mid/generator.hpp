//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mid/featurizer.hpp"
#include "mid/fragments.hpp"
#include "mid/graph.hpp"

namespace mid {

struct Range {
  static constexpr int kUnbounded = std::numeric_limits<int>::max();
  int lo = 0;
  int hi = kUnbounded;

  bool contains(int v) const { return v >= lo && v <= hi; }
  friend bool operator==(const Range &, const Range &) = default;
};

struct FragmentConstraint {
  FragmentPattern pattern;
  Range range;
};

// A connected building block placed whole in super-vertex mode. Atoms
// with spare valence are its attachment points.
struct UnitTemplate {
  Graph graph;
  std::string key;
  Range count{0, 0};

  // Throws ValidationError when the graph is disconnected or has no atom
  // with spare valence.
  static UnitTemplate from_graph(Graph graph, Range count);
};

enum class EdgePass { Auto, On, Off };

struct GenerationSpec {
  std::map<Element, int> atoms;  // free atoms, exact counts
  std::vector<FragmentConstraint> fragments;
  Range rings;
  Range aromatic_rings;
  std::vector<UnitTemplate> units;
  int max_bond_order = 3;
  // Auto: ring-closing edge augmentation runs when rings.hi > 0.
  EdgePass edge_pass = EdgePass::Auto;
  std::size_t max_structures = 20;  // 0 = no cap
  double time_budget_seconds = 0;   // 0 = no limit
  bool prune = true;                // check_termination
  bool dedup = true;                // final canonical-key filter

  bool edge_pass_enabled() const;
  int total_free_atoms() const;
  void validate() const;

  nlohmann::ordered_json to_json() const;
  static GenerationSpec from_json(const nlohmann::json &doc);
};

// A node of the construction tree: the growing graph (free valences
// left open) with its bookkeeping.
struct PartialGraph {
  Graph graph;
  std::map<Element, int> remaining;  // free atoms still to place
  std::vector<int> units_placed;     // per template
  std::vector<int> fragment_counts;  // aligned with spec.fragments
  int ring_edges = 0;                // edges added by the ring-closing pass

  int ring_count() const;
  int free_valence(int atom) const;
  int total_free_valence() const;
  int remaining_atoms() const;

  // Builds a node from a finished or partial graph, counting fragments
  // from scratch.
  static PartialGraph from_graph(Graph graph, const GenerationSpec &spec,
                                 std::map<Element, int> remaining = {});
};

// True when no extension of g can satisfy `spec`: a monotone count
// (fragment, ring) already exceeds its maximum; nothing more can be
// added while a fragment or ring count is still below its minimum; or
// the open valences cannot absorb the atoms still to place.
bool check_termination(const PartialGraph &g, const GenerationSpec &spec);

// Atom budget consumed and every count inside its range.
bool satisfy_constraint(const PartialGraph &g, const GenerationSpec &spec);

struct DepthCounts {
  std::int64_t visited = 0;
  std::int64_t pruned = 0;
  std::int64_t accepted = 0;  // children passing the canonical test
  std::int64_t rejected = 0;  // children failing it
};

struct GenerationTrace {
  std::vector<DepthCounts> depths;
  std::int64_t visited() const;
  std::string format() const;  // "depth visited pruned accepted rejected"
};

struct GenerationControl {
  const std::atomic<bool> *cancel = nullptr;
  // Called after every emitted structure.
  std::function<void(std::size_t emitted)> on_emit;
};

struct GenerationResult {
  std::vector<std::string> smiles;  // canonical, in emission order
  std::vector<std::string> keys;
  GenerationTrace trace;
  bool capped = false;     // stopped at max_structures
  bool timed_out = false;  // stopped by the time budget
};

// Isomorph-free enumeration by canonical augmentation. Throws
// CancelledError when the control's cancel flag is raised.
GenerationResult generate(const GenerationSpec &spec,
                          const GenerationControl &control = {});

// Atom counts from element descriptors; fragment, ring and aromatic
// counts widened by `tolerance` on both sides.
GenerationSpec spec_from_vector(const FeatureVector &x, int tolerance);

}  // namespace mid
