//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

// Constrained particle swarm search over integer feature vectors.

#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mid/element.hpp"
#include "mid/featurizer.hpp"
#include "mid/graph.hpp"
#include "mid/regressor.hpp"

namespace mid {

// ---- rules ---------------------------------------------------------------

struct FeatureBound {
  std::string id;  // descriptor id
  int lo = 0;
  int hi = 0;
};

enum class Relation { Le, Ge };

struct LinearRule {
  std::map<std::string, double> coefficients;  // descriptor id -> coefficient
  Relation relation = Relation::Le;
  double constant = 0.0;

  double lhs(const FeatureSchema &schema, const std::vector<int> &values) const;
  bool holds(const FeatureSchema &schema, const std::vector<int> &values) const;
  // "2*element:O -1*fragment:C,O|1"
  std::string expression() const;
  static LinearRule parse(std::string_view expr, std::string_view rel, std::string_view constant);
};

struct RuleSet {
  std::vector<FeatureBound> bounds;
  std::vector<LinearRule> linear;

  void validate() const;
  // One rule per line, tab separated:
  //   bound  <id> <lo> <hi>
  //   linear <expr> <= | >= <constant>
  std::string serialize() const;
  static RuleSet parse(std::string_view text);
  // Appends other's rules; a bound for an id already bounded replaces it.
  void merge(const RuleSet &other);
};

// Linear consequences of valence and connectivity expressed over the
// schema's element and single-bond counts.
RuleSet builtin_rules(const FeatureSchema &schema);

// ---- feasibility index ----------------------------------------------------

using SubgraphTuple = std::array<int, 4>;

// Counts of connected bond subsets with 1..4 bonds. With a schema, only
// subsets whose fragment is a schema descriptor are counted, matching
// what a feature vector over that schema can express.
SubgraphTuple subgraph_tuple(const Graph &g, const FeatureSchema *schema = nullptr);
SubgraphTuple subgraph_tuple(const FeatureSchema &schema, const std::vector<int> &values);

struct FeasibilityIndex {
  std::set<SubgraphTuple> points;
  std::vector<Element> elements;
  int max_atoms = 0;
  std::size_t dataset_molecules = 0;
  std::string schema_sha256;  // empty: every fragment counted
  int tolerance = 0;          // Chebyshev radius

  bool contains(const SubgraphTuple &t) const;
  std::string serialize() const;
  static FeasibilityIndex parse(std::string_view text);
};

// Every connected molecule with up to max_atoms atoms over `elements`,
// plus the dataset molecules.
FeasibilityIndex build_feasibility_index(const std::vector<Element> &elements, int max_atoms,
                                         const std::vector<Molecule> &dataset,
                                         const FeatureSchema *schema = nullptr);

struct Feasibility {
  bool ok = true;
  std::string reason;  // first failed check
  int violations = 0;
};

Feasibility is_feasible(const FeatureSchema &schema, const std::vector<int> &values,
                        const FeasibilityIndex *index, const RuleSet &rules);

// ---- particle swarm -------------------------------------------------------

struct PsoConfig {
  int swarm = 100;
  int iterations = 200;
  double inertia = 0.729;
  double cognitive = 1.494;
  double social = 1.494;
  double velocity_clamp = 0.5;  // fraction of each dimension's range

  void validate() const;
};

struct PsoResult {
  std::vector<double> best_position;
  double best_value = 0.0;
  std::vector<double> history;  // best value after each iteration
  int iterations = 0;
};

using Objective = std::function<double(const std::vector<double> &)>;

// Minimizes `f` over the box [lo, hi] with reflective walls. Particles
// listed in `initial` start at those positions; the rest are uniform.
// `after_iteration(i)` returning false stops the run.
PsoResult pso_minimize(const Objective &f, const std::vector<double> &lo,
                       const std::vector<double> &hi, const PsoConfig &config, std::uint64_t seed,
                       const std::vector<std::vector<double>> &initial = {},
                       const std::function<bool(int)> &after_iteration = {});

// ---- constrained feature search ----------------------------------------

struct TargetBand {
  std::string property;
  double target = 0.0;
  double band = 0.0;  // 0: use the model's sigma
  double weight = 1.0;
};

struct Candidate {
  std::vector<int> values;
  std::vector<double> predicted;  // aligned with the targets
  double loss = 0.0;
};

struct SearchConfig {
  PsoConfig pso;
  std::size_t max_candidates = 50;
  bool use_index = true;
  bool builtin_rules = true;
  // Fraction of the swarm started at known vectors (SearchProblem::starts).
  double start_fraction = 0.25;
  double violation_penalty = 1e6;

  nlohmann::ordered_json to_json() const;
  static SearchConfig from_json(const nlohmann::json &doc);
};

struct SearchProblem {
  std::vector<RegressionModel> models;  // one schema shared by all
  std::vector<TargetBand> targets;
  RuleSet rules;
  const FeasibilityIndex *index = nullptr;
  std::vector<int> lo, hi;                // default per-dimension bounds
  std::vector<std::vector<int>> starts;   // known vectors, e.g. the dataset
};

struct SearchControl {
  const std::atomic<bool> *cancel = nullptr;
  std::function<void(int iteration, std::size_t archived)> on_iteration;
};

struct SearchResult {
  std::vector<TargetBand> targets;  // bands resolved
  RuleSet rules;                    // effective rules, bounds included
  std::vector<Candidate> candidates;  // sorted by loss, then values
  int iterations = 0;
  std::int64_t evaluations = 0;
};

// Bounds [0, 2 * max observed] per dimension.
void default_bounds(const std::vector<std::vector<int>> &rows, std::vector<int> &lo,
                    std::vector<int> &hi);

SearchResult mc_pso(const SearchProblem &problem, const SearchConfig &config, std::uint64_t seed,
                    const SearchControl &control = {});

}  // namespace mid
