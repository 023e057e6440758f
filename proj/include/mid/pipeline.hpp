//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

// Workspace methods: each turns a parent node plus parameters into a new
// payload. Payloads hold no timestamps or node ids, so the same inputs
// give byte-identical payloads whichever front end ran them.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mid/dataset.hpp"
#include "mid/featurizer.hpp"
#include "mid/regressor.hpp"
#include "mid/search.hpp"
#include "mid/workspace.hpp"

namespace mid {

MethodOutput ingest_csv(std::string_view csv, ElementSet elements);

// Checks the method name and the parent kind without doing any work.
// Unknown methods are a ValidationError naming the valid ones.
void check_method(const NodeRecord &parent, const std::string &method);

// Validates `params` against the method, fills in defaults and computes
// the payload. Throws LineageError when the parent kind does not fit.
std::pair<nlohmann::ordered_json, MethodOutput> run_method(const Workspace &ws,
                                                           const NodeRecord &parent,
                                                           const std::string &method,
                                                           const nlohmann::json &params,
                                                           const RunControl &control);

// Loaders for payloads along a node's ancestry.
PropertyTable load_dataset(const Workspace &ws);
SchemaRef load_schema(const Workspace &ws, const NodeRecord &feature_node);
std::vector<RegressionModel> load_models(const Workspace &ws, const NodeRecord &model_node);

struct StoredCandidate {
  std::vector<int> values;
  std::map<std::string, double> predicted;
  double loss = 0.0;
};
std::vector<StoredCandidate> load_candidates(const Workspace &ws, const NodeRecord &search_node);

// Canonical SMILES held by a dataset or generation node.
std::vector<std::string> node_molecules(const Workspace &ws, const NodeRecord &node);

}  // namespace mid
