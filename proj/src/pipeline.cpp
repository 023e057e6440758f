//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "mid/pipeline.hpp"

#include <algorithm>
#include <set>

#include "mid/canon.hpp"
#include "mid/error.hpp"
#include "mid/generator.hpp"
#include "mid/hash.hpp"
#include "mid/smiles.hpp"

namespace mid {

namespace {

using ojson = nlohmann::ordered_json;

std::string dump(const ojson &doc) { return doc.dump() + "\n"; }

// Reads parameters with defaults and records the normalized values;
// finish() rejects keys nobody asked for.
class Params {
 public:
  Params(std::string method, const nlohmann::json &raw) : method_(std::move(method)), raw_(raw) {
    if (!raw_.is_null() && !raw_.is_object()) {
      throw ValidationError("parameters for " + method_ + " must be an object");
    }
  }

  template <typename T>
  T get(const std::string &key, T fallback) {
    used_.insert(key);
    T value = fallback;
    if (raw_.is_object() && raw_.contains(key) && !raw_.at(key).is_null()) {
      try {
        value = raw_.at(key).get<T>();
      } catch (const nlohmann::json::exception &) {
        throw ValidationError("parameter '" + key + "' of " + method_ + " has the wrong type");
      }
    }
    normalized_[key] = value;
    return value;
  }

  const nlohmann::json &require(const std::string &key) {
    used_.insert(key);
    if (!raw_.is_object() || !raw_.contains(key)) {
      throw ValidationError("method " + method_ + " requires parameter '" + key + "'");
    }
    return raw_.at(key);
  }

  void set(const std::string &key, ojson value) { normalized_[key] = std::move(value); }

  ojson finish() {
    if (raw_.is_object()) {
      for (const auto &[key, value] : raw_.items()) {
        if (!used_.count(key)) {
          throw ValidationError("unknown parameter '" + key + "' for method " + method_);
        }
      }
    }
    return std::move(normalized_);
  }

 private:
  std::string method_;
  const nlohmann::json &raw_;
  std::set<std::string> used_;
  ojson normalized_ = ojson::object();
};

void expect_parent(const NodeRecord &parent, const std::string &method,
                   std::initializer_list<NodeKind> kinds) {
  if (std::find(kinds.begin(), kinds.end(), parent.kind) != kinds.end()) return;
  std::string names;
  for (NodeKind k : kinds) names += (names.empty() ? "" : " or ") + std::string(to_string(k));
  throw LineageError("method " + method + " needs a " + names + " parent, but " + parent.id +
                     " is a " + std::string(to_string(parent.kind)));
}

void check_cancel(const RunControl &control) {
  if (control.cancel && control.cancel->load(std::memory_order_relaxed)) throw CancelledError();
}

void progress(const RunControl &control, const std::string &counter, std::int64_t value) {
  if (control.progress) control.progress(counter, value);
}

std::string features_payload(const FeatureSchema &schema) {
  ojson doc;
  doc["format"] = "mid-features/1";
  doc["levels"] = std::vector<int>(schema.levels().begin(), schema.levels().end());
  doc["dimension"] = schema.size();
  doc["manifest"] = schema.manifest();
  return dump(doc);
}

std::vector<std::vector<int>> encode_all(const std::vector<Molecule> &molecules,
                                         const SchemaRef &schema) {
  std::vector<std::vector<int>> rows;
  rows.reserve(molecules.size());
  FragmentKeyCache cache;
  for (const auto &m : molecules) rows.push_back(encode_values(m, *schema, cache));
  return rows;
}

MethodOutput extract_features(const Workspace &ws, Params &p) {
  const auto levels = p.get<std::vector<int>>("levels", {1, 2, 3, 4});
  const PropertyTable data = load_dataset(ws);
  const FeatureSchema schema =
      extract_vocabulary(data.molecules, std::set<int>(levels.begin(), levels.end()));
  return {NodeKind::FeatureSet, features_payload(schema), {}};
}

MethodOutput merge_features(const Workspace &ws, const NodeRecord &parent, Params &p) {
  const std::string other_id = p.get<std::string>("other", "");
  if (other_id.empty()) throw ValidationError("method merge_features requires parameter 'other'");
  const NodeRecord other = ws.node(other_id);
  expect_parent(other, "merge_features", {NodeKind::FeatureSet, NodeKind::MergedFeatureSet});
  const FeatureSchema merged = merge_schemas(*load_schema(ws, parent), *load_schema(ws, other));
  return {NodeKind::MergedFeatureSet, features_payload(merged), {}};
}

MethodOutput select(const Workspace &ws, const NodeRecord &parent, Params &) {
  const auto models = load_models(ws, parent);
  std::vector<std::string> ids;
  for (const auto &m : models) {
    const FeatureSchema kept = select_features(m);
    for (const auto &d : kept.descriptors()) ids.push_back(d.id());
  }
  const FeatureSchema schema = models.front().schema->filter(ids, true);
  return {NodeKind::FeatureSet, features_payload(schema), {}};
}

MethodOutput build_model(const Workspace &ws, const NodeRecord &parent, Params &p,
                         const RunControl &control) {
  const PropertyTable data = load_dataset(ws);
  const auto properties = p.get<std::vector<std::string>>("properties", data.properties);
  const auto kind_names = p.get<std::vector<std::string>>("kinds", {"lasso"});
  const int folds = p.get<int>("folds", 10);
  const auto seed = p.get<std::uint64_t>("seed", 0);
  const auto grid = p.get<std::vector<double>>("grid", default_penalty_grid());
  if (properties.empty()) throw ValidationError("at least one property is required");
  if (kind_names.empty()) throw ValidationError("at least one model kind is required");
  if (folds < 2) throw ValidationError("folds must be ≥ 2");
  if (grid.empty()) throw ValidationError("penalty grid is empty");
  std::vector<ModelKind> kinds;
  for (const auto &k : kind_names) kinds.push_back(model_kind_from_string(k));

  const SchemaRef schema = load_schema(ws, parent);
  const Eigen::MatrixXd X = design_matrix(encode_all(data.molecules, schema));
  const TrainingFingerprint fp = fingerprint(data.smiles);
  ojson doc;
  doc["format"] = "mid-model-group/1";
  doc["models"] = ojson::array();
  for (std::size_t i = 0; i < properties.size(); ++i) {
    check_cancel(control);
    const Eigen::VectorXd y = data.column(properties[i]);
    const SweepResult s = sweep(X, y, kinds, folds, seed, grid);
    RegressionModel m = train(X, y, s.best.kind, s.best.penalty);
    m.property = properties[i];
    m.schema = schema;
    m.cv = s.best.score;
    m.sigma = s.best.score.rmse;
    m.folds = folds;
    m.seed = seed;
    m.fingerprint = fp;
    m.sweep = s.entries;
    doc["models"].push_back(m.to_json());
    progress(control, "models", static_cast<std::int64_t>(i + 1));
  }
  return {NodeKind::Model, dump(doc), {}};
}

MethodOutput search(const Workspace &ws, const NodeRecord &parent, Params &p,
                    const RunControl &control) {
  SearchProblem problem;
  problem.models = load_models(ws, parent);
  const nlohmann::json &targets = p.require("targets");
  if (!targets.is_array() || targets.empty()) {
    throw ValidationError("targets must be a non-empty list");
  }
  ojson normalized_targets = ojson::array();
  for (const auto &t : targets) {
    TargetBand band;
    try {
      band.property = t.at("property").get<std::string>();
      band.target = t.at("target").get<double>();
      band.band = t.value("band", 0.0);
      band.weight = t.value("weight", 1.0);
    } catch (const nlohmann::json::exception &) {
      throw ValidationError("each target needs a property name and a numeric target");
    }
    problem.targets.push_back(band);
    normalized_targets.push_back(
        {{"property", band.property}, {"target", band.target}, {"band", band.band}, {"weight", band.weight}});
  }
  p.set("targets", normalized_targets);
  problem.rules = RuleSet::parse(p.get<std::string>("rules", ""));
  const auto seed = p.get<std::uint64_t>("seed", 0);
  SearchConfig config;
  config.pso.swarm = p.get<int>("swarm", config.pso.swarm);
  config.pso.iterations = p.get<int>("iterations", config.pso.iterations);
  config.pso.inertia = p.get<double>("inertia", config.pso.inertia);
  config.pso.cognitive = p.get<double>("cognitive", config.pso.cognitive);
  config.pso.social = p.get<double>("social", config.pso.social);
  config.pso.velocity_clamp = p.get<double>("velocity_clamp", config.pso.velocity_clamp);
  config.max_candidates = p.get<std::size_t>("max_candidates", config.max_candidates);
  config.use_index = p.get<bool>("use_index", config.use_index);
  config.builtin_rules = p.get<bool>("builtin_rules", config.builtin_rules);
  config.start_fraction = p.get<double>("start_fraction", config.start_fraction);
  const int max_atoms = p.get<int>("index_max_atoms", 5);
  const int tolerance = p.get<int>("index_tolerance", 0);
  if (tolerance < 0) throw ValidationError("index_tolerance must be non-negative");
  config.pso.validate();

  const PropertyTable data = load_dataset(ws);
  const SchemaRef schema = problem.models.front().schema;
  const auto rows = encode_all(data.molecules, schema);
  default_bounds(rows, problem.lo, problem.hi);
  problem.starts = rows;

  FeasibilityIndex index;
  std::string index_text;
  if (config.use_index) {
    index = build_feasibility_index(data.elements.members(), max_atoms, data.molecules,
                                    schema.get());
    index.tolerance = tolerance;
    index_text = index.serialize();
    problem.index = &index;
  }
  check_cancel(control);
  SearchControl sc;
  sc.cancel = control.cancel;
  sc.on_iteration = [&](int it, std::size_t archived) {
    progress(control, "iteration", it);
    progress(control, "candidates", static_cast<std::int64_t>(archived));
  };
  const SearchResult r = mc_pso(problem, config, seed, sc);

  ojson doc;
  doc["format"] = "mid-search/1";
  ojson resolved = ojson::array();
  for (const auto &t : r.targets) {
    resolved.push_back({{"property", t.property}, {"target", t.target}, {"band", t.band}, {"weight", t.weight}});
  }
  doc["targets"] = resolved;
  doc["rules"] = r.rules.serialize();
  doc["config"] = config.to_json();
  doc["seed"] = seed;
  if (config.use_index) {
    ojson info;
    info["payload"] = sha256_hex(index_text);
    info["points"] = index.points.size();
    info["max_atoms"] = max_atoms;
    info["tolerance"] = tolerance;
    doc["index"] = info;
  } else {
    doc["index"] = nullptr;
  }
  doc["iterations"] = r.iterations;
  doc["evaluations"] = r.evaluations;
  ojson cands = ojson::array();
  for (const auto &c : r.candidates) {
    ojson pred;
    for (std::size_t k = 0; k < r.targets.size(); ++k) pred[r.targets[k].property] = c.predicted[k];
    cands.push_back({{"values", c.values}, {"predicted", pred}, {"loss", c.loss}});
  }
  doc["candidates"] = cands;
  MethodOutput out{NodeKind::SearchResult, dump(doc), {}};
  if (!index_text.empty()) out.blobs.push_back(index_text);
  return out;
}

MethodOutput generate_structures(const Workspace &ws, const NodeRecord &parent, Params &p,
                                 const RunControl &control) {
  const auto max_structures = p.get<std::size_t>("max_structures", 20);
  const int tolerance = p.get<int>("tolerance", 0);
  const double budget = p.get<double>("time_budget_seconds", 30.0);
  const auto limit = p.get<std::size_t>("candidates", 0);
  const std::string pass = p.get<std::string>("edge_pass", "auto");
  const bool prune = p.get<bool>("prune", true);
  if (tolerance < 0) throw ValidationError("tolerance must be non-negative");
  if (budget < 0) throw ValidationError("time budget must be non-negative");
  EdgePass edge_pass;
  if (pass == "auto") {
    edge_pass = EdgePass::Auto;
  } else if (pass == "on") {
    edge_pass = EdgePass::On;
  } else if (pass == "off") {
    edge_pass = EdgePass::Off;
  } else {
    throw ValidationError("edge_pass must be auto, on or off");
  }

  const NodeRecord model_node = ws.node(parent.parent);
  const auto models = load_models(ws, model_node);
  const SchemaRef schema = models.front().schema;
  const auto candidates = load_candidates(ws, parent);
  const std::size_t count = limit == 0 ? candidates.size() : std::min(limit, candidates.size());

  ojson vectors = ojson::array();
  ojson molecules = ojson::array();
  std::set<std::string> seen;
  std::int64_t emitted = 0;
  for (std::size_t i = 0; i < count; ++i) {
    check_cancel(control);
    GenerationSpec spec = spec_from_vector(FeatureVector{schema, candidates[i].values}, tolerance);
    spec.max_structures = max_structures;
    spec.time_budget_seconds = budget;
    spec.edge_pass = edge_pass;
    spec.prune = prune;
    GenerationControl gc;
    gc.cancel = control.cancel;
    GenerationResult g;
    ojson entry;
    entry["candidate"] = i;
    try {
      g = generate(spec, gc);
    } catch (const ValidationError &e) {
      // Vectors without atoms cannot seed the generator.
      entry["smiles"] = ojson::array();
      entry["error"] = e.what();
      vectors.push_back(entry);
      continue;
    }
    entry["smiles"] = g.smiles;
    entry["capped"] = g.capped;
    entry["timed_out"] = g.timed_out;
    entry["visited"] = g.trace.visited();
    vectors.push_back(entry);
    for (std::size_t k = 0; k < g.smiles.size(); ++k) {
      if (!seen.insert(g.keys[k]).second) continue;
      const FeatureVector x = encode(parse_smiles(g.smiles[k]), schema);
      ojson pred;
      for (const auto &m : models) pred[m.property] = m.predict(x);
      molecules.push_back({{"smiles", g.smiles[k]}, {"candidate", i}, {"predicted", pred}});
      progress(control, "structures", ++emitted);
    }
    progress(control, "vectors", static_cast<std::int64_t>(i + 1));
  }
  ojson doc;
  doc["format"] = "mid-generation/1";
  doc["vectors"] = vectors;
  doc["molecules"] = molecules;
  return {NodeKind::GenerationResult, dump(doc), {}};
}

MethodOutput note(Params &p) {
  ojson doc;
  doc["format"] = "mid-note/1";
  doc["text"] = p.get<std::string>("text", "");
  return {NodeKind::Note, dump(doc), {}};
}

}  // namespace

MethodOutput ingest_csv(std::string_view csv, ElementSet elements) {
  const PropertyTable table = parse_property_csv(csv, elements);
  return {NodeKind::Dataset, dump(table.to_json()), {}};
}

const std::vector<std::string> &Workspace::methods() {
  static const std::vector<std::string> names = {"extract_features", "merge_features",
                                                 "select_features",  "build_model",
                                                 "search",           "generate",
                                                 "note"};
  return names;
}

void check_method(const NodeRecord &parent, const std::string &method) {
  if (method == "extract_features") {
    expect_parent(parent, method, {NodeKind::Dataset});
  } else if (method == "merge_features" || method == "build_model") {
    expect_parent(parent, method, {NodeKind::FeatureSet, NodeKind::MergedFeatureSet});
  } else if (method == "select_features" || method == "search") {
    expect_parent(parent, method, {NodeKind::Model});
  } else if (method == "generate") {
    expect_parent(parent, method, {NodeKind::SearchResult});
  } else if (method != "note") {
    std::string valid;
    for (const auto &m : Workspace::methods()) valid += (valid.empty() ? "" : ", ") + m;
    throw ValidationError("unknown method '" + method + "'; valid methods: " + valid,
                          "unknown_method");
  }
}

std::pair<ojson, MethodOutput> run_method(const Workspace &ws, const NodeRecord &parent,
                                          const std::string &method, const nlohmann::json &params,
                                          const RunControl &control) {
  check_method(parent, method);
  Params p(method, params);
  MethodOutput out;
  if (method == "extract_features") {
    out = extract_features(ws, p);
  } else if (method == "merge_features") {
    out = merge_features(ws, parent, p);
  } else if (method == "select_features") {
    out = select(ws, parent, p);
  } else if (method == "build_model") {
    out = build_model(ws, parent, p, control);
  } else if (method == "search") {
    out = search(ws, parent, p, control);
  } else if (method == "generate") {
    out = generate_structures(ws, parent, p, control);
  } else {
    out = note(p);
  }
  return {p.finish(), std::move(out)};
}

PropertyTable load_dataset(const Workspace &ws) {
  const NodeRecord root = ws.node(ws.root_id());
  return PropertyTable::from_json(ws.payload_json(root));
}

SchemaRef load_schema(const Workspace &ws, const NodeRecord &node) {
  if (node.kind == NodeKind::Model) return load_models(ws, node).front().schema;
  if (node.kind != NodeKind::FeatureSet && node.kind != NodeKind::MergedFeatureSet) {
    throw LineageError("node " + node.id + " holds no feature schema");
  }
  const auto doc = ws.payload_json(node);
  const FeatureSchema parsed = FeatureSchema::from_manifest(doc.at("manifest").get<std::string>());
  const auto levels = doc.at("levels").get<std::vector<int>>();
  return std::make_shared<const FeatureSchema>(parsed.descriptors(),
                                               std::set<int>(levels.begin(), levels.end()));
}

std::vector<RegressionModel> load_models(const Workspace &ws, const NodeRecord &node) {
  if (node.kind != NodeKind::Model) throw LineageError("node " + node.id + " is not a model");
  const auto doc = ws.payload_json(node);
  std::vector<RegressionModel> models;
  SchemaRef shared;
  for (const auto &m : doc.at("models")) {
    models.push_back(RegressionModel::from_json(m));
    // Share one schema object across the group.
    if (!shared) {
      shared = models.back().schema;
    } else {
      models.back().schema = shared;
    }
  }
  if (models.empty()) throw ValidationError("model node " + node.id + " holds no models");
  return models;
}

std::vector<StoredCandidate> load_candidates(const Workspace &ws, const NodeRecord &node) {
  if (node.kind != NodeKind::SearchResult) {
    throw LineageError("node " + node.id + " is not a search result");
  }
  std::vector<StoredCandidate> out;
  const auto doc = ws.payload_json(node);
  for (const auto &c : doc.at("candidates")) {
    StoredCandidate s;
    s.values = c.at("values").get<std::vector<int>>();
    s.predicted = c.at("predicted").get<std::map<std::string, double>>();
    s.loss = c.at("loss").get<double>();
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> node_molecules(const Workspace &ws, const NodeRecord &node) {
  if (node.kind == NodeKind::Dataset) return PropertyTable::from_json(ws.payload_json(node)).smiles;
  if (node.kind == NodeKind::GenerationResult) {
    std::vector<std::string> out;
    const auto doc = ws.payload_json(node);
    for (const auto &m : doc.at("molecules")) {
      out.push_back(m.at("smiles").get<std::string>());
    }
    return out;
  }
  throw ValidationError("node " + node.id + " (" + std::string(to_string(node.kind)) +
                        ") holds no molecules");
}

}  // namespace mid
