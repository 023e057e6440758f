//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "mid/search.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "mid/canon.hpp"
#include "mid/dataset.hpp"
#include "mid/error.hpp"
#include "mid/hash.hpp"
#include "mid/smiles.hpp"
#include "oracle.hpp"

namespace mid {
namespace {

SchemaRef schema_of(const std::vector<std::string> &smiles, std::set<int> levels = {1, 2, 3, 4}) {
  std::vector<Molecule> ms;
  for (const auto &s : smiles) ms.push_back(parse_smiles(s));
  return std::make_shared<const FeatureSchema>(extract_vocabulary(ms, levels));
}

std::string fragment_id(const std::string &smiles) {
  return "fragment:" + canonical_key(parse_smiles(smiles));
}

TEST(RuleSet, ParseAndSerialize) {
  const std::string co = fragment_id("CO");
  const std::string text = "# comment\nbound\taromatic_rings\t0\t0\n\nlinear\telement:O -" + co +
                           "\t>=\t0\nlinear\t2*element:C +0.5*rings\t<=\t12.5\n";
  const RuleSet rules = RuleSet::parse(text);
  ASSERT_EQ(rules.bounds.size(), 1u);
  EXPECT_EQ(rules.bounds[0].id, "aromatic_rings");
  ASSERT_EQ(rules.linear.size(), 2u);
  EXPECT_EQ(rules.linear[0].coefficients.at("element:O"), 1.0);
  EXPECT_EQ(rules.linear[0].coefficients.at(co), -1.0);
  EXPECT_EQ(rules.linear[0].relation, Relation::Ge);
  EXPECT_EQ(rules.linear[1].coefficients.at("rings"), 0.5);
  EXPECT_EQ(rules.linear[1].constant, 12.5);
  const RuleSet again = RuleSet::parse(rules.serialize());
  EXPECT_EQ(again.serialize(), rules.serialize());
}

TEST(RuleSet, Errors) {
  auto message = [](const std::string &text) {
    try {
      RuleSet::parse(text);
    } catch (const ValidationError &e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("bound\telement:C\t1\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("\nbound\telement:C\tx\t2\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("linear\telement:C\t<\t1\n").find("relation"), std::string::npos);
  EXPECT_NE(message("range\telement:C\t1\t2\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("bound\telement:C\t3\t2\n").find("lo > hi"), std::string::npos);
  EXPECT_NE(message("bound\tnonsense\t0\t2\n").find("line 1"), std::string::npos);
}

TEST(RuleSet, MergeReplacesBounds) {
  RuleSet a = RuleSet::parse("bound\telement:C\t0\t5\nlinear\telement:C\t>=\t1\n");
  a.merge(RuleSet::parse("bound\telement:C\t2\t3\nbound\trings\t0\t0\n"));
  ASSERT_EQ(a.bounds.size(), 2u);
  EXPECT_EQ(a.bounds[0].lo, 2);
  EXPECT_EQ(a.linear.size(), 1u);
}

TEST(IsFeasible, RuleViolation) {
  const auto schema = schema_of({"OCCO", "CC(O)CO"}, {1});
  const std::string co = fragment_id("CO");
  std::vector<int> x(schema->size(), 0);
  x[*schema->index_of("element:C")] = 3;
  x[*schema->index_of("element:O")] = 2;
  x[*schema->index_of(co)] = 3;
  const RuleSet rules = RuleSet::parse("linear\telement:O -" + co + "\t>=\t0\n");
  const Feasibility f = is_feasible(*schema, x, nullptr, rules);
  EXPECT_FALSE(f.ok);
  EXPECT_EQ(f.violations, 1);
  EXPECT_EQ(f.reason.rfind("rule ", 0), 0u) << f.reason;
  x[*schema->index_of("element:O")] = 3;
  EXPECT_TRUE(is_feasible(*schema, x, nullptr, rules).ok);
}

TEST(IsFeasible, BoundViolation) {
  const auto schema = schema_of({"c1ccccc1O"}, {1});
  std::vector<int> x = encode(parse_smiles("c1ccccc1O"), schema).values;
  const RuleSet rules = RuleSet::parse("bound\taromatic_rings\t0\t0\n");
  const Feasibility f = is_feasible(*schema, x, nullptr, rules);
  EXPECT_FALSE(f.ok);
  EXPECT_EQ(f.reason.rfind("bound aromatic_rings", 0), 0u) << f.reason;
  EXPECT_THROW(is_feasible(*schema, x, nullptr, RuleSet::parse("bound\trings\t0\t0\nbound\tfragment:N,N|1\t0\t0\n")),
               ValidationError);
}

TEST(IsFeasible, TupleOutsideIndex) {
  const auto schema = schema_of({"CCO", "CC=O"});
  std::vector<Molecule> data = {parse_smiles("CCO"), parse_smiles("CC=O")};
  const auto index = build_feasibility_index({Element::C, Element::O}, 3, data, schema.get());
  std::vector<int> x(schema->size(), 0);
  x[*schema->index_of(fragment_id("CC"))] = 1000;
  const Feasibility f = is_feasible(*schema, x, &index, {});
  EXPECT_FALSE(f.ok);
  EXPECT_NE(f.reason.find("(1000, 0, 0, 0)"), std::string::npos) << f.reason;
}

// Builtin rules and the index accept every molecule they were built from.
TEST(IsFeasible, DatasetMoleculesPass) {
  std::mt19937 rng(7);
  const std::vector<Element> alphabet = {Element::C, Element::N, Element::O, Element::F};
  std::vector<Molecule> data;
  while (data.size() < 150) {
    Graph g = oracle::random_graph(rng, 2 + static_cast<int>(rng() % 8), alphabet);
    if (g.num_atoms() >= 2 && g.connected()) data.push_back(Molecule::from_graph(g));
  }
  auto schema = std::make_shared<const FeatureSchema>(extract_vocabulary(data, {1, 2, 3, 4}));
  const auto index = build_feasibility_index(alphabet, 2, data, schema.get());
  const RuleSet rules = builtin_rules(*schema);
  EXPECT_FALSE(rules.linear.empty());
  for (const auto &m : data) {
    const Feasibility f = is_feasible(*schema, encode(m, schema).values, &index, rules);
    EXPECT_TRUE(f.ok) << write_smiles(m) << ": " << f.reason;
  }
}

TEST(BuiltinRules, ConnectivityNeedsFullBondCoverage) {
  auto has_connectivity = [](const RuleSet &r) {
    for (const auto &l : r.linear) {
      if (l.relation == Relation::Ge && l.constant == -1) return true;
    }
    return false;
  };
  EXPECT_TRUE(has_connectivity(builtin_rules(*schema_of({"CC", "C=C", "C#C"}, {1}))));
  EXPECT_FALSE(has_connectivity(builtin_rules(*schema_of({"CC", "C=C"}, {1}))));
  // Two carbons and no bond cannot be connected.
  const auto schema = schema_of({"CC", "C=C", "C#C"}, {1});
  std::vector<int> x(schema->size(), 0);
  x[*schema->index_of("element:C")] = 2;
  EXPECT_FALSE(is_feasible(*schema, x, nullptr, builtin_rules(*schema)).ok);
  // Five single C-C bonds among two carbons exceed their valence.
  x[*schema->index_of(fragment_id("CC"))] = 5;
  const Feasibility f = is_feasible(*schema, x, nullptr, builtin_rules(*schema));
  EXPECT_FALSE(f.ok);
}

TEST(FeasibilityIndex, TinyExamples) {
  auto one = build_feasibility_index({Element::C}, 1, {});
  EXPECT_EQ(one.points, (std::set<SubgraphTuple>{{0, 0, 0, 0}}));
  auto two = build_feasibility_index({Element::C}, 2, {});
  EXPECT_EQ(two.points, (std::set<SubgraphTuple>{{0, 0, 0, 0}, {1, 0, 0, 0}}));
  EXPECT_THROW(build_feasibility_index({Element::C}, 0, {}), ValidationError);
  EXPECT_THROW(build_feasibility_index({Element::C}, 2, {parse_smiles("CO")}), ValidationError);
}

TEST(FeasibilityIndex, MatchesOracleTuples) {
  const std::vector<Element> cno = {Element::C, Element::N, Element::O};
  std::set<SubgraphTuple> expected;
  for (int n = 1; n <= 4; ++n) {
    for (const auto &atoms : oracle::multisets(cno, n)) {
      for (const auto &form : oracle::enumerate(atoms, 3, true)) {
        expected.insert(oracle::subset_tuple(oracle::from_min_form(form)));
      }
    }
  }
  const auto index = build_feasibility_index(cno, 4, {});
  EXPECT_EQ(index.points, expected);
}

TEST(FeasibilityIndex, PersistenceAndTolerance) {
  const auto schema = schema_of({"CCO", "CC=O"});
  auto index = build_feasibility_index({Element::C, Element::O}, 3,
                                       {parse_smiles("CCO"), parse_smiles("CC=O")}, schema.get());
  const std::string text = index.serialize();
  EXPECT_EQ(text.rfind("# mid-feasibility/1\n", 0), 0u);
  EXPECT_NE(text.find("# schema\t" + sha256_hex(schema->manifest())), std::string::npos);
  const auto back = FeasibilityIndex::parse(text);
  EXPECT_EQ(back.points, index.points);
  EXPECT_EQ(back.serialize(), text);
  EXPECT_THROW(FeasibilityIndex::parse("1\t2\t3\t4\n"), ValidationError);
  EXPECT_THROW(FeasibilityIndex::parse("# mid-feasibility/1\n1\t2\t3\n"), ValidationError);

  SubgraphTuple far{100, 100, 100, 100};
  EXPECT_FALSE(index.contains(far));
  index.points.insert({10, 10, 10, 10});
  EXPECT_FALSE(index.contains({11, 9, 10, 12}));
  index.tolerance = 2;
  EXPECT_TRUE(index.contains({11, 9, 10, 12}));
  EXPECT_FALSE(index.contains({13, 9, 10, 12}));

  const auto other = schema_of({"CCN"});
  EXPECT_THROW(is_feasible(*other, std::vector<int>(other->size(), 0), &index, {}),
               ValidationError);
}

TEST(SubgraphTuple, SchemaRelativeCounts) {
  const auto m = parse_smiles("CCO");
  EXPECT_EQ(subgraph_tuple(m.graph()), (SubgraphTuple{2, 1, 0, 0}));
  const auto schema = schema_of({"CCO"});
  EXPECT_EQ(subgraph_tuple(*schema, encode(m, schema).values), (SubgraphTuple{2, 1, 0, 0}));
  const auto narrow = schema_of({"CC"});
  EXPECT_EQ(subgraph_tuple(m.graph(), narrow.get()), (SubgraphTuple{1, 0, 0, 0}));
}

double quadratic(const std::vector<double> &x) {
  static const double a[] = {1.0, 2.0, 0.5, 3.0, 1.5};
  static const double c[] = {1.0, -2.0, 3.5, 0.0, -4.0};
  double s = 0;
  for (int i = 0; i < 5; ++i) s += a[i] * (x[i] - c[i]) * (x[i] - c[i]);
  return s;
}

TEST(Pso, ConvexQuadratic) {
  const std::vector<double> lo(5, -10.0), hi(5, 10.0);
  int reached = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = pso_minimize(quadratic, lo, hi, {}, seed);
    EXPECT_EQ(r.iterations, 200);
    EXPECT_EQ(r.history.size(), 200u);
    EXPECT_TRUE(std::is_sorted(r.history.rbegin(), r.history.rend()));
    reached += r.best_value <= 1e-3;
  }
  EXPECT_GE(reached, 19);
}

TEST(Pso, StaysInBoxAndIsDeterministic) {
  const std::vector<double> lo = {0, -1, 2}, hi = {1, 1, 2};
  bool inside = true;
  auto f = [&](const std::vector<double> &x) {
    for (int j = 0; j < 3; ++j) inside &= x[j] >= lo[j] && x[j] <= hi[j];
    return -x[0] + x[1] * x[1];
  };
  PsoConfig config;
  config.swarm = 10;
  config.iterations = 50;
  const auto a = pso_minimize(f, lo, hi, config, 3);
  const auto b = pso_minimize(f, lo, hi, config, 3);
  EXPECT_TRUE(inside);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.best_position, b.best_position);
  EXPECT_NEAR(a.best_position[0], 1.0, 1e-3);
  EXPECT_EQ(a.best_position[2], 2.0);
  int calls = 0;
  const auto stopped = pso_minimize(f, lo, hi, config, 3, {}, [&](int) { return ++calls < 5; });
  EXPECT_EQ(stopped.iterations, 5);
}

RegressionModel difference_model() {
  RegressionModel m;
  m.property = "y";
  m.schema = std::make_shared<const FeatureSchema>(
      std::vector<Descriptor>{Descriptor::element_count(Element::C),
                              Descriptor::element_count(Element::N)},
      std::set<int>{1});
  m.standardization.mean = Eigen::VectorXd::Zero(2);
  m.standardization.scale = Eigen::VectorXd::Ones(2);
  m.weights = Eigen::Vector2d(1.0, -1.0);
  m.sigma = 0.5;
  return m;
}

TEST(McPso, ToyDifferenceModel) {
  SearchProblem p;
  p.models = {difference_model()};
  p.targets = {{"y", 0.0, 0.0, 1.0}};
  p.lo = {0, 0};
  p.hi = {10, 10};
  SearchConfig config;
  config.pso.swarm = 20;
  config.pso.iterations = 50;
  const auto r = mc_pso(p, config, 11);
  ASSERT_FALSE(r.candidates.empty());
  EXPECT_EQ(r.targets[0].band, 0.5);
  for (const auto &c : r.candidates) {
    EXPECT_LE(std::abs(c.values[0] - c.values[1]), 0.5);
    EXPECT_GE(c.values[0] + c.values[1], 1);  // builtin: at least one atom
    EXPECT_EQ(c.loss, 0.0);
  }
  // Bound rules restrict the box.
  p.rules = RuleSet::parse("bound\telement:C\t3\t3\n");
  const auto bounded = mc_pso(p, config, 11);
  ASSERT_EQ(bounded.candidates.size(), 1u);
  EXPECT_EQ(bounded.candidates[0].values, (std::vector<int>{3, 3}));
}

TEST(McPso, InfeasibleConfigurationGivesEmptyArchive) {
  SearchProblem p;
  p.models = {difference_model()};
  p.targets = {{"y", 5.0, 0.0, 1.0}};
  p.lo = {0, 0};
  p.hi = {0, 0};
  SearchConfig config;
  config.pso.swarm = 5;
  config.pso.iterations = 10;
  const auto r = mc_pso(p, config, 1);
  EXPECT_TRUE(r.candidates.empty());
  EXPECT_EQ(r.iterations, 10);
}

TEST(McPso, Validation) {
  SearchProblem p;
  p.models = {difference_model()};
  p.lo = {0, 0};
  p.hi = {1, 1};
  EXPECT_THROW(mc_pso(p, {}, 1), ValidationError);  // no targets
  p.targets = {{"z", 0.0, 0.0, 1.0}};
  EXPECT_THROW(mc_pso(p, {}, 1), ValidationError);
  p.targets = {{"y", 0.0, -1.0, 1.0}};
  EXPECT_THROW(mc_pso(p, {}, 1), ValidationError);
  p.targets = {{"y", 0.0, 0.0, 1.0}};
  p.hi = {1};
  EXPECT_THROW(mc_pso(p, {}, 1), ValidationError);
}

PropertyTable qm9_sample(std::size_t n) {
  std::ifstream in(std::string(MID_SOURCE_DIR) + "/data/qm9_1k.csv");
  std::stringstream buf;
  buf << in.rdbuf();
  PropertyTable t = parse_property_csv(buf.str());
  t.molecules.erase(t.molecules.begin() + n, t.molecules.end());
  t.smiles.resize(n);
  t.values.resize(n);
  return t;
}

// Targets set to a training molecule's own prediction: its vector is a
// feasible zero-loss point, so the archive cannot stay empty.
TEST(McPso, KnownOptimumIsFound) {
  const PropertyTable t = qm9_sample(120);
  auto schema = std::make_shared<const FeatureSchema>(extract_vocabulary(t.molecules, {1, 2}));
  std::vector<std::vector<int>> rows;
  for (const auto &m : t.molecules) rows.push_back(encode(m, schema).values);
  RegressionModel model = train(design_matrix(rows), t.column("e_lumo"), ModelKind::Ridge, {0, 1.0});
  model.property = "e_lumo";
  model.schema = schema;
  model.sigma = 0.01;
  const auto index =
      build_feasibility_index(t.elements.members(), 3, t.molecules, schema.get());

  SearchProblem p;
  p.models = {model};
  p.targets = {{"e_lumo", model.predict(rows[5]), 0.0, 1.0}};
  p.index = &index;
  default_bounds(rows, p.lo, p.hi);
  p.starts = rows;
  SearchConfig config;
  config.pso.swarm = 40;
  config.pso.iterations = 30;
  config.max_candidates = 10;
  const auto r = mc_pso(p, config, 5);
  ASSERT_FALSE(r.candidates.empty());
  EXPECT_LT(r.candidates.front().loss, 1.0);
  for (const auto &c : r.candidates) {
    EXPECT_TRUE(is_feasible(*schema, c.values, &index, r.rules).ok);
    EXPECT_LE(std::abs(c.predicted[0] - p.targets[0].target), 0.01);
    EXPECT_DOUBLE_EQ(c.predicted[0], model.predict(c.values));
  }
  const auto again = mc_pso(p, config, 5);
  ASSERT_EQ(again.candidates.size(), r.candidates.size());
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    EXPECT_EQ(again.candidates[i].values, r.candidates[i].values);
  }
}

TEST(SearchConfig, JsonRoundtrip) {
  SearchConfig c;
  c.pso.swarm = 7;
  c.use_index = false;
  const auto j = c.to_json();
  EXPECT_EQ(SearchConfig::from_json(j).to_json(), j);
  EXPECT_THROW(SearchConfig::from_json(nlohmann::json{{"swarm", 0}}), ValidationError);
}

}  // namespace
}  // namespace mid
