//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include <random>

#include "mid/canon.hpp"
#include "mid/error.hpp"
#include "mid/featurizer.hpp"
#include "mid/smiles.hpp"
#include "oracle.hpp"

using namespace mid;

namespace {

FragmentPattern pattern(std::string_view smiles) {
  return FragmentPattern::from_graph(parse_smiles(smiles).graph());
}

std::vector<std::string> ids(const FeatureSchema &s) {
  std::vector<std::string> out;
  for (const auto &d : s.descriptors()) out.push_back(d.id());
  return out;
}

int brute_count(const Graph &g, const FragmentPattern &f) {
  int n = 0;
  for (unsigned mask : oracle::connected_bond_subsets(g, f.edge_count)) {
    if (__builtin_popcount(mask) != f.edge_count) continue;
    n += oracle::isomorphic(oracle::subgraph_of_mask(g, mask), f.graph);
  }
  return n;
}

const std::vector<Element> kCNO = {Element::C, Element::N, Element::O};

}  // namespace

TEST(Fragments, KeyRoundTrip) {
  FragmentPattern f = pattern("CC=O");
  EXPECT_EQ(f.edge_count, 2);
  FragmentPattern g = FragmentPattern::from_key(f.key);
  EXPECT_EQ(g.key, f.key);
  EXPECT_TRUE(oracle::isomorphic(f.graph, g.graph));
  EXPECT_THROW(FragmentPattern::from_key("C,C|2x"), Error);
  EXPECT_THROW(FragmentPattern::from_graph(parse_smiles("C").graph()), ValidationError);
  EXPECT_THROW(FragmentPattern::from_graph(parse_smiles("CCCCCC").graph()),
               ValidationError);
}

TEST(Fragments, HandCounts) {
  EXPECT_EQ(count_fragment(parse_smiles("CCC"), pattern("CCC")), 1);
  Molecule benzene = parse_smiles("C1=CC=CC=C1");
  EXPECT_EQ(count_fragment(benzene, pattern("C=C")), 3);
  EXPECT_EQ(count_fragment(benzene, pattern("CC")), 3);
  EXPECT_EQ(count_fragment(parse_smiles("C1CCCCC1"), pattern("CCC")), 6);
  // Distinct bond subsets: the three arms of isobutane give 3 C-C-C paths.
  EXPECT_EQ(count_fragment(parse_smiles("CC(C)C"), pattern("CCC")), 3);
  EXPECT_EQ(count_fragment(parse_smiles("CC(C)C"), pattern("CC(C)C")), 1);
}

TEST(Fragments, CountMatchesBondSubsetOracle) {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 150; ++trial) {
    Graph g = oracle::random_graph(rng, 2 + trial % 5, kCNO, 1.5, 0.3);
    Molecule m = Molecule::from_graph(g);
    // Every fragment the oracle sees, counted both ways.
    std::set<std::string> seen;
    for (unsigned mask : oracle::connected_bond_subsets(g, 4)) {
      FragmentPattern f = FragmentPattern::from_graph(oracle::subgraph_of_mask(g, mask));
      if (!seen.insert(f.key).second) continue;
      ASSERT_EQ(count_fragment(m, f), brute_count(g, f)) << f.key;
    }
    // The census enumerates the same subsets.
    FragmentKeyCache cache;
    auto census = fragment_census(g, 4, cache);
    int total = 0;
    for (const auto &[key, count] : census) total += count;
    EXPECT_EQ(total, static_cast<int>(oracle::connected_bond_subsets(g, 4).size()));
  }
}

TEST(Fragments, SubsetsContainingBond) {
  Graph g = parse_smiles("CC1CC(O)C1").graph();
  for (int b = 0; b < g.num_bonds(); ++b) {
    int expected = 0;
    for (unsigned mask : oracle::connected_bond_subsets(g, 4)) expected += (mask >> b) & 1u;
    int got = 0;
    for_each_connected_subset_containing(g, b, 4, [&](std::span<const int> bonds) {
      ++got;
      EXPECT_TRUE(std::find(bonds.begin(), bonds.end(), b) != bonds.end());
    });
    EXPECT_EQ(got, expected);
  }
}

TEST(Featurizer, EthanolVocabulary) {
  std::vector<Molecule> data = {parse_smiles("CCO")};
  FeatureSchema s = extract_vocabulary(data, {1});
  const std::string cc = pattern("CC").key, co = pattern("CO").key;
  EXPECT_EQ(ids(s), (std::vector<std::string>{"element:C", "element:O", "rings",
                                              "aromatic_rings", "fragment:" + cc,
                                              "fragment:" + co}));
  auto ref = std::make_shared<const FeatureSchema>(s);
  EXPECT_EQ(encode(data[0], ref).values, (std::vector<int>{2, 1, 0, 0, 1, 1}));
  EXPECT_EQ(encode(parse_smiles("C"), ref).values, (std::vector<int>{1, 0, 0, 0, 0, 0}));
}

TEST(Featurizer, BenzeneVocabulary) {
  FeatureSchema s = extract_vocabulary({parse_smiles("c1ccccc1")}, {1});
  ASSERT_EQ(s.size(), 5u);
  EXPECT_EQ(s[3].id(), "fragment:" + pattern("CC").key);
  EXPECT_EQ(s[4].id(), "fragment:" + pattern("C=C").key);
}

TEST(Featurizer, Errors) {
  EXPECT_THROW(extract_vocabulary({}, {1}), ValidationError);
  EXPECT_THROW(extract_vocabulary({parse_smiles("CC")}, {5}), ValidationError);
}

TEST(Featurizer, SchemaOrderingAndManifest) {
  std::vector<Molecule> data = {parse_smiles("CC(=O)NC1=CC=CC=C1"), parse_smiles("OCC#N"),
                                parse_smiles("FC1CC1")};
  FeatureSchema s = extract_vocabulary(data, {1, 2, 3, 4});
  int last_edges = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i > 0) {
      EXPECT_FALSE(s[i].kind < s[i - 1].kind);
    }
    if (s[i].kind == DescriptorKind::Fragment) {
      EXPECT_GE(s[i].edge_count(), last_edges);
      last_edges = s[i].edge_count();
    }
  }
  EXPECT_EQ(s.elements(), (std::vector<Element>{Element::C, Element::N, Element::O, Element::F}));
  FeatureSchema back = FeatureSchema::from_manifest(s.manifest());
  EXPECT_EQ(back, s);
  EXPECT_NE(s.manifest().find("rings\t-\t0\n"), std::string::npos);
  EXPECT_THROW(FeatureSchema::from_manifest("element\tC\n"), ValidationError);
}

TEST(Featurizer, VocabularyClosureAndInvariance) {
  std::mt19937 rng(4);
  std::vector<Molecule> data;
  for (int i = 0; i < 40; ++i)
    data.push_back(Molecule::from_graph(oracle::random_graph(rng, 3 + i % 7, kCNO, 1.0, 0.3)));
  auto schema = std::make_shared<const FeatureSchema>(extract_vocabulary(data, {1, 2, 3, 4}));
  for (const Molecule &m : data) {
    FragmentKeyCache cache;
    auto census = fragment_census(m.graph(), 4, cache);
    FeatureVector v = encode(m, schema);
    for (const auto &[key, count] : census) {
      auto idx = schema->fragment_index(key);
      ASSERT_TRUE(idx.has_value()) << key;
      EXPECT_EQ(v.values[*idx], count);
    }
    Graph shuffled = oracle::relabel(m.graph(), oracle::random_permutation(rng, m.num_atoms()));
    EXPECT_EQ(encode(Molecule::from_graph(shuffled), schema).values, v.values);
    EXPECT_EQ(encode(parse_smiles(write_smiles(m)), schema).values, v.values);
  }
}

TEST(Featurizer, AddingABondNeverDecreasesFragmentCounts) {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 60; ++trial) {
    Graph g = oracle::random_graph(rng, 3 + trial % 6, kCNO, 0.0, 0.0);
    FragmentKeyCache cache;
    auto before = fragment_census(g, 4, cache);
    // Close a ring between two atoms with spare valence, if any.
    for (int i = 0; i < g.num_atoms(); ++i) {
      for (int j = i + 1; j < g.num_atoms(); ++j) {
        if (g.bond_order(i, j) || g.bond_order_sum(i) >= valence(g.element(i)) ||
            g.bond_order_sum(j) >= valence(g.element(j)))
          continue;
        Graph h = g;
        h.add_bond(i, j, 1);
        auto after = fragment_census(h, 4, cache);
        for (const auto &[key, count] : before) EXPECT_GE(after[key], count);
      }
    }
  }
}

TEST(Featurizer, MergeIsIdempotentAndCommutative) {
  FeatureSchema a = extract_vocabulary({parse_smiles("CCO"), parse_smiles("CC=O")}, {1, 2});
  FeatureSchema b = extract_vocabulary({parse_smiles("OCC=O"), parse_smiles("OC=O")}, {1, 3});
  EXPECT_EQ(merge_schemas(a, a), a);
  EXPECT_EQ(merge_schemas(a, b), merge_schemas(b, a));
  FeatureSchema m = merge_schemas(a, b);
  EXPECT_GE(m.size(), std::max(a.size(), b.size()));
  EXPECT_LE(m.size(), a.size() + b.size());
  FeatureSchema n = extract_vocabulary({parse_smiles("CCN")}, {1});
  EXPECT_THROW(merge_schemas(a, n), ValidationError);
}

TEST(Featurizer, FilterByKeyList) {
  FeatureSchema s = extract_vocabulary({parse_smiles("CCO")}, {1});
  FeatureSchema kept = s.filter({"element:C", "rings"}, true);
  EXPECT_EQ(ids(kept), (std::vector<std::string>{"element:C", "rings"}));
  FeatureSchema dropped = s.filter({"aromatic_rings"}, false);
  EXPECT_EQ(dropped.size(), s.size() - 1);
}
