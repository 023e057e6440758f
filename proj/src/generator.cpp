//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "mid/generator.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "mid/canon.hpp"
#include "mid/error.hpp"
#include "mid/rings.hpp"
#include "mid/smiles.hpp"

namespace mid {

namespace {

int template_free_valence(const Graph &g) {
  int total = 0;
  for (int a = 0; a < g.num_atoms(); ++a) {
    total += valence(g.element(a)) - g.bond_order_sum(a);
  }
  return total;
}

nlohmann::ordered_json range_json(const Range &r) {
  nlohmann::ordered_json j;
  j["lo"] = r.lo;
  if (r.hi == Range::kUnbounded) {
    j["hi"] = nullptr;
  } else {
    j["hi"] = r.hi;
  }
  return j;
}

Range range_from_json(const nlohmann::json &j) {
  Range r;
  r.lo = j.at("lo").get<int>();
  r.hi = j.at("hi").is_null() ? Range::kUnbounded : j.at("hi").get<int>();
  return r;
}

void check_range(const Range &r, const std::string &what) {
  if (r.lo < 0 || r.lo > r.hi) {
    throw ValidationError("invalid range for " + what + ": lo must satisfy 0 <= lo <= hi");
  }
}

}  // namespace

UnitTemplate UnitTemplate::from_graph(Graph graph, Range count) {
  if (graph.num_atoms() == 0 || !graph.connected()) {
    throw ValidationError("unit template must be a connected graph");
  }
  for (int a = 0; a < graph.num_atoms(); ++a) {
    if (graph.bond_order_sum(a) > valence(graph.element(a))) {
      throw ValidationError("unit template exceeds the valence of atom " + std::to_string(a));
    }
  }
  check_range(count, "unit count");
  UnitTemplate t;
  t.key = canonical_key(graph);
  if (template_free_valence(graph) == 0) {
    throw ValidationError("unit template '" + t.key + "' has no free valence to attach");
  }
  // Store the template in canonical numbering so equal keys give equal
  // graphs.
  t.graph = graph_from_key(t.key);
  t.count = count;
  return t;
}

bool GenerationSpec::edge_pass_enabled() const {
  switch (edge_pass) {
    case EdgePass::On:
      return true;
    case EdgePass::Off:
      return false;
    case EdgePass::Auto:
      return rings.hi > 0;
  }
  return false;
}

int GenerationSpec::total_free_atoms() const {
  int n = 0;
  for (const auto &[e, c] : atoms) n += c;
  return n;
}

void GenerationSpec::validate() const {
  int total = 0;
  for (const auto &[e, c] : atoms) {
    if (c < 0) throw ValidationError("atom counts must be non-negative");
    total += c;
  }
  for (const auto &u : units) {
    check_range(u.count, "unit " + u.key);
    if (u.count.hi > 0) ++total;
  }
  if (total < 1) throw ValidationError("generation needs at least one atom");
  for (const auto &f : fragments) check_range(f.range, "fragment " + f.pattern.key);
  check_range(rings, "rings");
  check_range(aromatic_rings, "aromatic rings");
  if (max_bond_order < 1 || max_bond_order > 3) {
    throw ValidationError("max bond order must be 1, 2 or 3");
  }
  if (time_budget_seconds < 0) throw ValidationError("time budget must be non-negative");
}

nlohmann::ordered_json GenerationSpec::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json a = nlohmann::ordered_json::object();
  for (const auto &[e, c] : atoms) a[std::string(symbol(e))] = c;
  j["atoms"] = std::move(a);
  auto frags = nlohmann::ordered_json::array();
  for (const auto &f : fragments) {
    auto r = range_json(f.range);
    frags.push_back({{"key", f.pattern.key}, {"lo", r["lo"]}, {"hi", r["hi"]}});
  }
  j["fragments"] = std::move(frags);
  j["rings"] = range_json(rings);
  j["aromatic_rings"] = range_json(aromatic_rings);
  auto us = nlohmann::ordered_json::array();
  for (const auto &u : units) {
    auto r = range_json(u.count);
    us.push_back({{"key", u.key}, {"lo", r["lo"]}, {"hi", r["hi"]}});
  }
  j["units"] = std::move(us);
  j["max_bond_order"] = max_bond_order;
  j["edge_pass"] = edge_pass == EdgePass::Auto ? "auto" : edge_pass == EdgePass::On ? "on" : "off";
  j["max_structures"] = max_structures;
  j["time_budget_seconds"] = time_budget_seconds;
  j["prune"] = prune;
  j["dedup"] = dedup;
  return j;
}

GenerationSpec GenerationSpec::from_json(const nlohmann::json &j) {
  try {
    GenerationSpec s;
    for (const auto &[sym, c] : j.at("atoms").items()) {
      auto e = element_from_symbol(sym);
      if (!e) throw ValidationError("unknown element '" + sym + "'");
      s.atoms[*e] = c.get<int>();
    }
    for (const auto &f : j.value("fragments", nlohmann::json::array())) {
      s.fragments.push_back(
          {FragmentPattern::from_key(f.at("key").get<std::string>()), range_from_json(f)});
    }
    if (j.contains("rings")) s.rings = range_from_json(j.at("rings"));
    if (j.contains("aromatic_rings")) s.aromatic_rings = range_from_json(j.at("aromatic_rings"));
    for (const auto &u : j.value("units", nlohmann::json::array())) {
      s.units.push_back(UnitTemplate::from_graph(graph_from_key(u.at("key").get<std::string>()),
                                                 range_from_json(u)));
    }
    s.max_bond_order = j.value("max_bond_order", 3);
    const std::string pass = j.value("edge_pass", "auto");
    if (pass == "auto") {
      s.edge_pass = EdgePass::Auto;
    } else if (pass == "on") {
      s.edge_pass = EdgePass::On;
    } else if (pass == "off") {
      s.edge_pass = EdgePass::Off;
    } else {
      throw ValidationError("edge_pass must be auto, on or off");
    }
    s.max_structures = j.value("max_structures", std::size_t{20});
    s.time_budget_seconds = j.value("time_budget_seconds", 0.0);
    s.prune = j.value("prune", true);
    s.dedup = j.value("dedup", true);
    s.validate();
    return s;
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError(std::string("malformed generation spec: ") + e.what());
  }
}

int PartialGraph::ring_count() const {
  return graph.num_atoms() == 0 ? 0 : graph.num_bonds() - graph.num_atoms() + 1;
}

int PartialGraph::free_valence(int atom) const {
  return valence(graph.element(atom)) - graph.bond_order_sum(atom);
}

int PartialGraph::total_free_valence() const {
  int total = 0;
  for (int a = 0; a < graph.num_atoms(); ++a) total += free_valence(a);
  return total;
}

int PartialGraph::remaining_atoms() const {
  int n = 0;
  for (const auto &[e, c] : remaining) n += c;
  return n;
}

namespace {

int max_fragment_edges(const GenerationSpec &spec) {
  int m = 0;
  for (const auto &f : spec.fragments) m = std::max(m, f.pattern.edge_count);
  return m;
}

// Maps bond subsets to constrained-fragment indices (-1: unconstrained).
class FragmentIndexer {
 public:
  explicit FragmentIndexer(const GenerationSpec &spec) : max_edges_(max_fragment_edges(spec)) {
    for (std::size_t i = 0; i < spec.fragments.size(); ++i) {
      by_key_.emplace(spec.fragments[i].pattern.key, static_cast<int>(i));
    }
  }

  int max_edges() const { return max_edges_; }

  int index(const Graph &g, std::span<const int> bonds) {
    const std::uint64_t code = FragmentKeyCache::raw_code(g, bonds);
    auto it = memo_.find(code);
    if (it != memo_.end()) return it->second;
    auto k = by_key_.find(keys_.key(g, bonds));
    const int idx = k == by_key_.end() ? -1 : k->second;
    memo_.emplace(code, idx);
    return idx;
  }

  // Adds the occurrences created by `new_bonds` (subsets containing at
  // least one of them) to `counts`.
  void add(const Graph &g, const std::vector<int> &new_bonds, std::vector<int> &counts) {
    if (max_edges_ == 0) return;
    for (std::size_t i = 0; i < new_bonds.size(); ++i) {
      for_each_connected_subset_containing(
          g, new_bonds[i], max_edges_, [&](std::span<const int> bonds) {
            for (std::size_t j = 0; j < i; ++j) {
              if (std::find(bonds.begin(), bonds.end(), new_bonds[j]) != bonds.end()) return;
            }
            const int idx = index(g, bonds);
            if (idx >= 0) ++counts[idx];
          });
    }
  }

 private:
  int max_edges_;
  std::unordered_map<std::string, int> by_key_;
  std::unordered_map<std::uint64_t, int> memo_;
  FragmentKeyCache keys_;
};

}  // namespace

PartialGraph PartialGraph::from_graph(Graph graph, const GenerationSpec &spec,
                                      std::map<Element, int> remaining) {
  PartialGraph pg;
  pg.graph = std::move(graph);
  pg.remaining = std::move(remaining);
  pg.units_placed.assign(spec.units.size(), 0);
  pg.fragment_counts.assign(spec.fragments.size(), 0);
  FragmentIndexer indexer(spec);
  std::vector<int> all(pg.graph.num_bonds());
  std::iota(all.begin(), all.end(), 0);
  indexer.add(pg.graph, all, pg.fragment_counts);
  return pg;
}

bool check_termination(const PartialGraph &g, const GenerationSpec &spec) {
  // (a) Fragment and ring counts never decrease as atoms or bonds are
  // added.
  for (std::size_t i = 0; i < spec.fragments.size(); ++i) {
    if (g.fragment_counts[i] > spec.fragments[i].range.hi) return true;
  }
  const int rings = g.ring_count();
  if (rings > spec.rings.hi) return true;

  const int free_total = g.total_free_valence();
  bool pieces_left = g.remaining_atoms() > 0;
  for (std::size_t t = 0; t < spec.units.size(); ++t) {
    if (g.units_placed[t] < spec.units[t].count.hi) pieces_left = true;
  }
  const bool can_add_pieces = g.ring_edges == 0 && pieces_left;
  const bool can_add_edges = spec.edge_pass_enabled() && free_total >= 2;

  // (b) Nothing left to add but a count is still short of its minimum.
  if (!can_add_pieces) {
    if (!can_add_edges) {
      for (std::size_t i = 0; i < spec.fragments.size(); ++i) {
        if (g.fragment_counts[i] < spec.fragments[i].range.lo) return true;
      }
      if (rings < spec.rings.lo) return true;
    } else if (rings + free_total / 2 < spec.rings.lo) {
      // Each closing edge adds one ring and uses at least two valences.
      return true;
    }
  }

  // (c) The open valences must be able to absorb every piece still
  // required. Attaching a piece by a single bond uses one open valence
  // and opens (its free valence - 1); placing pieces with the largest
  // net gain first is optimal, and optional pieces with a positive net
  // gain are credited up front.
  std::vector<int> nets;
  for (const auto &[e, c] : g.remaining) {
    for (int k = 0; k < c; ++k) nets.push_back(valence(e) - 2);
  }
  long long bonus = 0;
  for (std::size_t t = 0; t < spec.units.size(); ++t) {
    const int net = template_free_valence(spec.units[t].graph) - 2;
    const int placed = g.units_placed[t];
    const int required = std::max(0, spec.units[t].count.lo - placed);
    for (int k = 0; k < required; ++k) nets.push_back(net);
    if (net > 0 && spec.units[t].count.hi > std::max(placed, spec.units[t].count.lo)) {
      const long long optional =
          static_cast<long long>(spec.units[t].count.hi) - std::max(placed, spec.units[t].count.lo);
      bonus += std::min<long long>(optional, 1 << 20) * net;
    }
  }
  if (!nets.empty()) {
    if (g.ring_edges > 0) return true;
    std::sort(nets.begin(), nets.end(), std::greater<>());
    long long open = free_total + bonus;
    for (int net : nets) {
      if (open < 1) return true;
      open += net;
    }
  }
  return false;
}

bool satisfy_constraint(const PartialGraph &g, const GenerationSpec &spec) {
  if (g.remaining_atoms() != 0) return false;
  for (std::size_t t = 0; t < spec.units.size(); ++t) {
    if (!spec.units[t].count.contains(g.units_placed[t])) return false;
  }
  for (std::size_t i = 0; i < spec.fragments.size(); ++i) {
    if (!spec.fragments[i].range.contains(g.fragment_counts[i])) return false;
  }
  if (!spec.rings.contains(g.ring_count())) return false;
  if (spec.aromatic_rings != Range{} &&
      !spec.aromatic_rings.contains(aromatic_ring_count(g.graph))) {
    return false;
  }
  return true;
}

std::int64_t GenerationTrace::visited() const {
  std::int64_t total = 0;
  for (const auto &d : depths) total += d.visited;
  return total;
}

std::string GenerationTrace::format() const {
  std::ostringstream out;
  out << "depth\tvisited\tpruned\taccepted\trejected\n";
  for (std::size_t d = 0; d < depths.size(); ++d) {
    out << d << '\t' << depths[d].visited << '\t' << depths[d].pruned << '\t'
        << depths[d].accepted << '\t' << depths[d].rejected << '\n';
  }
  return out.str();
}

namespace {

struct Node {
  PartialGraph pg;
  std::vector<int> unit_of;        // atom -> unit
  std::vector<int> unit_kind;      // unit -> -1 (free atom) or template
  std::vector<int> unit_links;     // unit -> inter-unit bonds (tree phase)
  std::vector<int> atom_class;     // atom -> template orbit class, -1 free
  std::vector<char> internal;      // bond -> belongs to a template
  std::vector<int> orbit;          // atom -> orbit representative
  std::vector<std::vector<int>> generators;
};

struct TemplateInfo {
  std::vector<int> atom_class;    // template atom -> orbit index
  std::vector<int> attach_reps;   // one atom per orbit with free valence
  std::vector<int> free;          // template atom -> free valence
};

class Generator {
 public:
  Generator(const GenerationSpec &spec, const GenerationControl &control)
      : spec_(spec), control_(control), indexer_(spec), unit_mode_(!spec.units.empty()) {
    for (const auto &u : spec.units) {
      TemplateInfo info;
      CanonicalForm form = canonical_form(u.graph);
      info.atom_class.assign(u.graph.num_atoms(), 0);
      for (std::size_t k = 0; k < form.orbits.size(); ++k) {
        for (int a : form.orbits[k]) info.atom_class[a] = static_cast<int>(k);
      }
      for (int a = 0; a < u.graph.num_atoms(); ++a) {
        info.free.push_back(valence(u.graph.element(a)) - u.graph.bond_order_sum(a));
      }
      for (const auto &orbit : form.orbits) {
        if (info.free[orbit.front()] > 0) info.attach_reps.push_back(orbit.front());
      }
      templates_.push_back(std::move(info));
    }
    if (spec.time_budget_seconds > 0) {
      deadline_ = std::chrono::steady_clock::now() +
                  std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                      std::chrono::duration<double>(spec.time_budget_seconds));
      has_deadline_ = true;
    }
  }

  GenerationResult run() {
    for (Element e : kAllElements) {
      auto it = spec_.atoms.find(e);
      if (it == spec_.atoms.end() || it->second <= 0 || stop_) continue;
      Node seed = empty_node();
      add_free_atom(seed, e, -1, 0);
      finish_symmetry(seed);
      visit(seed, 0);
    }
    for (std::size_t t = 0; t < spec_.units.size() && !stop_; ++t) {
      if (spec_.units[t].count.hi <= 0) continue;
      Node seed = empty_node();
      add_unit(seed, static_cast<int>(t), -1, -1, 0);
      finish_symmetry(seed);
      visit(seed, 0);
    }
    return std::move(result_);
  }

 private:
  Node empty_node() const {
    Node n;
    n.pg.remaining = spec_.atoms;
    n.pg.units_placed.assign(spec_.units.size(), 0);
    n.pg.fragment_counts.assign(spec_.fragments.size(), 0);
    return n;
  }

  // Adds a free atom, bonded to `anchor` unless anchor < 0.
  void add_free_atom(Node &n, Element e, int anchor, int order) {
    const int a = n.pg.graph.add_atom(e);
    --n.pg.remaining[e];
    n.unit_of.push_back(static_cast<int>(n.unit_kind.size()));
    n.unit_kind.push_back(-1);
    n.unit_links.push_back(0);
    n.atom_class.push_back(-1);
    if (anchor >= 0) {
      const int b = n.pg.graph.add_bond(anchor, a, order);
      n.internal.push_back(0);
      ++n.unit_links[n.unit_of[anchor]];
      ++n.unit_links[n.unit_of[a]];
      indexer_.add(n.pg.graph, {b}, n.pg.fragment_counts);
    }
  }

  // Adds a template instance; `attach` (template atom) bonds to `anchor`.
  // Returns the graph index of the instance's first atom.
  int add_unit(Node &n, int t, int anchor, int attach, int order) {
    const Graph &tg = spec_.units[t].graph;
    const int offset = n.pg.graph.num_atoms();
    const int unit = static_cast<int>(n.unit_kind.size());
    n.unit_kind.push_back(t);
    n.unit_links.push_back(0);
    for (int a = 0; a < tg.num_atoms(); ++a) {
      n.pg.graph.add_atom(tg.element(a));
      n.unit_of.push_back(unit);
      n.atom_class.push_back(templates_[t].atom_class[a]);
    }
    std::vector<int> fresh;
    for (const Bond &b : tg.bonds()) {
      fresh.push_back(n.pg.graph.add_bond(offset + b.a, offset + b.b, b.order));
      n.internal.push_back(1);
    }
    if (anchor >= 0) {
      fresh.push_back(n.pg.graph.add_bond(anchor, offset + attach, order));
      n.internal.push_back(0);
      ++n.unit_links[n.unit_of[anchor]];
      ++n.unit_links[unit];
    }
    ++n.pg.units_placed[t];
    indexer_.add(n.pg.graph, fresh, n.pg.fragment_counts);
    return offset;
  }

  ColoredGraph colored(const Node &n) const {
    const Graph &g = n.pg.graph;
    if (!unit_mode_) return to_colored_graph(g);
    const int size = g.num_atoms();
    ColoredGraph out;
    out.resize(size);
    std::vector<std::array<int, 4>> keys(size);
    for (int v = 0; v < size; ++v) {
      keys[v] = {n.unit_kind[n.unit_of[v]] + 1, n.atom_class[v],
                 static_cast<int>(g.element(v)), g.degree(v)};
    }
    for (int b = 0; b < g.num_bonds(); ++b) {
      const Bond &bond = g.bonds()[b];
      out.add_edge(bond.a, bond.b, n.internal[b] ? bond.order + 3 : bond.order);
    }
    std::vector<std::array<int, 4>> sorted = keys;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (int v = 0; v < size; ++v) {
      out.color[v] = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), keys[v]) -
                                      sorted.begin());
    }
    return out;
  }

  void finish_symmetry(Node &n) const {
    Labeling lab = canonical_labeling(colored(n));
    n.orbit = std::move(lab.orbit);
    n.generators = std::move(lab.generators);
  }

  DepthCounts &at(int depth) {
    auto &d = result_.trace.depths;
    if (static_cast<int>(d.size()) <= depth) d.resize(depth + 1);
    return d[depth];
  }

  // Canonical test for a child whose newest unit starts at atom `first`:
  // the new unit must lie in the automorphism orbit of the canonical
  // leaf unit (the leaf unit holding the earliest canonical position).
  bool accept_piece(Node &child, int first) {
    const ColoredGraph cg = colored(child);
    if (!unit_mode_) {
      // Leaves sort first, so canonical position 0 is a leaf; refinement
      // alone rules out most candidates.
      if (refined_colors(cg)[first] != 0) return false;
      Labeling lab = canonical_labeling(cg);
      const bool ok = lab.orbit[first] == lab.orbit[lab.order[0]];
      if (ok) {
        child.orbit = std::move(lab.orbit);
        child.generators = std::move(lab.generators);
      }
      return ok;
    }
    Labeling lab = canonical_labeling(cg);
    const int size = child.pg.graph.num_atoms();
    int best_unit = -1;
    for (int p = 0; p < size && best_unit < 0; ++p) {
      const int v = lab.order[p];
      if (child.unit_links[child.unit_of[v]] == 1) best_unit = child.unit_of[v];
    }
    bool ok = false;
    for (int v = 0; v < size && !ok; ++v) {
      if (child.unit_of[v] == best_unit && lab.orbit[v] == lab.orbit[first]) ok = true;
    }
    if (ok) {
      child.orbit = std::move(lab.orbit);
      child.generators = std::move(lab.generators);
    }
    return ok;
  }

  // Canonical test for a ring-closing child: the new bond must lie in the
  // automorphism orbit of the canonical removable bond, the non-bridge
  // bond between units with the smallest canonical endpoint pair.
  bool accept_edge(Node &child, int x, int y) {
    Labeling lab = canonical_labeling(colored(child));
    const Graph &g = child.pg.graph;
    const std::vector<char> bridges = bridge_flags(g);
    std::pair<int, int> best{g.num_atoms(), g.num_atoms()};
    int best_a = -1, best_b = -1;
    for (int b = 0; b < g.num_bonds(); ++b) {
      if (bridges[b] || child.internal[b]) continue;
      const Bond &bond = g.bonds()[b];
      const int pa = lab.position[bond.a], pb = lab.position[bond.b];
      const std::pair<int, int> key{std::min(pa, pb), std::max(pa, pb)};
      if (key < best) {
        best = key;
        best_a = bond.a;
        best_b = bond.b;
      }
    }
    const std::pair<int, int> target = std::minmax(best_a, best_b);
    // Orbit of the new bond under the harvested generators.
    std::set<std::pair<int, int>> seen = {std::pair<int, int>(std::minmax(x, y))};
    std::vector<std::pair<int, int>> queue(seen.begin(), seen.end());
    bool ok = false;
    for (std::size_t i = 0; i < queue.size() && !ok; ++i) {
      if (queue[i] == target) {
        ok = true;
        break;
      }
      for (const auto &gen : lab.generators) {
        std::pair<int, int> img = std::minmax(gen[queue[i].first], gen[queue[i].second]);
        if (seen.insert(img).second) queue.push_back(img);
      }
    }
    if (ok) {
      child.orbit = std::move(lab.orbit);
      child.generators = std::move(lab.generators);
    }
    return ok;
  }

  bool complete(const Node &n) const {
    if (n.pg.remaining_atoms() != 0) return false;
    for (std::size_t t = 0; t < spec_.units.size(); ++t) {
      if (n.pg.units_placed[t] < spec_.units[t].count.lo) return false;
    }
    return true;
  }

  bool pieces_left(const Node &n) const {
    if (n.pg.remaining_atoms() > 0) return true;
    for (std::size_t t = 0; t < spec_.units.size(); ++t) {
      if (n.pg.units_placed[t] < spec_.units[t].count.hi) return true;
    }
    return false;
  }

  void poll() {
    if (control_.cancel && control_.cancel->load(std::memory_order_relaxed)) {
      throw CancelledError();
    }
    if (has_deadline_ && std::chrono::steady_clock::now() >= deadline_) {
      result_.timed_out = true;
      stop_ = true;
    }
  }

  void emit(const Node &n) {
    Molecule m = Molecule::from_graph(n.pg.graph);
    std::string key = canonical_key(m);
    if (spec_.dedup && !seen_.insert(key).second) return;
    result_.smiles.push_back(write_smiles(m));
    result_.keys.push_back(std::move(key));
    if (control_.on_emit) control_.on_emit(result_.smiles.size());
    if (spec_.max_structures > 0 && result_.smiles.size() >= spec_.max_structures) {
      result_.capped = true;
      stop_ = true;
    }
  }

  void visit(Node &n, int depth) {
    ++at(depth).visited;
    poll();
    if (stop_) return;
    if (spec_.prune && check_termination(n.pg, spec_)) {
      ++at(depth).pruned;
      return;
    }
    const bool done = complete(n);
    if (done && satisfy_constraint(n.pg, spec_)) emit(n);
    if (stop_) return;
    if (n.pg.ring_edges == 0 && pieces_left(n)) grow_pieces(n, depth);
    if (stop_) return;
    if (done && spec_.edge_pass_enabled()) grow_edges(n, depth);
  }

  void grow_pieces(const Node &n, int depth) {
    const int size = n.pg.graph.num_atoms();
    for (int v = 0; v < size && !stop_; ++v) {
      if (n.orbit[v] != v) continue;
      const int open = n.pg.free_valence(v);
      if (open < 1) continue;
      for (Element e : kAllElements) {
        auto it = n.pg.remaining.find(e);
        if (it == n.pg.remaining.end() || it->second <= 0) continue;
        const int top = std::min({open, valence(e), spec_.max_bond_order});
        for (int order = 1; order <= top && !stop_; ++order) {
          Node child = n;
          add_free_atom(child, e, v, order);
          if (!accept_piece(child, size)) {
            ++at(depth + 1).rejected;
            continue;
          }
          ++at(depth + 1).accepted;
          visit(child, depth + 1);
        }
      }
      for (std::size_t t = 0; t < spec_.units.size() && !stop_; ++t) {
        if (n.pg.units_placed[t] >= spec_.units[t].count.hi) continue;
        for (int a : templates_[t].attach_reps) {
          const int top = std::min({open, templates_[t].free[a], spec_.max_bond_order});
          for (int order = 1; order <= top && !stop_; ++order) {
            Node child = n;
            const int first = add_unit(child, static_cast<int>(t), v, a, order);
            if (!accept_piece(child, first)) {
              ++at(depth + 1).rejected;
              continue;
            }
            ++at(depth + 1).accepted;
            visit(child, depth + 1);
          }
        }
      }
    }
  }

  void grow_edges(const Node &n, int depth) {
    const Graph &g = n.pg.graph;
    const int size = g.num_atoms();
    std::vector<std::pair<int, int>> pairs;
    std::vector<int> index(size * size, -1);
    for (int u = 0; u < size; ++u) {
      if (n.pg.free_valence(u) < 1) continue;
      for (int w = u + 1; w < size; ++w) {
        if (n.pg.free_valence(w) < 1 || g.bond_order(u, w)) continue;
        index[u * size + w] = static_cast<int>(pairs.size());
        pairs.emplace_back(u, w);
      }
    }
    if (pairs.empty()) return;
    // Pair orbits under the parent's automorphisms.
    std::vector<int> parent(pairs.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto &gen : n.generators) {
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto [a, b] = std::minmax(gen[pairs[i].first], gen[pairs[i].second]);
        const int j = index[a * size + b];
        if (j < 0) continue;
        int ra = find(static_cast<int>(i)), rb = find(j);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
    for (std::size_t i = 0; i < pairs.size() && !stop_; ++i) {
      if (find(static_cast<int>(i)) != static_cast<int>(i)) continue;
      auto [u, w] = pairs[i];
      const int top = std::min({n.pg.free_valence(u), n.pg.free_valence(w), spec_.max_bond_order});
      for (int order = 1; order <= top && !stop_; ++order) {
        Node child = n;
        const int b = child.pg.graph.add_bond(u, w, order);
        child.internal.push_back(0);
        ++child.pg.ring_edges;
        indexer_.add(child.pg.graph, {b}, child.pg.fragment_counts);
        if (!accept_edge(child, u, w)) {
          ++at(depth + 1).rejected;
          continue;
        }
        ++at(depth + 1).accepted;
        visit(child, depth + 1);
      }
    }
  }

  const GenerationSpec &spec_;
  const GenerationControl &control_;
  FragmentIndexer indexer_;
  bool unit_mode_;
  std::vector<TemplateInfo> templates_;
  std::chrono::steady_clock::time_point deadline_;
  bool has_deadline_ = false;
  bool stop_ = false;
  std::unordered_set<std::string> seen_;
  GenerationResult result_;
};

}  // namespace

GenerationResult generate(const GenerationSpec &spec, const GenerationControl &control) {
  spec.validate();
  Generator gen(spec, control);
  return gen.run();
}

GenerationSpec spec_from_vector(const FeatureVector &x, int tolerance) {
  if (!x.schema) throw ValidationError("feature vector has no schema");
  if (tolerance < 0) throw ValidationError("tolerance must be non-negative");
  if (x.values.size() != x.schema->size()) {
    throw ValidationError("feature vector length does not match its schema");
  }
  GenerationSpec spec;
  auto widen = [&](int v) { return Range{std::max(0, v - tolerance), v + tolerance}; };
  bool has_elements = false;
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    const Descriptor &d = (*x.schema)[i];
    const int v = x.values[i];
    if (v < 0) throw ValidationError("feature values must be non-negative");
    switch (d.kind) {
      case DescriptorKind::Element:
        has_elements = true;
        if (v > 0) spec.atoms[d.element] = v;
        break;
      case DescriptorKind::Rings:
        spec.rings = widen(v);
        break;
      case DescriptorKind::AromaticRings:
        spec.aromatic_rings = widen(v);
        break;
      case DescriptorKind::Fragment:
        spec.fragments.push_back({*d.fragment, widen(v)});
        break;
    }
  }
  if (!has_elements) throw ValidationError("schema lacks element count descriptors");
  return spec;
}

}  // namespace mid
