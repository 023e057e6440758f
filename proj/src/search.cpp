//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "mid/search.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

#include "mid/canon.hpp"
#include "mid/error.hpp"
#include "mid/fragments.hpp"
#include "mid/generator.hpp"
#include "mid/hash.hpp"

namespace mid {

namespace {

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_number(std::string_view text, const std::string &what) {
  double v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ValidationError("invalid " + what + " '" + std::string(text) + "'");
  }
  return v;
}

int parse_int(std::string_view text, const std::string &what) {
  int v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ValidationError("invalid " + what + " '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(text.substr(start));
      return out;
    }
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::size_t require_index(const FeatureSchema &schema, const std::string &id) {
  auto i = schema.index_of(id);
  if (!i) throw ValidationError("rule refers to unknown descriptor '" + id + "'");
  return *i;
}

// Rules resolved against a schema for repeated evaluation.
struct CompiledRules {
  struct Bound {
    std::size_t index;
    int lo, hi;
    const FeatureBound *source;
  };
  struct Linear {
    std::vector<std::pair<std::size_t, double>> terms;
    Relation relation;
    double constant;
    const LinearRule *source;
  };
  std::vector<Bound> bounds;
  std::vector<Linear> linear;

  CompiledRules(const FeatureSchema &schema, const RuleSet &rules) {
    for (const auto &b : rules.bounds) {
      bounds.push_back({require_index(schema, b.id), b.lo, b.hi, &b});
    }
    for (const auto &r : rules.linear) {
      Linear l{{}, r.relation, r.constant, &r};
      for (const auto &[id, c] : r.coefficients) l.terms.emplace_back(require_index(schema, id), c);
      linear.push_back(std::move(l));
    }
  }
};

// Slack below which a linear rule counts as satisfied; coefficients are
// parsed decimals, so exact comparisons would be brittle.
constexpr double kRuleSlack = 1e-9;

Feasibility evaluate(const CompiledRules &rules, const FeatureSchema &schema,
                     const std::vector<int> &values, const FeasibilityIndex *index) {
  Feasibility out;
  auto fail = [&](std::string reason) {
    if (out.ok) out.reason = std::move(reason);
    out.ok = false;
    ++out.violations;
  };
  for (const auto &b : rules.bounds) {
    const int v = values[b.index];
    if (v < b.lo || v > b.hi) {
      fail("bound " + b.source->id + " [" + std::to_string(b.lo) + ", " + std::to_string(b.hi) +
           "] violated by " + std::to_string(v));
    }
  }
  for (const auto &l : rules.linear) {
    double lhs = 0;
    for (const auto &[i, c] : l.terms) lhs += c * values[i];
    const bool ok = l.relation == Relation::Le ? lhs <= l.constant + kRuleSlack
                                               : lhs >= l.constant - kRuleSlack;
    if (!ok) {
      fail("rule " + l.source->expression() + (l.relation == Relation::Le ? " <= " : " >= ") +
           format_number(l.constant) + " violated (lhs " + format_number(lhs) + ")");
    }
  }
  if (index) {
    const SubgraphTuple t = subgraph_tuple(schema, values);
    if (!index->contains(t)) {
      fail("subgraph tuple (" + std::to_string(t[0]) + ", " + std::to_string(t[1]) + ", " +
           std::to_string(t[2]) + ", " + std::to_string(t[3]) + ") not in feasibility index");
    }
  }
  return out;
}

}  // namespace

double LinearRule::lhs(const FeatureSchema &schema, const std::vector<int> &values) const {
  double total = 0;
  for (const auto &[id, c] : coefficients) total += c * values[require_index(schema, id)];
  return total;
}

bool LinearRule::holds(const FeatureSchema &schema, const std::vector<int> &values) const {
  const double v = lhs(schema, values);
  return relation == Relation::Le ? v <= constant + kRuleSlack : v >= constant - kRuleSlack;
}

std::string LinearRule::expression() const {
  std::string out;
  for (const auto &[id, c] : coefficients) {
    if (!out.empty()) out += ' ';
    out += format_number(c) + "*" + id;
  }
  return out;
}

LinearRule LinearRule::parse(std::string_view expr, std::string_view rel,
                             std::string_view constant) {
  LinearRule rule;
  std::istringstream in{std::string(expr)};
  std::string token;
  while (in >> token) {
    double coef = 1.0;
    std::string id;
    const auto star = token.find('*');
    if (star != std::string::npos) {
      std::string_view c(token.data(), star);
      if (!c.empty() && c.front() == '+') c.remove_prefix(1);
      coef = parse_number(c, "coefficient");
      id = token.substr(star + 1);
    } else if (token.front() == '-' || token.front() == '+') {
      coef = token.front() == '-' ? -1.0 : 1.0;
      id = token.substr(1);
    } else {
      id = token;
    }
    if (id.empty()) throw ValidationError("empty descriptor in rule expression");
    Descriptor::from_id(id);  // validates the id
    rule.coefficients[id] += coef;
  }
  if (rule.coefficients.empty()) throw ValidationError("empty rule expression");
  if (rel == "<=") {
    rule.relation = Relation::Le;
  } else if (rel == ">=") {
    rule.relation = Relation::Ge;
  } else {
    throw ValidationError("rule relation must be <= or >=");
  }
  rule.constant = parse_number(constant, "rule constant");
  return rule;
}

void RuleSet::validate() const {
  for (const auto &b : bounds) {
    if (b.lo > b.hi) throw ValidationError("bound on " + b.id + " has lo > hi");
  }
  for (const auto &r : linear) {
    for (const auto &[id, c] : r.coefficients) {
      if (!std::isfinite(c)) throw ValidationError("rule coefficient for " + id + " is not finite");
    }
    if (!std::isfinite(r.constant)) throw ValidationError("rule constant is not finite");
  }
}

std::string RuleSet::serialize() const {
  std::string out;
  for (const auto &b : bounds) {
    out += "bound\t" + b.id + "\t" + std::to_string(b.lo) + "\t" + std::to_string(b.hi) + "\n";
  }
  for (const auto &r : linear) {
    out += "linear\t" + r.expression() + "\t" + (r.relation == Relation::Le ? "<=" : ">=") + "\t" +
           format_number(r.constant) + "\n";
  }
  return out;
}

RuleSet RuleSet::parse(std::string_view text) {
  RuleSet rules;
  int line_no = 0;
  for (std::string_view line : split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    try {
      const auto f = split(line, '\t');
      if (f[0] == "bound" && f.size() == 4) {
        Descriptor::from_id(f[1]);
        rules.bounds.push_back({std::string(f[1]), parse_int(f[2], "lower bound"),
                                parse_int(f[3], "upper bound")});
      } else if (f[0] == "linear" && f.size() == 4) {
        rules.linear.push_back(LinearRule::parse(f[1], f[2], f[3]));
      } else {
        throw ValidationError("expected 'bound' or 'linear' with three tab-separated fields");
      }
    } catch (const ValidationError &e) {
      throw ValidationError("rules line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  rules.validate();
  return rules;
}

void RuleSet::merge(const RuleSet &other) {
  for (const auto &b : other.bounds) {
    auto it = std::find_if(bounds.begin(), bounds.end(),
                           [&](const FeatureBound &x) { return x.id == b.id; });
    if (it != bounds.end()) {
      *it = b;
    } else {
      bounds.push_back(b);
    }
  }
  linear.insert(linear.end(), other.linear.begin(), other.linear.end());
}

RuleSet builtin_rules(const FeatureSchema &schema) {
  RuleSet rules;
  std::map<Element, std::string> element_ids;
  for (const auto &d : schema.descriptors()) {
    if (d.kind == DescriptorKind::Element) element_ids[d.element] = d.id();
  }
  if (element_ids.empty()) return rules;

  // Single-bond fragments: (a, b, order, id).
  std::set<std::tuple<Element, Element, int>> covered;
  LinearRule handshake;
  handshake.relation = Relation::Le;
  for (const auto &d : schema.descriptors()) {
    if (d.kind != DescriptorKind::Fragment || d.edge_count() != 1) continue;
    const Graph &g = d.fragment->graph;
    Element a = g.element(0), b = g.element(1);
    if (b < a) std::swap(a, b);
    const int order = g.bonds()[0].order;
    covered.emplace(a, b, order);
    handshake.coefficients[d.id()] += order;
    // Bonds of this type use `order` valence units at each endpoint.
    for (Element e : a == b ? std::vector<Element>{a} : std::vector<Element>{a, b}) {
      auto it = element_ids.find(e);
      if (it == element_ids.end()) continue;
      LinearRule r;
      r.coefficients[d.id()] = (a == b ? 2.0 : 1.0) * order;
      r.coefficients[it->second] = -valence(e);
      r.relation = Relation::Le;
      rules.linear.push_back(std::move(r));
    }
  }
  LinearRule nonempty;
  nonempty.relation = Relation::Ge;
  nonempty.constant = 1;
  for (const auto &[e, id] : element_ids) {
    nonempty.coefficients[id] = 1;
    handshake.coefficients[id] -= 0.5 * valence(e);
  }
  rules.linear.push_back(nonempty);
  if (!covered.empty()) rules.linear.push_back(handshake);

  // A connected molecule with n atoms has at least n - 1 bonds; usable
  // only when every possible bond type has a descriptor.
  bool complete = true;
  for (auto i = element_ids.begin(); i != element_ids.end() && complete; ++i) {
    for (auto j = i; j != element_ids.end() && complete; ++j) {
      const int top = std::min({valence(i->first), valence(j->first), 3});
      for (int o = 1; o <= top; ++o) {
        if (!covered.count({i->first, j->first, o})) complete = false;
      }
    }
  }
  if (complete) {
    LinearRule connected;
    connected.relation = Relation::Ge;
    connected.constant = -1;
    for (const auto &[e, id] : element_ids) connected.coefficients[id] = -1;
    for (const auto &d : schema.descriptors()) {
      if (d.kind == DescriptorKind::Fragment && d.edge_count() == 1) connected.coefficients[d.id()] = 1;
    }
    rules.linear.push_back(std::move(connected));
  }
  return rules;
}

SubgraphTuple subgraph_tuple(const Graph &g, const FeatureSchema *schema) {
  SubgraphTuple t{0, 0, 0, 0};
  FragmentKeyCache cache;
  for_each_connected_subset(g, 4, [&](std::span<const int> bonds) {
    if (schema && !schema->fragment_index(cache.key(g, bonds))) return;
    ++t[bonds.size() - 1];
  });
  return t;
}

SubgraphTuple subgraph_tuple(const FeatureSchema &schema, const std::vector<int> &values) {
  SubgraphTuple t{0, 0, 0, 0};
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const int k = schema[i].edge_count();
    if (k >= 1 && k <= 4) t[k - 1] += values[i];
  }
  return t;
}

bool FeasibilityIndex::contains(const SubgraphTuple &t) const {
  if (tolerance == 0) return points.count(t) > 0;
  const SubgraphTuple start{t[0] - tolerance, std::numeric_limits<int>::min(), 0, 0};
  for (auto it = points.lower_bound(start); it != points.end() && (*it)[0] <= t[0] + tolerance;
       ++it) {
    bool near = true;
    for (int k = 0; k < 4 && near; ++k) near = std::abs((*it)[k] - t[k]) <= tolerance;
    if (near) return true;
  }
  return false;
}

std::string FeasibilityIndex::serialize() const {
  std::string out = "# mid-feasibility/1\n# elements\t";
  for (std::size_t i = 0; i < elements.size(); ++i) {
    if (i) out += ',';
    out += symbol(elements[i]);
  }
  out += "\n# max_atoms\t" + std::to_string(max_atoms);
  out += "\n# dataset_molecules\t" + std::to_string(dataset_molecules);
  out += "\n# schema\t" + (schema_sha256.empty() ? std::string("-") : schema_sha256);
  out += "\n# tolerance\t" + std::to_string(tolerance) + "\n";
  for (const auto &p : points) {
    out += std::to_string(p[0]) + "\t" + std::to_string(p[1]) + "\t" + std::to_string(p[2]) +
           "\t" + std::to_string(p[3]) + "\n";
  }
  return out;
}

FeasibilityIndex FeasibilityIndex::parse(std::string_view text) {
  FeasibilityIndex index;
  bool header = false;
  int line_no = 0;
  for (std::string_view line : split(text, '\n')) {
    ++line_no;
    if (line.empty()) continue;
    auto bad = [&](const std::string &why) {
      return ValidationError("feasibility index line " + std::to_string(line_no) + ": " + why);
    };
    if (line.front() == '#') {
      if (line == "# mid-feasibility/1") {
        header = true;
        continue;
      }
      const auto f = split(line.substr(2), '\t');
      if (f.size() != 2) throw bad("malformed header");
      if (f[0] == "elements") {
        for (auto s : split(f[1], ',')) {
          auto e = element_from_symbol(s);
          if (!e) throw bad("unknown element");
          index.elements.push_back(*e);
        }
      } else if (f[0] == "max_atoms") {
        index.max_atoms = parse_int(f[1], "max_atoms");
      } else if (f[0] == "dataset_molecules") {
        index.dataset_molecules = static_cast<std::size_t>(parse_int(f[1], "dataset_molecules"));
      } else if (f[0] == "schema") {
        index.schema_sha256 = f[1] == "-" ? "" : std::string(f[1]);
      } else if (f[0] == "tolerance") {
        index.tolerance = parse_int(f[1], "tolerance");
      } else {
        throw bad("unknown header field");
      }
      continue;
    }
    const auto f = split(line, '\t');
    if (f.size() != 4) throw bad("expected four counts");
    SubgraphTuple t;
    for (int k = 0; k < 4; ++k) {
      t[k] = parse_int(f[k], "count");
      if (t[k] < 0) throw bad("negative count");
    }
    index.points.insert(t);
  }
  if (!header) throw ValidationError("missing feasibility index header");
  if (index.tolerance < 0) throw ValidationError("tolerance must be non-negative");
  return index;
}

FeasibilityIndex build_feasibility_index(const std::vector<Element> &elements, int max_atoms,
                                         const std::vector<Molecule> &dataset,
                                         const FeatureSchema *schema) {
  if (max_atoms < 1) throw ValidationError("max_atoms must be at least 1");
  if (elements.empty()) throw ValidationError("feasibility index needs at least one element");
  FeasibilityIndex index;
  index.elements = elements;
  std::sort(index.elements.begin(), index.elements.end());
  index.elements.erase(std::unique(index.elements.begin(), index.elements.end()),
                       index.elements.end());
  index.max_atoms = max_atoms;
  index.dataset_molecules = dataset.size();
  if (schema) index.schema_sha256 = sha256_hex(schema->manifest());

  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (int a = 0; a < dataset[i].num_atoms(); ++a) {
      const Element e = dataset[i].element(a);
      if (!std::binary_search(index.elements.begin(), index.elements.end(), e)) {
        throw ValidationError("dataset molecule " + std::to_string(i + 1) + " uses element " +
                              std::string(symbol(e)) + " outside the configured set");
      }
    }
    index.points.insert(subgraph_tuple(dataset[i].graph(), schema));
  }

  // Every element multiset of each size.
  const auto &el = index.elements;
  std::map<Element, int> counts;
  std::function<void(std::size_t, int)> rec = [&](std::size_t from, int left) {
    if (left == 0) {
      GenerationSpec spec;
      spec.atoms = counts;
      spec.max_structures = 0;
      spec.dedup = false;
      for (const auto &key : generate(spec).keys) {
        index.points.insert(subgraph_tuple(graph_from_key(key), schema));
      }
      return;
    }
    for (std::size_t k = from; k < el.size(); ++k) {
      ++counts[el[k]];
      rec(k, left - 1);
      if (--counts[el[k]] == 0) counts.erase(el[k]);
    }
  };
  for (int n = 1; n <= max_atoms; ++n) rec(0, n);
  return index;
}

Feasibility is_feasible(const FeatureSchema &schema, const std::vector<int> &values,
                        const FeasibilityIndex *index, const RuleSet &rules) {
  if (values.size() != schema.size()) {
    throw ValidationError("feature vector length does not match its schema");
  }
  if (index && !index->schema_sha256.empty() &&
      index->schema_sha256 != sha256_hex(schema.manifest())) {
    throw ValidationError("feasibility index was built for a different schema");
  }
  return evaluate(CompiledRules(schema, rules), schema, values, index);
}

void PsoConfig::validate() const {
  if (swarm < 1) throw ValidationError("swarm size must be at least 1");
  if (iterations < 0) throw ValidationError("iterations must be non-negative");
  for (double v : {inertia, cognitive, social, velocity_clamp}) {
    if (!std::isfinite(v) || v < 0) throw ValidationError("PSO coefficients must be finite and >= 0");
  }
}

PsoResult pso_minimize(const Objective &f, const std::vector<double> &lo,
                       const std::vector<double> &hi, const PsoConfig &config, std::uint64_t seed,
                       const std::vector<std::vector<double>> &initial,
                       const std::function<bool(int)> &after_iteration) {
  config.validate();
  const std::size_t d = lo.size();
  if (hi.size() != d) throw ValidationError("bound vectors differ in length");
  for (std::size_t j = 0; j < d; ++j) {
    if (!(lo[j] <= hi[j])) throw ValidationError("lower bound exceeds upper bound");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = config.swarm;
  std::vector<double> vmax(d);
  for (std::size_t j = 0; j < d; ++j) vmax[j] = config.velocity_clamp * (hi[j] - lo[j]);

  std::vector<std::vector<double>> x(n, std::vector<double>(d)), v = x;
  for (int p = 0; p < n; ++p) {
    for (std::size_t j = 0; j < d; ++j) {
      if (p < static_cast<int>(initial.size())) {
        x[p][j] = std::clamp(initial[p][j], lo[j], hi[j]);
      } else {
        x[p][j] = lo[j] + unit(rng) * (hi[j] - lo[j]);
      }
      v[p][j] = (2 * unit(rng) - 1) * vmax[j];
    }
  }
  std::vector<double> value(n);
  for (int p = 0; p < n; ++p) value[p] = f(x[p]);
  auto pbest = x;
  auto pbest_value = value;
  int g = static_cast<int>(std::min_element(value.begin(), value.end()) - value.begin());
  std::vector<double> gbest = x[g];
  double gbest_value = value[g];

  PsoResult result;
  for (int it = 1; it <= config.iterations; ++it) {
    for (int p = 0; p < n; ++p) {
      for (std::size_t j = 0; j < d; ++j) {
        double vel = config.inertia * v[p][j] +
                     config.cognitive * unit(rng) * (pbest[p][j] - x[p][j]) +
                     config.social * unit(rng) * (gbest[j] - x[p][j]);
        vel = std::clamp(vel, -vmax[j], vmax[j]);
        double pos = x[p][j] + vel;
        if (pos > hi[j]) {
          pos = hi[j] - (pos - hi[j]);
          vel = -vel;
        } else if (pos < lo[j]) {
          pos = lo[j] + (lo[j] - pos);
          vel = -vel;
        }
        x[p][j] = std::clamp(pos, lo[j], hi[j]);
        v[p][j] = vel;
      }
    }
    for (int p = 0; p < n; ++p) {
      value[p] = f(x[p]);
      if (value[p] < pbest_value[p]) {
        pbest_value[p] = value[p];
        pbest[p] = x[p];
      }
    }
    // Synchronous update: the best is taken after the whole sweep, in
    // particle order.
    for (int p = 0; p < n; ++p) {
      if (pbest_value[p] < gbest_value) {
        gbest_value = pbest_value[p];
        gbest = pbest[p];
      }
    }
    result.history.push_back(gbest_value);
    result.iterations = it;
    if (after_iteration && !after_iteration(it)) break;
  }
  result.best_position = std::move(gbest);
  result.best_value = gbest_value;
  return result;
}

nlohmann::ordered_json SearchConfig::to_json() const {
  nlohmann::ordered_json j;
  j["swarm"] = pso.swarm;
  j["iterations"] = pso.iterations;
  j["inertia"] = pso.inertia;
  j["cognitive"] = pso.cognitive;
  j["social"] = pso.social;
  j["velocity_clamp"] = pso.velocity_clamp;
  j["max_candidates"] = max_candidates;
  j["use_index"] = use_index;
  j["builtin_rules"] = builtin_rules;
  j["start_fraction"] = start_fraction;
  j["violation_penalty"] = violation_penalty;
  return j;
}

SearchConfig SearchConfig::from_json(const nlohmann::json &j) {
  try {
    SearchConfig c;
    c.pso.swarm = j.value("swarm", c.pso.swarm);
    c.pso.iterations = j.value("iterations", c.pso.iterations);
    c.pso.inertia = j.value("inertia", c.pso.inertia);
    c.pso.cognitive = j.value("cognitive", c.pso.cognitive);
    c.pso.social = j.value("social", c.pso.social);
    c.pso.velocity_clamp = j.value("velocity_clamp", c.pso.velocity_clamp);
    c.max_candidates = j.value("max_candidates", c.max_candidates);
    c.use_index = j.value("use_index", c.use_index);
    c.builtin_rules = j.value("builtin_rules", c.builtin_rules);
    c.start_fraction = j.value("start_fraction", c.start_fraction);
    c.violation_penalty = j.value("violation_penalty", c.violation_penalty);
    c.pso.validate();
    if (c.start_fraction < 0 || c.start_fraction > 1) {
      throw ValidationError("start_fraction must lie in [0, 1]");
    }
    return c;
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError(std::string("malformed search config: ") + e.what());
  }
}

void default_bounds(const std::vector<std::vector<int>> &rows, std::vector<int> &lo,
                    std::vector<int> &hi) {
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  lo.assign(d, 0);
  hi.assign(d, 0);
  for (const auto &r : rows) {
    if (r.size() != d) throw ValidationError("rows differ in length");
    for (std::size_t j = 0; j < d; ++j) hi[j] = std::max(hi[j], 2 * r[j]);
  }
}

SearchResult mc_pso(const SearchProblem &problem, const SearchConfig &config, std::uint64_t seed,
                    const SearchControl &control) {
  if (problem.models.empty()) throw ValidationError("search needs at least one model");
  const SchemaRef schema = problem.models.front().schema;
  for (const auto &m : problem.models) {
    if (!m.schema || !(*m.schema == *schema)) {
      throw ValidationError("all models must share one feature schema");
    }
  }
  if (problem.targets.empty()) throw ValidationError("at least one target is required");
  const std::size_t d = schema->size();
  if (problem.lo.size() != d || problem.hi.size() != d) {
    throw ValidationError("bounds do not match the schema dimension");
  }

  SearchResult result;
  std::vector<const RegressionModel *> model_of;
  for (const auto &t : problem.targets) {
    auto it = std::find_if(problem.models.begin(), problem.models.end(),
                           [&](const RegressionModel &m) { return m.property == t.property; });
    if (it == problem.models.end()) {
      throw ValidationError("no model predicts property '" + t.property + "'");
    }
    TargetBand band = t;
    if (band.band == 0) band.band = it->sigma;
    if (!std::isfinite(band.target) || !std::isfinite(band.band) || band.band <= 0) {
      throw ValidationError("band half-width for '" + t.property + "' must be positive");
    }
    if (!std::isfinite(band.weight) || band.weight < 0) {
      throw ValidationError("target weight must be non-negative");
    }
    model_of.push_back(&*it);
    result.targets.push_back(band);
  }

  result.rules = problem.rules;
  if (config.builtin_rules) result.rules.merge(builtin_rules(*schema));
  result.rules.validate();
  const CompiledRules rules(*schema, result.rules);

  const FeasibilityIndex *index = config.use_index ? problem.index : nullptr;
  if (index && !index->schema_sha256.empty() &&
      index->schema_sha256 != sha256_hex(schema->manifest())) {
    throw ValidationError("feasibility index was built for a different schema");
  }

  // Box: defaults, replaced per dimension by explicit bound rules.
  std::vector<int> lo = problem.lo, hi = problem.hi;
  for (const auto &b : rules.bounds) {
    lo[b.index] = b.lo;
    hi[b.index] = b.hi;
  }
  std::vector<double> lo_d(lo.begin(), lo.end()), hi_d(hi.begin(), hi.end());
  for (std::size_t j = 0; j < d; ++j) {
    if (lo[j] > hi[j]) throw ValidationError("bounds for " + (*schema)[j].id() + " are empty");
  }

  std::map<std::vector<int>, Candidate> archive;
  std::vector<int> rounded(d);
  auto objective = [&](const std::vector<double> &x) {
    ++result.evaluations;
    for (std::size_t j = 0; j < d; ++j) {
      rounded[j] = std::clamp(static_cast<int>(std::lround(x[j])), lo[j], hi[j]);
    }
    Candidate c;
    bool in_band = true;
    for (std::size_t k = 0; k < result.targets.size(); ++k) {
      const auto &t = result.targets[k];
      const double y = model_of[k]->predict(rounded);
      c.predicted.push_back(y);
      const double z = (y - t.target) / t.band;
      c.loss += t.weight * z * z;
      in_band &= std::abs(y - t.target) <= t.band;
    }
    const Feasibility f = evaluate(rules, *schema, rounded, index);
    if (f.ok && in_band && archive.size() < config.max_candidates && !archive.count(rounded)) {
      c.values = rounded;
      archive.emplace(rounded, std::move(c));
      return archive.at(rounded).loss;
    }
    return c.loss + config.violation_penalty * f.violations;
  };

  std::vector<std::vector<double>> initial;
  if (!problem.starts.empty()) {
    const int want = std::min<int>(static_cast<int>(std::lround(config.start_fraction *
                                                                config.pso.swarm)),
                                   static_cast<int>(problem.starts.size()));
    const auto perm = seeded_permutation(static_cast<int>(problem.starts.size()),
                                         seed ^ 0x9e3779b97f4a7c15ULL);
    for (int i = 0; i < want; ++i) {
      const auto &s = problem.starts[perm[i]];
      if (s.size() != d) throw ValidationError("start vector does not match the schema");
      initial.emplace_back(s.begin(), s.end());
    }
  }

  PsoResult pso = pso_minimize(objective, lo_d, hi_d, config.pso, seed, initial, [&](int it) {
    if (control.cancel && control.cancel->load(std::memory_order_relaxed)) throw CancelledError();
    if (control.on_iteration) control.on_iteration(it, archive.size());
    return archive.size() < config.max_candidates;
  });
  result.iterations = pso.iterations;
  for (auto &[key, c] : archive) result.candidates.push_back(std::move(c));
  std::sort(result.candidates.begin(), result.candidates.end(),
            [](const Candidate &a, const Candidate &b) {
              return a.loss != b.loss ? a.loss < b.loss : a.values < b.values;
            });
  return result;
}

}  // namespace mid
