//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "mid/canon.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <tuple>

#include "mid/error.hpp"

namespace mid {
namespace {

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) {
      parent_[b] = a;
    } else {
      parent_[a] = b;
    }
  }

 private:
  std::vector<int> parent_;
};

// Ranks arbitrary integer colours into 0..k-1 preserving order.
int densify(std::vector<int> &col) {
  std::vector<int> values = col;
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  for (int &c : col) {
    c = static_cast<int>(std::lower_bound(values.begin(), values.end(), c) -
                         values.begin());
  }
  return static_cast<int>(values.size());
}

class Refiner {
 public:
  explicit Refiner(const ColoredGraph &g) : g_(g), n_(g.size()) {
    vertices_.resize(n_);
    offsets_.resize(n_ + 1);
  }

  // Refines `col` (dense colours, `cells` classes) to the coarsest
  // equitable colouring finer than it. Returns the new cell count.
  int refine(std::vector<int> &col, int cells) {
    while (cells < n_) {
      buffer_.clear();
      for (int v = 0; v < n_; ++v) {
        offsets_[v] = static_cast<int>(buffer_.size());
        buffer_.push_back(col[v]);
        const std::size_t start = buffer_.size();
        for (const auto &[u, label] : g_.adjacency[v]) {
          buffer_.push_back(col[u] * 8 + label);
        }
        std::sort(buffer_.begin() + start, buffer_.end());
      }
      offsets_[n_] = static_cast<int>(buffer_.size());
      std::iota(vertices_.begin(), vertices_.end(), 0);
      std::sort(vertices_.begin(), vertices_.end(),
                [&](int a, int b) { return less(a, b); });
      int next = 0;
      std::vector<int> fresh(n_);
      for (int i = 0; i < n_; ++i) {
        if (i > 0 && less(vertices_[i - 1], vertices_[i])) ++next;
        fresh[vertices_[i]] = next;
      }
      const int new_cells = next + 1;
      col.swap(fresh);
      if (new_cells == cells) break;
      cells = new_cells;
    }
    return cells;
  }

 private:
  bool less(int a, int b) const {
    return std::lexicographical_compare(
        buffer_.begin() + offsets_[a], buffer_.begin() + offsets_[a + 1],
        buffer_.begin() + offsets_[b], buffer_.begin() + offsets_[b + 1]);
  }

  const ColoredGraph &g_;
  int n_;
  std::vector<int> buffer_;
  std::vector<int> offsets_;
  std::vector<int> vertices_;
};

class Search {
 public:
  explicit Search(const ColoredGraph &g)
      : g_(g), n_(g.size()), refiner_(g), labels_(n_ * n_, 0) {
    for (int v = 0; v < n_; ++v) {
      for (const auto &[u, label] : g.adjacency[v]) labels_[v * n_ + u] = label;
    }
  }

  void run() {
    std::vector<int> col = g_.color;
    int cells = densify(col);
    std::vector<int> prefix;
    explore(col, cells, prefix);
  }

  Labeling result() && {
    Labeling out;
    out.order = std::move(best_order_);
    out.position.resize(n_);
    for (int p = 0; p < n_; ++p) out.position[out.order[p]] = p;
    out.orbit = orbit_representatives(n_, generators_);
    out.generators = std::move(generators_);
    out.code = std::move(best_code_);
    return out;
  }

 private:
  void explore(std::vector<int> &col, int cells, std::vector<int> &prefix) {
    cells = refiner_.refine(col, cells);
    if (cells == n_) {
      leaf(col);
      return;
    }
    // First largest non-singleton cell.
    std::vector<int> size(cells, 0);
    for (int c : col) ++size[c];
    int target = -1;
    for (int c = 0; c < cells; ++c) {
      if (size[c] > 1 && (target < 0 || size[c] > size[target])) target = c;
    }
    std::vector<int> members;
    for (int v = 0; v < n_; ++v) {
      if (col[v] == target) members.push_back(v);
    }
    std::vector<int> explored;
    for (int w : members) {
      if (!explored.empty() && equivalent_to_explored(w, explored, prefix)) {
        continue;
      }
      std::vector<int> child = col;
      for (int v = 0; v < n_; ++v) {
        if (child[v] > target || (child[v] == target && v != w)) ++child[v];
      }
      prefix.push_back(w);
      explore(child, cells + 1, prefix);
      prefix.pop_back();
      explored.push_back(w);
    }
  }

  // True when some automorphism fixing `prefix` pointwise maps w onto an
  // already explored sibling.
  bool equivalent_to_explored(int w, const std::vector<int> &explored,
                              const std::vector<int> &prefix) {
    if (generators_.empty()) return false;
    UnionFind uf(n_);
    bool any = false;
    for (const auto &gen : generators_) {
      bool fixes = true;
      for (int p : prefix) {
        if (gen[p] != p) {
          fixes = false;
          break;
        }
      }
      if (!fixes) continue;
      any = true;
      for (int v = 0; v < n_; ++v) uf.unite(v, gen[v]);
    }
    if (!any) return false;
    const int root = uf.find(w);
    for (int x : explored) {
      if (uf.find(x) == root) return true;
    }
    return false;
  }

  void leaf(const std::vector<int> &col) {
    std::vector<int> order(n_);
    for (int v = 0; v < n_; ++v) order[col[v]] = v;
    std::vector<int> code;
    code.reserve(n_ + n_ * (n_ - 1) / 2);
    for (int p = 0; p < n_; ++p) code.push_back(g_.color[order[p]]);
    for (int i = 0; i < n_; ++i) {
      const int *row = &labels_[order[i] * n_];
      for (int j = i + 1; j < n_; ++j) code.push_back(row[order[j]]);
    }
    if (first_code_.empty()) {
      first_code_ = code;
      first_order_ = order;
      best_code_ = std::move(code);
      best_order_ = std::move(order);
      return;
    }
    if (code == first_code_) {
      record_automorphism(first_order_, order);
    } else if (code == best_code_) {
      record_automorphism(best_order_, order);
    }
    if (code < best_code_) {
      best_code_ = std::move(code);
      best_order_ = std::move(order);
    }
  }

  // Both orders produce the same code, so mapping order[p] to
  // reference[p] is an automorphism.
  void record_automorphism(const std::vector<int> &reference,
                           const std::vector<int> &order) {
    std::vector<int> gen(n_);
    bool identity = true;
    for (int p = 0; p < n_; ++p) {
      gen[order[p]] = reference[p];
      identity &= order[p] == reference[p];
    }
    if (!identity) generators_.push_back(std::move(gen));
  }

  const ColoredGraph &g_;
  int n_;
  Refiner refiner_;
  std::vector<int> labels_;
  std::vector<int> first_code_, best_code_;
  std::vector<int> first_order_, best_order_;
  std::vector<std::vector<int>> generators_;
};

}  // namespace

std::vector<int> orbit_representatives(
    int n, const std::vector<std::vector<int>> &generators) {
  UnionFind uf(n);
  for (const auto &gen : generators) {
    for (int v = 0; v < n; ++v) uf.unite(v, gen[v]);
  }
  std::vector<int> out(n);
  for (int v = 0; v < n; ++v) out[v] = uf.find(v);
  return out;
}

Labeling canonical_labeling(const ColoredGraph &graph) {
  if (graph.size() == 0) return {};
  Search search(graph);
  search.run();
  return std::move(search).result();
}

std::vector<int> refined_colors(const ColoredGraph &graph) {
  std::vector<int> col = graph.color;
  int cells = densify(col);
  Refiner refiner(graph);
  refiner.refine(col, cells);
  return col;
}

ColoredGraph to_colored_graph(const Graph &graph) {
  const int n = graph.num_atoms();
  ColoredGraph out;
  out.resize(n);
  std::vector<std::array<int, 5>> keys(n);
  for (int v = 0; v < n; ++v) {
    std::array<int, 5> key{graph.degree(v), static_cast<int>(graph.element(v)),
                           0, 0, 0};
    for (const Neighbor &nb : graph.neighbors(v)) {
      ++key[1 + nb.order];
      out.adjacency[v].emplace_back(nb.atom, nb.order);
    }
    keys[v] = key;
  }
  std::vector<std::array<int, 5>> sorted = keys;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (int v = 0; v < n; ++v) {
    out.color[v] = static_cast<int>(
        std::lower_bound(sorted.begin(), sorted.end(), keys[v]) -
        sorted.begin());
  }
  return out;
}

CanonicalForm canonical_form(const Graph &graph) {
  const int n = graph.num_atoms();
  Labeling lab = canonical_labeling(to_colored_graph(graph));
  CanonicalForm out;
  for (int p = 0; p < n; ++p) {
    if (p > 0) out.key += ',';
    out.key += symbol(graph.element(lab.order[p]));
  }
  out.key += '|';
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      out.key += static_cast<char>(
          '0' + graph.bond_order(lab.order[i], lab.order[j]));
    }
  }
  out.labeling = lab.position;
  std::vector<std::vector<int>> by_rep(n);
  for (int v = 0; v < n; ++v) by_rep[lab.orbit[v]].push_back(v);
  for (auto &orbit : by_rep) {
    if (!orbit.empty()) out.orbits.push_back(std::move(orbit));
  }
  return out;
}

CanonicalForm canonical_form(const Molecule &molecule) {
  return canonical_form(molecule.graph());
}

std::string canonical_key(const Graph &graph) {
  return canonical_form(graph).key;
}

std::string canonical_key(const Molecule &molecule) {
  return canonical_form(molecule.graph()).key;
}

Graph graph_from_key(std::string_view key) {
  auto malformed = [&] {
    return ValidationError("malformed canonical key '" + std::string(key) + "'");
  };
  const auto bar = key.find('|');
  if (bar == std::string_view::npos || bar == 0) throw malformed();
  Graph g;
  const std::string_view atoms = key.substr(0, bar);
  std::size_t start = 0;
  while (start <= atoms.size()) {
    std::size_t comma = atoms.find(',', start);
    if (comma == std::string_view::npos) comma = atoms.size();
    auto e = element_from_symbol(atoms.substr(start, comma - start));
    if (!e) throw malformed();
    g.add_atom(*e);
    start = comma + 1;
  }
  const std::string_view matrix = key.substr(bar + 1);
  const int n = g.num_atoms();
  if (static_cast<int>(matrix.size()) != n * (n - 1) / 2) throw malformed();
  std::size_t k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const int order = matrix[k++] - '0';
      if (order < 0 || order > 3) throw malformed();
      if (order > 0) g.add_bond(i, j, order);
    }
  }
  return g;
}

}  // namespace mid
