//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "mid/smiles.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <optional>

#include "mid/canon.hpp"
#include "mid/error.hpp"

namespace mid {
namespace {

struct ParsedAtom {
  Element element;
  bool aromatic = false;
  int bracket_h = -1;  // -1 for organic-subset atoms
  std::size_t position = 0;
};

struct ParsedBond {
  int a;
  int b;
  int order;  // 0 = aromatic, resolved by kekulization
};

struct OpenRing {
  int atom;
  int order;  // -1 when no bond symbol was given
  std::size_t position;
};

class Parser {
 public:
  Parser(std::string_view text, ElementSet elements)
      : text_(text), elements_(elements) {}

  Molecule parse() {
    if (text_.empty()) throw ParseError("empty SMILES", 0);
    int previous = -1;
    int pending_order = -1;
    std::size_t pending_pos = 0;
    std::vector<int> branches;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '(') {
        if (previous < 0) throw ParseError("branch before any atom", pos_);
        if (pending_order >= 0) throw ParseError("bond before branch", pos_);
        branches.push_back(previous);
        ++pos_;
        if (pos_ < text_.size() && text_[pos_] == ')') {
          throw ParseError("empty branch", pos_);
        }
      } else if (c == ')') {
        if (branches.empty()) throw ParseError("unbalanced ')'", pos_);
        if (pending_order >= 0) {
          throw ParseError("dangling bond", pending_pos);
        }
        previous = branches.back();
        branches.pop_back();
        ++pos_;
      } else if (c == '-' || c == '=' || c == '#' || c == ':') {
        if (previous < 0) throw ParseError("bond before any atom", pos_);
        if (pending_order >= 0) throw ParseError("consecutive bonds", pos_);
        pending_order = c == '-' ? 1 : c == '=' ? 2 : c == '#' ? 3 : 0;
        pending_pos = pos_++;
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
        if (previous < 0) {
          throw ParseError("ring closure before any atom", pos_);
        }
        const std::size_t at = pos_;
        const int label = ring_label();
        ring_closure(previous, label, pending_order, at);
        pending_order = -1;
      } else if (c == '/' || c == '\\') {
        throw unsupported("directional bonds (stereochemistry)");
      } else if (c == '.') {
        throw unsupported("disconnected structures ('.')");
      } else if (c == '*') {
        throw unsupported("wildcard atoms");
      } else if (c == '$') {
        throw unsupported("quadruple bonds");
      } else {
        const int atom = c == '[' ? bracket_atom() : organic_atom();
        if (previous >= 0) {
          bonds_.push_back(
              ParsedBond{previous, atom, default_order(previous, atom,
                                                       pending_order)});
        }
        pending_order = -1;
        previous = atom;
      }
    }
    if (pending_order >= 0) throw ParseError("dangling bond", pending_pos);
    if (!branches.empty()) throw ParseError("unclosed branch", pos_);
    if (!open_rings_.empty()) {
      const auto &[label, ring] = *open_rings_.begin();
      throw ParseError("unclosed ring bond " + std::to_string(label),
                       ring.position);
    }
    if (atoms_.empty()) throw ParseError("no atoms", 0);
    kekulize();
    return build();
  }

 private:
  ParseError unsupported(const std::string &feature) const {
    return ParseError("unsupported SMILES feature: " + feature, pos_);
  }

  int default_order(int a, int b, int explicit_order) const {
    if (explicit_order >= 0) return explicit_order;
    return atoms_[a].aromatic && atoms_[b].aromatic ? 0 : 1;
  }

  int ring_label() {
    if (text_[pos_] == '%') {
      if (pos_ + 2 >= text_.size() ||
          !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
          !std::isdigit(static_cast<unsigned char>(text_[pos_ + 2]))) {
        throw ParseError("malformed %nn ring closure", pos_);
      }
      const int label = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
      pos_ += 3;
      return label;
    }
    const int label = text_[pos_] - '0';
    if (label == 0) throw ParseError("ring closure digit 0", pos_);
    ++pos_;
    return label;
  }

  void ring_closure(int atom, int label, int order, std::size_t at) {
    auto it = open_rings_.find(label);
    if (it == open_rings_.end()) {
      open_rings_.emplace(label, OpenRing{atom, order, at});
      return;
    }
    const OpenRing ring = it->second;
    open_rings_.erase(it);
    if (ring.atom == atom) throw ParseError("ring bond to itself", at);
    if (ring.order >= 0 && order >= 0 && ring.order != order) {
      throw ParseError("conflicting ring-closure bond orders", at);
    }
    for (const ParsedBond &b : bonds_) {
      if ((b.a == ring.atom && b.b == atom) ||
          (b.a == atom && b.b == ring.atom)) {
        throw ParseError("ring closure duplicates an existing bond", at);
      }
    }
    const int explicit_order = ring.order >= 0 ? ring.order : order;
    bonds_.push_back(
        ParsedBond{ring.atom, atom, default_order(ring.atom, atom,
                                                  explicit_order)});
  }

  Element checked_element(std::string_view sym, std::size_t at) const {
    auto e = element_from_symbol(sym);
    if (!e) {
      throw ParseError("unsupported element '" + std::string(sym) + "'", at);
    }
    if (!elements_.contains(*e)) {
      throw ValidationError("element " + std::string(sym) +
                            " is outside the configured element set " +
                            elements_.to_string());
    }
    return *e;
  }

  int organic_atom() {
    const std::size_t at = pos_;
    const char c = text_[pos_];
    ParsedAtom atom;
    atom.position = at;
    if (c == 'C' && pos_ + 1 < text_.size() && text_[pos_ + 1] == 'l') {
      atom.element = checked_element("Cl", at);
      pos_ += 2;
    } else if (c == 'B' && pos_ + 1 < text_.size() && text_[pos_ + 1] == 'r') {
      atom.element = checked_element("Br", at);
      pos_ += 2;
    } else if (c == 'C' || c == 'N' || c == 'O' || c == 'F' || c == 'S') {
      atom.element = checked_element(std::string_view(&text_[pos_], 1), at);
      ++pos_;
    } else if (c == 'c' || c == 'n' || c == 'o' || c == 's') {
      const char upper = static_cast<char>(std::toupper(c));
      atom.element = checked_element(std::string_view(&upper, 1), at);
      atom.aromatic = true;
      ++pos_;
    } else {
      throw ParseError(std::string("unexpected character '") + c + "'", at);
    }
    atoms_.push_back(atom);
    return static_cast<int>(atoms_.size()) - 1;
  }

  int bracket_atom() {
    const std::size_t open = pos_++;
    auto peek = [&]() -> char {
      if (pos_ >= text_.size()) throw ParseError("unclosed bracket atom", open);
      return text_[pos_];
    };
    if (std::isdigit(static_cast<unsigned char>(peek()))) {
      throw unsupported("isotopes");
    }
    ParsedAtom atom;
    atom.position = open;
    const char c = peek();
    std::string sym;
    if (std::islower(static_cast<unsigned char>(c))) {
      atom.aromatic = true;
      sym = std::string(1, static_cast<char>(std::toupper(c)));
      ++pos_;
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      sym = std::string(1, c);
      ++pos_;
      if (pos_ < text_.size() &&
          std::islower(static_cast<unsigned char>(text_[pos_])) &&
          (sym == "C" || sym == "B") && (text_[pos_] == 'l' || text_[pos_] == 'r')) {
        sym += text_[pos_++];
      }
    } else if (c == '*') {
      throw unsupported("wildcard atoms");
    } else {
      throw ParseError("expected element symbol", pos_);
    }
    if (atom.aromatic && sym != "C" && sym != "N" && sym != "O" && sym != "S") {
      throw ParseError("unsupported aromatic element", pos_ - 1);
    }
    atom.element = checked_element(sym, open + 1);
    atom.bracket_h = 0;
    if (peek() == '@') throw unsupported("chirality (stereochemistry)");
    if (peek() == 'H') {
      ++pos_;
      atom.bracket_h = 1;
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        atom.bracket_h = text_[pos_++] - '0';
      }
    }
    if (peek() == '+' || peek() == '-') throw unsupported("charges");
    if (peek() == ':') throw unsupported("atom classes");
    if (peek() != ']') throw ParseError("malformed bracket atom", pos_);
    ++pos_;
    atoms_.push_back(atom);
    return static_cast<int>(atoms_.size()) - 1;
  }

  // Assigns alternating orders to aromatic bonds: every aromatic atom
  // with spare valence receives exactly one double bond.
  void kekulize() {
    const int n = static_cast<int>(atoms_.size());
    std::vector<int> used(n, 0);
    std::vector<int> aromatic_bonds(n, 0);
    for (const ParsedBond &b : bonds_) {
      const int w = b.order == 0 ? 1 : b.order;
      used[b.a] += w;
      used[b.b] += w;
      if (b.order == 0) {
        ++aromatic_bonds[b.a];
        ++aromatic_bonds[b.b];
      }
    }
    std::vector<char> needs(n, 0);
    bool any = false;
    for (int i = 0; i < n; ++i) {
      const ParsedAtom &a = atoms_[i];
      if (!a.aromatic) continue;
      const int h = a.bracket_h < 0 ? 0 : a.bracket_h;
      const int spare = valence(a.element) - used[i] - h;
      if (spare < 0) {
        throw ValidationError("valence overflow on aromatic atom at position " +
                              std::to_string(a.position));
      }
      if (aromatic_bonds[i] > 0 && spare > 0) {
        needs[i] = 1;
        any = true;
      }
    }
    if (!any) {
      for (ParsedBond &b : bonds_) {
        if (b.order == 0) b.order = 1;
      }
      return;
    }
    std::vector<std::vector<int>> options(n);  // candidate bond indices
    for (int k = 0; k < static_cast<int>(bonds_.size()); ++k) {
      const ParsedBond &b = bonds_[k];
      if (b.order == 0 && needs[b.a] && needs[b.b]) {
        options[b.a].push_back(k);
        options[b.b].push_back(k);
      }
    }
    std::vector<int> mate(n, -1);
    std::vector<int> doubled;
    std::function<bool()> solve = [&]() -> bool {
      int pick = -1;
      int best = 1 << 30;
      for (int i = 0; i < n; ++i) {
        if (!needs[i] || mate[i] >= 0) continue;
        int free_options = 0;
        for (int k : options[i]) {
          const int other = bonds_[k].a == i ? bonds_[k].b : bonds_[k].a;
          if (mate[other] < 0) ++free_options;
        }
        if (free_options < best) {
          best = free_options;
          pick = i;
        }
      }
      if (pick < 0) return true;
      if (best == 0) return false;
      for (int k : options[pick]) {
        const int other = bonds_[k].a == pick ? bonds_[k].b : bonds_[k].a;
        if (mate[other] >= 0) continue;
        mate[pick] = other;
        mate[other] = pick;
        doubled.push_back(k);
        if (solve()) return true;
        doubled.pop_back();
        mate[pick] = mate[other] = -1;
      }
      return false;
    };
    if (!solve()) {
      throw ValidationError(
          "cannot kekulize aromatic system (no alternating bond assignment)");
    }
    for (ParsedBond &b : bonds_) {
      if (b.order == 0) b.order = 1;
    }
    for (int k : doubled) bonds_[k].order = 2;
  }

  Molecule build() {
    Graph g;
    for (const ParsedAtom &a : atoms_) g.add_atom(a.element);
    for (const ParsedBond &b : bonds_) g.add_bond(b.a, b.b, b.order);
    for (int i = 0; i < g.num_atoms(); ++i) {
      const ParsedAtom &a = atoms_[i];
      const int sum = g.bond_order_sum(i);
      if (sum > valence(a.element)) {
        throw ValidationError("valence overflow on atom " + std::to_string(i) +
                              " (" + std::string(symbol(a.element)) +
                              ") at position " + std::to_string(a.position));
      }
      if (a.bracket_h >= 0 && sum + a.bracket_h != valence(a.element)) {
        throw ValidationError(
            "bracket atom at position " + std::to_string(a.position) +
            " does not satisfy the valence of " +
            std::string(symbol(a.element)) + " (radicals are unsupported)");
      }
    }
    return Molecule::from_graph(std::move(g));
  }

  std::string_view text_;
  ElementSet elements_;
  std::size_t pos_ = 0;
  std::vector<ParsedAtom> atoms_;
  std::vector<ParsedBond> bonds_;
  std::map<int, OpenRing> open_rings_;
};

void append_ring_label(std::string &out, int label) {
  if (label < 10) {
    out += static_cast<char>('0' + label);
  } else {
    out += '%';
    out += std::to_string(label);
  }
}

char bond_symbol(int order) {
  return order == 2 ? '=' : order == 3 ? '#' : '\0';
}

}  // namespace

Molecule parse_smiles(std::string_view text, ElementSet elements) {
  return Parser(text, elements).parse();
}

std::string write_smiles(const Molecule &molecule) {
  const Graph &g = molecule.graph();
  const int n = g.num_atoms();
  const CanonicalForm form = canonical_form(g);
  const std::vector<int> &pos = form.labeling;
  std::vector<int> start_atom(n);
  for (int v = 0; v < n; ++v) start_atom[pos[v]] = v;

  // Neighbours in canonical order.
  std::vector<std::vector<Neighbor>> sorted(n);
  for (int v = 0; v < n; ++v) {
    auto nb = g.neighbors(v);
    sorted[v].assign(nb.begin(), nb.end());
    std::sort(sorted[v].begin(), sorted[v].end(),
              [&](const Neighbor &x, const Neighbor &y) {
                return pos[x.atom] < pos[y.atom];
              });
  }

  // First pass: DFS tree and ring-closure bonds.
  std::vector<int> visit(n, -1);
  std::vector<std::vector<int>> children(n);  // tree child atoms
  std::vector<char> is_tree(g.num_bonds(), 0);
  std::vector<std::vector<int>> closures(n);  // ring bonds at atom
  int counter = 0;
  std::function<void(int, int)> dfs = [&](int v, int parent_bond) {
    visit[v] = counter++;
    for (const Neighbor &nb : sorted[v]) {
      if (nb.bond == parent_bond) continue;
      if (visit[nb.atom] < 0) {
        is_tree[nb.bond] = 1;
        children[v].push_back(nb.atom);
        dfs(nb.atom, nb.bond);
      } else if (!is_tree[nb.bond] &&
                 std::find(closures[v].begin(), closures[v].end(), nb.bond) ==
                     closures[v].end()) {
        closures[v].push_back(nb.bond);
        closures[nb.atom].push_back(nb.bond);
      }
    }
  };
  dfs(start_atom[0], -1);
  for (int v = 0; v < n; ++v) {
    std::sort(closures[v].begin(), closures[v].end(), [&](int x, int y) {
      const Bond &bx = g.bonds()[x];
      const Bond &by = g.bonds()[y];
      const int ox = bx.a == v ? bx.b : bx.a;
      const int oy = by.a == v ? by.b : by.a;
      return pos[ox] < pos[oy];
    });
  }

  // Second pass: emit.
  std::string out;
  std::vector<int> ring_digit(g.num_bonds(), 0);
  std::vector<char> digit_used(100, 0);
  std::function<void(int)> emit = [&](int v) {
    out += symbol(g.element(v));
    std::vector<int> released;
    for (int b : closures[v]) {
      if (ring_digit[b] == 0) {
        int d = 1;
        while (digit_used[d]) ++d;
        digit_used[d] = 1;
        ring_digit[b] = d;
        if (char s = bond_symbol(g.bonds()[b].order)) out += s;
        append_ring_label(out, d);
      } else {
        append_ring_label(out, ring_digit[b]);
        released.push_back(ring_digit[b]);
      }
    }
    for (int d : released) digit_used[d] = 0;
    for (std::size_t i = 0; i < children[v].size(); ++i) {
      const int child = children[v][i];
      const bool branch = i + 1 < children[v].size();
      if (branch) out += '(';
      if (char s = bond_symbol(g.bond_order(v, child))) out += s;
      emit(child);
      if (branch) out += ')';
    }
  };
  emit(start_atom[0]);
  return out;
}

}  // namespace mid
