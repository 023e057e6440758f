//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "mid/depict.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <queue>

#include "mid/canon.hpp"
#include "mid/error.hpp"
#include "mid/rings.hpp"

namespace mid {
namespace {

std::vector<std::vector<int>> distances(const Graph &g) {
  const int n = g.num_atoms();
  std::vector<std::vector<int>> d(n, std::vector<int>(n, -1));
  for (int s = 0; s < n; ++s) {
    std::queue<int> q;
    d[s][s] = 0;
    q.push(s);
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      for (const Neighbor &nb : g.neighbors(v)) {
        if (d[s][nb.atom] < 0) {
          d[s][nb.atom] = d[s][v] + 1;
          q.push(nb.atom);
        }
      }
    }
  }
  return d;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string label(const Graph &g, int atom) {
  const Element e = g.element(atom);
  const int h = valence(e) - g.bond_order_sum(atom);
  if (e == Element::C && g.num_atoms() > 1) return "";
  std::string out(symbol(e));
  if (h > 0) out += "H";
  if (h > 1) out += std::to_string(h);
  return out;
}

const char *color(Element e) {
  switch (e) {
    case Element::N: return "#2f4fc8";
    case Element::O: return "#d0311f";
    case Element::F: return "#3a9a3a";
    case Element::S: return "#b08a00";
    case Element::Cl: return "#2a8a5a";
    case Element::Br: return "#8a3a1a";
    default: return "#222";
  }
}

// Atoms of a ring given as consecutive bonds, in walking order.
std::vector<int> ring_atoms(const Graph &g, const std::vector<int> &bonds) {
  const Bond &first = g.bonds()[bonds.front()];
  const Bond &second = g.bonds()[bonds[1]];
  int at = (first.a == second.a || first.a == second.b) ? first.b : first.a;
  std::vector<int> atoms;
  for (int b : bonds) {
    atoms.push_back(at);
    const Bond &bond = g.bonds()[b];
    at = bond.a == at ? bond.b : bond.a;
  }
  return atoms;
}

}  // namespace

std::vector<Point> layout_2d(const Graph &g) {
  const int n = g.num_atoms();
  std::vector<Point> p(n);
  if (n <= 1) return p;
  const auto d = distances(g);
  // Start on a spiral: distinct points keep the majorization well posed.
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * i / n;
    const double r = 0.6 * n / std::numbers::pi * (1.0 + 0.05 * i);
    p[i] = {r * std::cos(a), r * std::sin(a)};
  }
  // Graph distance maps to about 1.7 bond lengths per two hops, close to
  // the 120 degree geometry of a zigzag chain. Atoms sharing a ring get
  // the chord of the regular polygon instead, which draws rings as
  // regular polygons.
  std::vector<std::vector<double>> target(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int k = d[i][j] < 0 ? n : d[i][j];
      target[i][j] = k == 1 ? 1.0 : 0.87 * k;
    }
  }
  std::vector<std::vector<int>> rings;
  for (const auto &bonds : smallest_rings(g)) rings.push_back(ring_atoms(g, bonds));
  std::sort(rings.begin(), rings.end(),
            [](const auto &a, const auto &b) { return a.size() > b.size(); });
  for (const auto &ring : rings) {
    const int m = static_cast<int>(ring.size());
    for (int a = 0; a < m; ++a) {
      for (int b = 0; b < m; ++b) {
        const int k = std::min((a - b + m) % m, (b - a + m) % m);
        if (k == 0) continue;
        target[ring[a]][ring[b]] =
            std::sin(std::numbers::pi * k / m) / std::sin(std::numbers::pi / m);
      }
    }
  }
  for (int iter = 0; iter < 300; ++iter) {
    for (int i = 0; i < n; ++i) {
      double sx = 0, sy = 0, sw = 0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double t = target[i][j];
        const double w = 1.0 / (t * t);
        const double dx = p[i].x - p[j].x, dy = p[i].y - p[j].y;
        const double len = std::max(std::hypot(dx, dy), 1e-9);
        sx += w * (p[j].x + t * dx / len);
        sy += w * (p[j].y + t * dy / len);
        sw += w;
      }
      p[i] = {sx / sw, sy / sw};
    }
  }
  return p;
}

std::string depict_svg(const Molecule &molecule, int size) {
  if (molecule.num_atoms() > kMaxDepictAtoms) {
    throw ValidationError("cannot depict more than " + std::to_string(kMaxDepictAtoms) + " atoms");
  }
  // The graph rebuilt from the canonical key has canonical atom and bond
  // order.
  const Graph g = graph_from_key(canonical_key(molecule));
  const int n = g.num_atoms();
  std::vector<Point> pts = layout_2d(g);

  double minx = 0, maxx = 0, miny = 0, maxy = 0;
  for (int i = 0; i < n; ++i) {
    if (i == 0 || pts[i].x < minx) minx = pts[i].x;
    if (i == 0 || pts[i].x > maxx) maxx = pts[i].x;
    if (i == 0 || pts[i].y < miny) miny = pts[i].y;
    if (i == 0 || pts[i].y > maxy) maxy = pts[i].y;
  }
  const double margin = 0.12 * size;
  const double span = std::max({maxx - minx, maxy - miny, 1.0});
  const double scale = std::min((size - 2 * margin) / span, 0.22 * size);
  const double cx = 0.5 * (minx + maxx), cy = 0.5 * (miny + maxy);
  auto X = [&](double x) { return 0.5 * size + (x - cx) * scale; };
  auto Y = [&](double y) { return 0.5 * size + (y - cy) * scale; };

  std::vector<std::string> labels(n);
  for (int p = 0; p < n; ++p) labels[p] = label(g, p);

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(size) +
                    "\" height=\"" + std::to_string(size) + "\" viewBox=\"0 0 " +
                    std::to_string(size) + " " + std::to_string(size) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<g stroke=\"#222\" stroke-width=\"2\" stroke-linecap=\"round\">\n";
  const double gap = 0.12;  // line spacing in bond lengths
  for (const Bond &b : g.bonds()) {
    Point a = pts[b.a], c = pts[b.b];
    const double len = std::max(std::hypot(c.x - a.x, c.y - a.y), 1e-9);
    const double ux = (c.x - a.x) / len, uy = (c.y - a.y) / len;
    // Leave room for atom labels.
    if (!labels[b.a].empty()) a = {a.x + 0.28 * ux, a.y + 0.28 * uy};
    if (!labels[b.b].empty()) c = {c.x - 0.28 * ux, c.y - 0.28 * uy};
    for (int k = 0; k < b.order; ++k) {
      const double off = (k - 0.5 * (b.order - 1)) * gap;
      const double ox = -uy * off, oy = ux * off;
      svg += "<line x1=\"" + fmt(X(a.x + ox)) + "\" y1=\"" + fmt(Y(a.y + oy)) + "\" x2=\"" +
             fmt(X(c.x + ox)) + "\" y2=\"" + fmt(Y(c.y + oy)) + "\"/>\n";
    }
  }
  svg += "</g>\n<g font-family=\"sans-serif\" font-size=\"" + fmt(std::clamp(0.3 * scale, 9.0, 18.0)) +
         "\" text-anchor=\"middle\" dominant-baseline=\"central\">\n";
  for (int p = 0; p < n; ++p) {
    if (labels[p].empty()) continue;
    svg += "<text x=\"" + fmt(X(pts[p].x)) + "\" y=\"" + fmt(Y(pts[p].y)) + "\" fill=\"" +
           color(g.element(p)) + "\">" + labels[p] + "</text>\n";
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

}  // namespace mid
