//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "mid/element.hpp"

#include "mid/error.hpp"

namespace mid {

std::optional<Element> element_from_symbol(std::string_view sym) {
  for (Element e : kAllElements) {
    if (symbol(e) == sym) return e;
  }
  return std::nullopt;
}

ElementSet ElementSet::of(const std::vector<Element> &elements) {
  ElementSet set;
  for (Element e : elements) set.insert(e);
  return set;
}

ElementSet ElementSet::parse(std::string_view text) {
  if (text == "default" || text == "standard") return standard();
  if (text == "extended") return extended();
  ElementSet set;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    if (comma == std::string_view::npos) comma = text.size();
    std::string_view sym = text.substr(start, comma - start);
    auto e = element_from_symbol(sym);
    if (!e) {
      throw ValidationError("unknown element '" + std::string(sym) + "'");
    }
    set.insert(*e);
    start = comma + 1;
  }
  if (set.empty()) throw ValidationError("empty element set");
  return set;
}

std::vector<Element> ElementSet::members() const {
  std::vector<Element> out;
  for (Element e : kAllElements) {
    if (contains(e)) out.push_back(e);
  }
  return out;
}

std::string ElementSet::to_string() const {
  std::string out;
  for (Element e : members()) {
    if (!out.empty()) out += ',';
    out += symbol(e);
  }
  return out;
}

}  // namespace mid
