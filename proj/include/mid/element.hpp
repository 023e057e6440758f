//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mid {

// Heavy-atom elements known to the toolkit, in configured-set order.
enum class Element : std::uint8_t { C = 0, N, O, F, S, Cl, Br };

inline constexpr int kNumElements = 7;

inline constexpr std::array<Element, kNumElements> kAllElements = {
    Element::C, Element::N, Element::O, Element::F,
    Element::S, Element::Cl, Element::Br};

constexpr int valence(Element e) {
  constexpr std::array<int, kNumElements> table = {4, 3, 2, 1, 2, 1, 1};
  return table[static_cast<int>(e)];
}

constexpr std::string_view symbol(Element e) {
  constexpr std::array<std::string_view, kNumElements> table = {
      "C", "N", "O", "F", "S", "Cl", "Br"};
  return table[static_cast<int>(e)];
}

std::optional<Element> element_from_symbol(std::string_view sym);

// A subset of the known elements. The default set mirrors QM9 chemistry;
// the extended set adds sulfur and the heavier halogens.
class ElementSet {
 public:
  constexpr ElementSet() = default;

  static constexpr ElementSet standard() {
    return ElementSet{(1u << 0) | (1u << 1) | (1u << 2) | (1u << 3)};
  }
  static constexpr ElementSet extended() { return ElementSet{0x7f}; }

  static ElementSet of(const std::vector<Element> &elements);
  // Parses "default", "extended" or a comma list such as "C,N,O".
  static ElementSet parse(std::string_view text);

  constexpr bool contains(Element e) const {
    return (bits_ >> static_cast<int>(e)) & 1u;
  }
  constexpr void insert(Element e) { bits_ |= 1u << static_cast<int>(e); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::uint32_t bits() const { return bits_; }

  std::vector<Element> members() const;
  std::string to_string() const;

  friend constexpr bool operator==(ElementSet, ElementSet) = default;

 private:
  constexpr explicit ElementSet(std::uint32_t bits) : bits_(bits) {}
  std::uint32_t bits_ = 0;
};

}  // namespace mid
