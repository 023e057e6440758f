//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mid {

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

// Deterministic Fisher-Yates permutation of 0..n-1. Uses its own bounded
// draw so the result does not depend on the standard library's
// distribution implementations.
std::vector<int> seeded_permutation(int n, std::uint64_t seed);

}  // namespace mid
