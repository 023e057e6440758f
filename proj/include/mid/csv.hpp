//
// Project mid - Copyright 2026 The mid Authors.
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mid {

struct CsvRecord {
  int line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

// RFC 4180 reader: comma separator, double-quoted fields with "" escapes,
// CRLF or LF line ends, quoted fields may span lines. A UTF-8 BOM is
// skipped. Blank trailing lines are ignored. Throws ParseError with the
// line number on malformed quoting.
std::vector<CsvRecord> read_csv(std::string_view text);

// Quotes a field when it contains a comma, quote or line break.
std::string csv_field(std::string_view value);

}  // namespace mid
