// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace magv::detail {

/// Joins fields with ',' and terminates with '\n'. Fields containing a
/// comma, quote, CR or LF are quoted with embedded quotes doubled.
std::string csv_line(const std::vector<std::string>& fields);

/// Parses comma-separated records with RFC 4180 quoting. Blank lines are skipped.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

/// Throws ParseError when `text` is not a complete decimal number.
double parse_double(std::string_view text);

}  // namespace magv::detail
