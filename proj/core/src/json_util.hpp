// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace magv::detail {

/// Parses JSON, rejecting duplicate object keys. Duplicates directly under an
/// "args" object raise ValidationError; anything else malformed raises
/// ParseError mentioning `what`.
nlohmann::json parse_json_strict(std::string_view text, std::string_view what);

std::string require_string(const nlohmann::json& j, const char* key, std::string_view what);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

std::vector<std::string> read_lines(const std::string& path);
/// Writes each line followed by '\n'.
void write_lines(const std::string& path, const std::vector<std::string>& lines);

}  // namespace magv::detail
