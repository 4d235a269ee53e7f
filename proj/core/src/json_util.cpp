// SPDX-License-Identifier: Apache-2.0

#include "json_util.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "magv/error.hpp"

namespace magv::detail {

using nlohmann::json;

namespace {

struct ObjectFrame {
  std::set<std::string> keys;
  std::string last_key;
  bool is_args = false;
};

struct DuplicateArgument {
  std::string key;
};

struct DuplicateKey {
  std::string key;
};

}  // namespace

json parse_json_strict(std::string_view text, std::string_view what) {
  std::vector<ObjectFrame> frames;
  const json::parser_callback_t check_keys = [&frames](int, json::parse_event_t event,
                                                       json& parsed) {
    switch (event) {
      case json::parse_event_t::object_start: {
        const bool is_args = !frames.empty() && frames.back().last_key == "args";
        frames.push_back(ObjectFrame{{}, {}, is_args});
        break;
      }
      case json::parse_event_t::key: {
        auto& frame = frames.back();
        auto key = parsed.get<std::string>();
        if (!frame.keys.insert(key).second) {
          if (frame.is_args) throw DuplicateArgument{key};
          throw DuplicateKey{key};
        }
        frame.last_key = std::move(key);
        break;
      }
      case json::parse_event_t::object_end:
        frames.pop_back();
        break;
      default:
        break;
    }
    return true;
  };

  try {
    return json::parse(text.begin(), text.end(), check_keys);
  } catch (const DuplicateArgument& d) {
    throw ValidationError("duplicate argument name '" + d.key + "' in " + std::string(what));
  } catch (const DuplicateKey& d) {
    throw ParseError("duplicate key '" + d.key + "' in " + std::string(what));
  } catch (const json::exception& e) {
    throw ParseError("malformed " + std::string(what) + ": " + e.what());
  }
}

std::string require_string(const json& j, const char* key, std::string_view what) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string())
    throw ParseError(std::string(what) + ": missing string field '" + key + "'");
  return it->get<std::string>();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw ValidationError("failed writing '" + path + "'");
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "' for reading");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::string content;
  for (const auto& line : lines) {
    content += line;
    content.push_back('\n');
  }
  write_file(path, content);
}

}  // namespace magv::detail
