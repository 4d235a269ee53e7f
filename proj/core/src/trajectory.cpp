// SPDX-License-Identifier: Apache-2.0

#include "magv/trajectory.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include <json.hpp>

#include "magv/error.hpp"
#include "magv/verification_case.hpp"
#include "json_util.hpp"

namespace magv {

using nlohmann::json;

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::parse: return "parse";
    case ErrorKind::validation: return "validation";
    case ErrorKind::capacity: return "capacity";
    case ErrorKind::provider: return "provider";
    case ErrorKind::transport: return "transport";
    case ErrorKind::generation: return "generation";
    case ErrorKind::step_cap: return "step_cap";
    case ErrorKind::tool_resolution: return "tool_resolution";
    case ErrorKind::judge_parse: return "judge_parse";
    case ErrorKind::case_assembly: return "case_assembly";
  }
  return "unknown";
}

std::string_view to_string(ArgMode mode) noexcept {
  return mode == ArgMode::with_args ? "with_args" : "without_args";
}

ArgMode arg_mode_from_string(std::string_view text) {
  if (text == "with_args") return ArgMode::with_args;
  if (text == "without_args") return ArgMode::without_args;
  throw ValidationError("unknown argument mode '" + std::string(text) +
                        "' (expected with_args or without_args)");
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

void append_escaped(std::string& out, std::string_view text) {
  for (char c : text) {
    switch (c) {
      case '\\':
      case '|':
      case '(':
      case ')':
      case ',':
      case '=':
        out.push_back('\\');
        break;
      default:
        break;
    }
    out.push_back(c);
  }
}

std::string value_text(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  return value.dump();
}

ToolCall call_from_json(const json& entry, std::size_t index) {
  const auto where = [index] { return "trajectory entry " + std::to_string(index); };
  if (!entry.is_object()) throw ParseError(where() + ": expected an object");
  const auto tool = entry.find("tool");
  if (tool == entry.end() || !tool->is_string())
    throw ParseError(where() + ": missing string field 'tool'");

  std::vector<std::pair<std::string, std::string>> args;
  if (const auto a = entry.find("args"); a != entry.end() && !a->is_null()) {
    if (!a->is_object()) throw ParseError(where() + ": 'args' must be an object");
    for (const auto& [key, value] : a->items()) args.emplace_back(key, value_text(value));
  }
  try {
    return make_tool_call(tool->get<std::string>(), std::move(args));
  } catch (const ValidationError& e) {
    throw ValidationError(where() + ": " + e.what());
  }
}

Trajectory trajectory_from_json(const json& list) {
  if (!list.is_array()) throw ParseError("trajectory must be a list of {tool, args} entries");
  Trajectory t;
  t.calls.reserve(list.size());
  for (std::size_t i = 0; i < list.size(); ++i) t.calls.push_back(call_from_json(list[i], i));
  return t;
}

json trajectory_to_json(const Trajectory& t) {
  json list = json::array();
  for (const auto& call : t.calls) {
    json args = json::object();
    for (const auto& [k, v] : call.args) args[k] = v;
    list.push_back(json{{"tool", call.name}, {"args", std::move(args)}});
  }
  return list;
}

}  // namespace

std::string_view normalized_value(std::string_view value) noexcept { return trim(value); }

ToolCall make_tool_call(std::string_view name,
                        std::vector<std::pair<std::string, std::string>> args) {
  const auto trimmed = trim(name);
  if (trimmed.empty()) throw ValidationError("tool name is empty");
  if (std::any_of(trimmed.begin(), trimmed.end(), is_space))
    throw ValidationError("tool name '" + std::string(trimmed) + "' contains whitespace");
  ToolCall call{std::string(trimmed), {}};
  for (auto& [key, value] : args) {
    if (!call.args.emplace(key, std::move(value)).second)
      throw ValidationError("duplicate argument '" + key + "' in call to " + call.name);
  }
  return call;
}

Trajectory parse_trajectory(std::string_view raw) {
  return trajectory_from_json(detail::parse_json_strict(raw, "trajectory"));
}

std::string render_trajectory(const Trajectory& t) { return trajectory_to_json(t).dump(); }

std::string canonical_call(const ToolCall& call, ArgMode mode) {
  std::string out;
  append_escaped(out, call.name);
  // A call without arguments renders as its bare name in both modes, so
  // stripping arguments and serializing with_args equals without_args.
  if (mode == ArgMode::without_args || call.args.empty()) return out;
  out.push_back('(');
  bool first = true;
  for (const auto& [k, v] : call.args) {
    if (!first) out.push_back(',');
    first = false;
    append_escaped(out, k);
    out.push_back('=');
    append_escaped(out, trim(v));
  }
  out.push_back(')');
  return out;
}

std::vector<std::string> canonical_tokens(const Trajectory& t, ArgMode mode) {
  std::vector<std::string> tokens;
  tokens.reserve(t.calls.size());
  for (const auto& call : t.calls) tokens.push_back(canonical_call(call, mode));
  return tokens;
}

std::string canonical_serialize(const Trajectory& t, ArgMode mode) {
  std::string out;
  for (std::size_t i = 0; i < t.calls.size(); ++i) {
    if (i > 0) out.push_back('|');
    out += canonical_call(t.calls[i], mode);
  }
  return out;
}

Trajectory strip_arguments(const Trajectory& t) {
  Trajectory out = t;
  for (auto& call : out.calls) call.args.clear();
  return out;
}

bool trajectories_equal(const Trajectory& a, const Trajectory& b, ArgMode mode) {
  if (a.calls.size() != b.calls.size()) return false;
  return canonical_serialize(a, mode) == canonical_serialize(b, mode);
}

QuestionRecord parse_question_record(std::string_view line) {
  const json j = detail::parse_json_strict(line, "dataset record");
  if (!j.is_object()) throw ParseError("dataset record must be an object");

  QuestionRecord r;
  r.id = detail::require_string(j, "id", "dataset record");
  r.question = detail::require_string(j, "question", "dataset record");
  if (const auto l = j.find("label"); l != j.end() && !l->is_null()) {
    if (!l->is_number_integer() || (l->get<int>() != 0 && l->get<int>() != 1))
      throw ValidationError("record '" + r.id + "': label must be 0 or 1");
    r.label = l->get<int>();
  }
  const auto t = j.find("trajectory");
  if (t == j.end()) throw ParseError("record '" + r.id + "': missing field 'trajectory'");
  try {
    r.trajectory = trajectory_from_json(*t);
  } catch (const ParseError& e) {
    throw ParseError("record '" + r.id + "': " + e.what());
  }
  if (const auto resp = j.find("response"); resp != j.end() && !resp->is_null()) {
    if (!resp->is_string()) throw ParseError("record '" + r.id + "': response must be a string");
    r.response = resp->get<std::string>();
  }
  return r;
}

std::string render_question_record(const QuestionRecord& r) {
  json j;
  j["id"] = r.id;
  j["question"] = r.question;
  if (r.label) j["label"] = *r.label;
  j["trajectory"] = trajectory_to_json(r.trajectory);
  if (r.response) j["response"] = *r.response;
  return j.dump();
}

std::vector<QuestionRecord> read_dataset(const std::string& path) {
  std::vector<QuestionRecord> records;
  std::size_t line_no = 0;
  for (const auto& line : detail::read_lines(path)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      records.push_back(parse_question_record(line));
    } catch (const Error& e) {
      throw Error(e.kind(), path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

void write_dataset(const std::string& path, const std::vector<QuestionRecord>& records) {
  std::vector<std::string> lines;
  lines.reserve(records.size());
  for (const auto& r : records) lines.push_back(render_question_record(r));
  detail::write_lines(path, lines);
}

VerificationCase parse_verification_case(std::string_view line) {
  const json j = detail::parse_json_strict(line, "case record");
  if (!j.is_object()) throw ParseError("case record must be an object");

  VerificationCase c;
  c.id = detail::require_string(j, "id", "case record");
  const auto where = "case '" + c.id + "'";
  c.base_question = detail::require_string(j, "question", where);
  c.base_response = detail::require_string(j, "response", where);
  if (const auto l = j.find("label"); l != j.end() && !l->is_null()) {
    if (!l->is_number_integer() || (l->get<int>() != 0 && l->get<int>() != 1))
      throw ValidationError(where + ": label must be 0 or 1");
    c.label = l->get<int>();
  }
  const auto t = j.find("trajectory");
  if (t == j.end()) throw ParseError(where + ": missing field 'trajectory'");
  c.base_trajectory = trajectory_from_json(*t);

  const auto alts = j.find("alternates");
  if (alts == j.end() || !alts->is_array()) throw ParseError(where + ": missing list 'alternates'");
  for (std::size_t i = 0; i < alts->size(); ++i) {
    const auto& a = (*alts)[i];
    const auto alt_where = where + " alternate " + std::to_string(i);
    if (!a.is_object()) throw ParseError(alt_where + ": expected an object");
    Alternate alt;
    alt.question = detail::require_string(a, "question", alt_where);
    if (const auto r = a.find("response"); r != a.end() && r->is_string())
      alt.response = r->get<std::string>();
    const auto at = a.find("trajectory");
    if (at == a.end()) throw ParseError(alt_where + ": missing field 'trajectory'");
    alt.trajectory = trajectory_from_json(*at);
    c.alternates.push_back(std::move(alt));
  }
  return c;
}

std::string render_verification_case(const VerificationCase& c) {
  json j;
  j["id"] = c.id;
  j["question"] = c.base_question;
  if (c.label) j["label"] = *c.label;
  j["trajectory"] = trajectory_to_json(c.base_trajectory);
  j["response"] = c.base_response;
  json alts = json::array();
  for (const auto& a : c.alternates) {
    alts.push_back(json{{"question", a.question},
                        {"trajectory", trajectory_to_json(a.trajectory)},
                        {"response", a.response}});
  }
  j["alternates"] = std::move(alts);
  return j.dump();
}

std::vector<VerificationCase> read_cases(const std::string& path) {
  std::vector<VerificationCase> cases;
  std::size_t line_no = 0;
  for (const auto& line : detail::read_lines(path)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      cases.push_back(parse_verification_case(line));
    } catch (const Error& e) {
      throw Error(e.kind(), path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cases;
}

void write_cases(const std::string& path, const std::vector<VerificationCase>& cases) {
  std::vector<std::string> lines;
  lines.reserve(cases.size());
  for (const auto& c : cases) lines.push_back(render_verification_case(c));
  detail::write_lines(path, lines);
}

}  // namespace magv
