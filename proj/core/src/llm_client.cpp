// SPDX-License-Identifier: Apache-2.0

#include "magv/llm_client.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "http_util.hpp"
#include "json_util.hpp"
#include "magv/error.hpp"
#include "magv/random.hpp"

namespace magv {

using nlohmann::json;

namespace {

json request_to_json(const ChatRequest& r) {
  json messages = json::array();
  for (const auto& m : r.messages) messages.push_back(json{{"role", m.role}, {"content", m.content}});
  json tools = json::array();
  for (const auto& t : r.tools)
    tools.push_back(json{{"name", t.name}, {"description", t.description}, {"parameters", t.parameters}});
  json j{{"messages", std::move(messages)}, {"temperature", r.temperature}, {"tools", std::move(tools)}};
  if (r.system_prompt) j["system"] = *r.system_prompt;
  return j;
}

std::string request_text(const ChatRequest& r) {
  std::string text = r.system_prompt.value_or("");
  for (const auto& m : r.messages) {
    text.push_back('\n');
    text += m.content;
  }
  return text;
}

}  // namespace

std::string request_fingerprint(const ChatRequest& request) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(request_to_json(request).dump())));
  return buf;
}

std::size_t request_turn(const ChatRequest& request) {
  std::size_t n = 0;
  for (const auto& m : request.messages) n += m.role == "assistant" ? 1 : 0;
  return n;
}

// ---------------------------------------------------------------- mock

MockLlmClient::MockLlmClient(std::string_view script_json) {
  const json script = detail::parse_json_strict(script_json, "mock script");
  try {
    for (const auto& e : script.at("responses")) {
      Entry entry;
      if (e.contains("fingerprint")) entry.fingerprint = e.at("fingerprint").get<std::string>();
      if (e.contains("index")) entry.index = e.at("index").get<std::size_t>();
      if (e.contains("turn")) entry.turn = e.at("turn").get<std::size_t>();
      if (e.contains("contains")) {
        const auto& c = e.at("contains");
        if (c.is_string()) entry.contains.push_back(c.get<std::string>());
        else entry.contains = c.get<std::vector<std::string>>();
      }
      if (e.contains("response")) entry.responses.push_back(e.at("response").get<std::string>());
      if (e.contains("responses")) {
        for (const auto& r : e.at("responses")) entry.responses.push_back(r.get<std::string>());
      }
      if (entry.responses.empty()) throw ParseError("mock script entry without a response");
      if (!entry.fingerprint && !entry.index && entry.contains.empty() && !entry.turn)
        throw ParseError("mock script entry needs fingerprint, index, contains or turn");
      entries_.push_back(std::move(entry));
    }
    if (script.contains("default")) default_ = script.at("default").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("mock script: ") + e.what());
  }
}

std::unique_ptr<MockLlmClient> MockLlmClient::from_file(const std::string& path) {
  return std::make_unique<MockLlmClient>(detail::read_file(path));
}

std::string MockLlmClient::take(Entry& e) {
  const std::size_t i = std::min(e.uses, e.responses.size() - 1);
  ++e.uses;
  return e.responses[i];
}

std::string MockLlmClient::complete(const ChatRequest& request) {
  const auto fp = request_fingerprint(request);
  const auto text = request_text(request);
  const auto turn = request_turn(request);

  std::lock_guard lock(mutex_);
  const std::size_t index = calls_++;
  for (auto& e : entries_)
    if (e.fingerprint && *e.fingerprint == fp) return take(e);
  for (auto& e : entries_)
    if (e.index && *e.index == index) return take(e);
  for (auto& e : entries_) {
    if (e.fingerprint || e.index) continue;
    if (e.turn && *e.turn != turn) continue;
    const bool all = std::all_of(e.contains.begin(), e.contains.end(), [&](const std::string& s) {
      return text.find(s) != std::string::npos;
    });
    if (all) return take(e);
  }
  if (default_) return *default_;
  throw TransportError("mock client: no scripted response for request " + fp + " (call " +
                       std::to_string(index) + ", turn " + std::to_string(turn) + ")");
}

std::size_t MockLlmClient::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

// ---------------------------------------------------------------- http

struct HttpLlmClient::State {
  explicit State(std::size_t limit) : limiter(limit) {}
  detail::InFlightLimiter limiter;
};

HttpLlmClient::HttpLlmClient(HttpLlmConfig config)
    : config_(std::move(config)), state_(std::make_unique<State>(config_.max_in_flight)) {}

HttpLlmClient::~HttpLlmClient() = default;

std::string HttpLlmClient::request_body(const ChatRequest& request) const {
  json messages = json::array();
  if (request.system_prompt)
    messages.push_back(json{{"role", "system"}, {"content", *request.system_prompt}});
  for (const auto& m : request.messages)
    messages.push_back(json{{"role", m.role}, {"content", m.content}});
  json body{{"model", config_.model}, {"temperature", request.temperature}, {"messages", messages}};
  if (!request.tools.empty()) {
    json tools = json::array();
    for (const auto& t : request.tools) {
      tools.push_back(json{{"type", "function"},
                           {"function",
                            {{"name", t.name},
                             {"description", t.description},
                             {"parameters", json::parse(t.parameters)}}}});
    }
    body["tools"] = std::move(tools);
  }
  return body.dump();
}

std::string HttpLlmClient::parse_reply(std::string_view body) {
  try {
    const auto reply = json::parse(body);
    const auto& message = reply.at("choices").at(0).at("message");
    if (const auto tc = message.find("tool_calls"); tc != message.end() && tc->is_array() && !tc->empty()) {
      json calls = json::array();
      for (const auto& call : *tc) {
        const auto& fn = call.at("function");
        const auto& raw_args = fn.at("arguments");
        json args = raw_args.is_string() ? json::parse(raw_args.get<std::string>()) : raw_args;
        calls.push_back(json{{"tool", fn.at("name")}, {"args", std::move(args)}});
      }
      return json{{"tool_calls", std::move(calls)}}.dump();
    }
    const auto& content = message.at("content");
    return content.is_string() ? content.get<std::string>() : std::string();
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed chat-completion response: ") + e.what());
  }
}

std::string HttpLlmClient::complete(const ChatRequest& request) {
  std::vector<std::pair<std::string, std::string>> headers;
  if (const auto key = detail::env_or_empty(config_.api_key_env); !key.empty())
    headers.emplace_back("Authorization", "Bearer " + key);
  const auto body = request_body(request);
  const auto slot = state_->limiter.acquire();
  return parse_reply(detail::post_json(config_.base_url, config_.path, headers, body,
                                       {config_.max_retries, config_.retry_backoff, config_.timeout}));
}

// ---------------------------------------------------------------- logging

LoggingLlmClient::LoggingLlmClient(LlmClient& inner, std::string path)
    : inner_(inner), path_(std::move(path)) {}

std::string LoggingLlmClient::complete(const ChatRequest& request) {
  auto response = inner_.complete(request);
  const json line{{"fingerprint", request_fingerprint(request)},
                  {"request", request_to_json(request)},
                  {"response", response}};
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw ValidationError("cannot append to transcript '" + path_ + "'");
  out << line.dump() << '\n';
  return response;
}

}  // namespace magv
