// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace magv {

struct ChatMessage {
  std::string role;  // "user" or "assistant"
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

/// A callable tool as advertised to the model. `parameters` is a JSON
/// Schema object serialized as text.
struct ToolSpec {
  std::string name;
  std::string description;
  std::string parameters = R"({"type":"object","properties":{}})";
};

struct ChatRequest {
  std::optional<std::string> system_prompt;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::vector<ToolSpec> tools;
};

/// Stable 16-hex-digit digest of everything in the request.
std::string request_fingerprint(const ChatRequest& request);

/// Number of assistant messages already in the conversation.
std::size_t request_turn(const ChatRequest& request);

/// Chat-completion contract shared by every agent role. Implementations are
/// safe for concurrent use.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  /// Returns the model's reply text. Tool calls come back as the JSON text
  /// {"tool_calls": [{"tool": name, "args": {...}}]}. Throws TransportError.
  virtual std::string complete(const ChatRequest& request) = 0;
};

/// Replays canned responses. The script is JSON:
///
///   {"responses": [
///      {"fingerprint": "<16 hex>", "response": "..."},
///      {"index": 3, "response": "..."},
///      {"contains": ["text", ...], "turn": 0, "response": "..."},
///      {"contains": "text", "responses": ["first use", "second use"]}
///    ],
///    "default": "..."}
///
/// Lookup order: exact fingerprint, then the global call index, then the
/// first "contains" rule whose substrings all occur in the request (system
/// prompt and messages) and whose optional "turn" equals request_turn().
/// An entry with "responses" returns its n-th item on its n-th use, the
/// last one repeating. Unmatched requests fall back to "default" or throw
/// TransportError naming the fingerprint.
class MockLlmClient final : public LlmClient {
 public:
  explicit MockLlmClient(std::string_view script_json);
  static std::unique_ptr<MockLlmClient> from_file(const std::string& path);

  std::string complete(const ChatRequest& request) override;

  std::size_t calls() const;

 private:
  struct Entry {
    std::optional<std::string> fingerprint;
    std::optional<std::size_t> index;
    std::vector<std::string> contains;
    std::optional<std::size_t> turn;
    std::vector<std::string> responses;
    std::size_t uses = 0;
  };

  std::string take(Entry& e);

  mutable std::mutex mutex_;
  std::vector<Entry> entries_;
  std::optional<std::string> default_;
  std::size_t calls_ = 0;
};

struct HttpLlmConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4o-mini";
  std::string api_key_env = "OPENAI_API_KEY";
  std::size_t max_in_flight = 4;
  std::size_t max_retries = 2;
  std::chrono::milliseconds retry_backoff{1000};
  std::chrono::seconds timeout{120};
};

/// OpenAI-compatible chat-completion client.
class HttpLlmClient final : public LlmClient {
 public:
  explicit HttpLlmClient(HttpLlmConfig config);
  ~HttpLlmClient() override;

  std::string complete(const ChatRequest& request) override;

  /// Request body sent for `request` (exposed for inspection and tests).
  std::string request_body(const ChatRequest& request) const;
  /// Extracts reply text from a response body; throws TransportError when malformed.
  static std::string parse_reply(std::string_view body);

 private:
  struct State;
  HttpLlmConfig config_;
  std::unique_ptr<State> state_;
};

/// Decorator appending one {"fingerprint", "request", "response"} JSON line
/// per exchange to a transcript file.
class LoggingLlmClient final : public LlmClient {
 public:
  LoggingLlmClient(LlmClient& inner, std::string path);

  std::string complete(const ChatRequest& request) override;

 private:
  LlmClient& inner_;
  std::string path_;
  std::mutex mutex_;
};

}  // namespace magv
