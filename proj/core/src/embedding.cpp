// SPDX-License-Identifier: Apache-2.0

#include "magv/embedding.hpp"

#include <mutex>
#include <optional>

#include <json.hpp>

#include "http_util.hpp"
#include "magv/error.hpp"
#include "magv/parallel.hpp"
#include "magv/random.hpp"
#include "magv/text_features.hpp"

namespace magv {

std::vector<std::vector<double>> EmbeddingProvider::embed_batch(
    std::span<const std::string> texts, std::size_t workers) const {
  std::vector<std::vector<double>> out(texts.size());
  parallel_for(texts.size(), workers, [&](std::size_t i) { out[i] = embed(texts[i]); });
  return out;
}

HashingEmbedder::HashingEmbedder(Tokens tokens, std::size_t dimension)
    : tokens_(tokens), dimension_(dimension) {
  if (dimension_ == 0) throw ValidationError("hashing embedder dimension must be >= 1");
}

std::vector<std::string> HashingEmbedder::split(std::string_view text) const {
  if (tokens_ == Tokens::words) return tokenize(text);
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::string current;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\\' && i + 1 < text.size()) {
      current.push_back(c);
      current.push_back(text[++i]);
    } else if (c == '|') {
      out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  out.push_back(std::move(current));
  return out;
}

std::size_t HashingEmbedder::bucket_of(std::string_view token) const noexcept {
  return static_cast<std::size_t>(fnv1a64(token) % dimension_);
}

std::vector<double> HashingEmbedder::embed(std::string_view text) const {
  std::vector<double> v(dimension_, 0.0);
  for (const auto& token : split(text)) v[bucket_of(token)] += 1.0;
  l2_normalize(v);
  return v;
}

struct RemoteEmbedder::State {
  explicit State(std::size_t limit) : limiter(limit) {}
  detail::InFlightLimiter limiter;
  std::mutex mutex;
  std::optional<std::size_t> dimension;
};

RemoteEmbedder::RemoteEmbedder(RemoteEmbedderConfig config)
    : config_(std::move(config)), state_(std::make_unique<State>(config_.max_in_flight)) {}

RemoteEmbedder::~RemoteEmbedder() = default;

std::vector<double> RemoteEmbedder::embed(std::string_view text) const {
  const nlohmann::json request{{"model", config_.model}, {"input", std::string(text)}};
  std::vector<std::pair<std::string, std::string>> headers;
  if (const auto key = detail::env_or_empty(config_.api_key_env); !key.empty())
    headers.emplace_back("Authorization", "Bearer " + key);

  std::string body;
  {
    const auto slot = state_->limiter.acquire();
    body = detail::post_json(config_.base_url, config_.path, headers, request.dump(),
                             {config_.max_retries, config_.retry_backoff, config_.timeout});
  }

  std::vector<double> v;
  try {
    const auto reply = nlohmann::json::parse(body);
    for (const auto& x : reply.at("data").at(0).at("embedding")) v.push_back(x.get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("embedding response malformed: ") + e.what());
  }
  if (v.empty()) throw ProviderError("embedding response contained an empty vector");

  std::lock_guard lock(state_->mutex);
  if (!state_->dimension) state_->dimension = v.size();
  if (*state_->dimension != v.size())
    throw ProviderError("embedding dimension changed from " + std::to_string(*state_->dimension) +
                        " to " + std::to_string(v.size()));
  return v;
}

}  // namespace magv
