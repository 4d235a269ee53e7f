// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace magv {

/// Text -> fixed-dimension real vector. Implementations must be safe to call
/// from several threads at once.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::vector<double> embed(std::string_view text) const = 0;

  /// Embeds every text, preserving order. The default runs embed() over the
  /// inputs on up to `workers` threads.
  virtual std::vector<std::vector<double>> embed_batch(std::span<const std::string> texts,
                                                       std::size_t workers = 1) const;
};

/// Offline, deterministic embedder: feature hashing (FNV-1a) of tokens into
/// `dimension` buckets, raw counts, L2-normalized.
class HashingEmbedder final : public EmbeddingProvider {
 public:
  enum class Tokens {
    calls,  // split a canonical trajectory on unescaped '|'
    words,  // the tokenize() word rule
  };

  explicit HashingEmbedder(Tokens tokens = Tokens::calls, std::size_t dimension = 256);

  std::vector<double> embed(std::string_view text) const override;

  std::size_t dimension() const noexcept { return dimension_; }
  Tokens tokens() const noexcept { return tokens_; }

  /// The tokens fed to the hash for `text` under the configured rule.
  std::vector<std::string> split(std::string_view text) const;
  std::size_t bucket_of(std::string_view token) const noexcept;

 private:
  Tokens tokens_;
  std::size_t dimension_;
};

struct RemoteEmbedderConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/embeddings";
  std::string model = "text-embedding-3-small";
  std::string api_key_env = "OPENAI_API_KEY";
  std::size_t max_in_flight = 4;
  std::size_t max_retries = 2;
  std::chrono::milliseconds retry_backoff{500};
  std::chrono::seconds timeout{60};
};

/// Client for an OpenAI-compatible embeddings endpoint. The credential comes
/// from the environment variable named in the config; requests beyond
/// max_in_flight block until a slot frees up.
class RemoteEmbedder final : public EmbeddingProvider {
 public:
  explicit RemoteEmbedder(RemoteEmbedderConfig config);
  ~RemoteEmbedder() override;

  std::vector<double> embed(std::string_view text) const override;

 private:
  struct State;
  RemoteEmbedderConfig config_;
  std::unique_ptr<State> state_;
};

}  // namespace magv
