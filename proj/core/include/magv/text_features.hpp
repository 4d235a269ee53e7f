// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace magv {

/// Lowercases ASCII letters and splits on every maximal run of
/// non-alphanumeric ASCII characters. Bytes >= 0x80 are kept inside tokens
/// so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

/// Smoothed TF-IDF over a fitted corpus. Immutable once fitted.
class TfidfModel {
 public:
  TfidfModel() = default;
  TfidfModel(std::vector<std::string> vocabulary, std::vector<double> idf,
             std::size_t corpus_size);

  /// Tokens in lexicographic order; a token's position is its column.
  const std::vector<std::string>& vocabulary() const noexcept { return vocabulary_; }
  const std::vector<double>& idf() const noexcept { return idf_; }
  std::size_t corpus_size() const noexcept { return corpus_size_; }
  std::size_t dimension() const noexcept { return vocabulary_.size(); }

  /// Column of `token`, or -1 when out of vocabulary.
  long index_of(std::string_view token) const;

  bool operator==(const TfidfModel& other) const {
    return vocabulary_ == other.vocabulary_ && idf_ == other.idf_ &&
           corpus_size_ == other.corpus_size_;
  }

 private:
  std::vector<std::string> vocabulary_;
  std::vector<double> idf_;
  std::size_t corpus_size_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

/// idf(t) = ln((1 + N) / (1 + df(t))) + 1. Throws ValidationError on an empty corpus.
TfidfModel fit_tfidf(std::span<const std::string> corpus);

/// Raw counts times idf, L2-normalized. Unknown tokens are ignored; a text
/// with no known token maps to the zero vector.
std::vector<double> transform_tfidf(const TfidfModel& model, std::string_view text);

/// dot(u, v) / (|u| |v|), 0 when either norm is 0. Throws ValidationError on
/// a dimension mismatch.
double cosine(std::span<const double> u, std::span<const double> v);

/// Scales in place to unit length; zero vectors are left as is.
void l2_normalize(std::span<double> v);

}  // namespace magv
