// SPDX-License-Identifier: Apache-2.0

#include "magv/text_features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "magv/error.hpp"

namespace magv {

namespace {

bool is_token_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_token_byte(c)) {
      current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

TfidfModel::TfidfModel(std::vector<std::string> vocabulary, std::vector<double> idf,
                       std::size_t corpus_size)
    : vocabulary_(std::move(vocabulary)), idf_(std::move(idf)), corpus_size_(corpus_size) {
  if (vocabulary_.size() != idf_.size())
    throw ValidationError("tf-idf vocabulary and idf sizes differ");
  index_.reserve(vocabulary_.size());
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) index_.emplace(vocabulary_[i], i);
}

long TfidfModel::index_of(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? -1 : static_cast<long>(it->second);
}

TfidfModel fit_tfidf(std::span<const std::string> corpus) {
  if (corpus.empty()) throw ValidationError("cannot fit tf-idf on an empty corpus");
  std::map<std::string, std::size_t> document_frequency;
  for (const auto& doc : corpus) {
    const auto tokens = tokenize(doc);
    for (const auto& t : std::set<std::string>(tokens.begin(), tokens.end()))
      ++document_frequency[t];
  }
  const double n = static_cast<double>(corpus.size());
  std::vector<std::string> vocabulary;
  std::vector<double> idf;
  vocabulary.reserve(document_frequency.size());
  idf.reserve(document_frequency.size());
  for (const auto& [token, df] : document_frequency) {
    vocabulary.push_back(token);
    idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(df))) + 1.0);
  }
  return TfidfModel(std::move(vocabulary), std::move(idf), corpus.size());
}

std::vector<double> transform_tfidf(const TfidfModel& model, std::string_view text) {
  std::vector<double> v(model.dimension(), 0.0);
  for (const auto& token : tokenize(text)) {
    if (const long i = model.index_of(token); i >= 0) v[static_cast<std::size_t>(i)] += 1.0;
  }
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= model.idf()[i];
  l2_normalize(v);
  return v;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw ValidationError("cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                          std::to_string(v.size()) + ")");
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

void l2_normalize(std::span<double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq == 0.0) return;
  const double norm = std::sqrt(sq);
  for (double& x : v) x /= norm;
}

}  // namespace magv
