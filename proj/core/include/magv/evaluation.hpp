// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "magv/classifiers.hpp"
#include "magv/similarity.hpp"
#include "magv/text_features.hpp"

namespace magv {

/// Folds as sorted index lists. Each class's indices are shuffled with
/// `seed` and dealt round-robin, the deal continuing from where the previous
/// class stopped. Throws ValidationError when k < 2.
std::vector<std::vector<std::size_t>> stratified_folds(std::span<const int> labels, std::size_t k,
                                                       std::uint64_t seed);

enum class F1Averaging { positive_class, macro };

double accuracy(std::span<const int> pred, std::span<const int> gold);

/// Per-class F1 is 2tp / (2tp + fp + fn); a class absent from both pred and
/// gold scores 1.
double f1(std::span<const int> pred, std::span<const int> gold,
          F1Averaging averaging = F1Averaging::positive_class);

/// (p_o - p_e) / (1 - p_e) over arbitrary integer labels; 1 when p_e = 1.
double cohens_kappa(std::span<const int> a, std::span<const int> b);

/// One labeled example: its base question and trajectory feature vector.
struct Sample {
  std::string id;
  std::string question;
  std::vector<double> trajectory_features;
  int label = 0;
};

/// Computes trajectory features for every labeled case. Throws
/// ValidationError when a case has no label.
std::vector<Sample> make_samples(std::span<const VerificationCase> cases,
                                 const FeatureOptions& options,
                                 const EmbeddingProvider& embedder, std::size_t workers = 1);

struct CvProtocol {
  std::size_t folds = 10;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  ArgMode mode = ArgMode::with_args;
  Aggregation aggregation = Aggregation::mean;
  /// Indices into the trajectory feature vector; empty means all of them.
  std::vector<std::size_t> feature_subset;
  /// Append TF-IDF features of the base question, fitted per training fold.
  bool use_tfidf = true;
  std::size_t workers = 1;
};

struct CvCell {
  std::string model;
  std::uint64_t seed = 0;
  std::size_t fold = 0;
  double accuracy = 0;
  double f1 = 0;        // positive class
  double f1_macro = 0;
};

struct ModelSummary {
  std::string model;
  double accuracy = 0;
  double f1 = 0;
  double f1_macro = 0;
};

struct CvReport {
  std::size_t folds = 0;
  std::vector<std::uint64_t> seeds;
  ArgMode mode = ArgMode::with_args;
  Aggregation aggregation = Aggregation::mean;
  std::vector<std::size_t> feature_subset;
  bool use_tfidf = true;
  std::vector<CvCell> cells;          // ordered by model, seed, fold
  std::vector<ModelSummary> summary;  // flat mean over every (seed, fold) cell
};

/// Parameters fitted on one training portion; reported to a FoldObserver.
struct FoldFit {
  std::uint64_t seed = 0;
  std::size_t fold = 0;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  std::optional<TfidfModel> tfidf;
  Standardizer standardizer;
};

/// Called once per (model, seed, fold), possibly from worker threads.
using FoldObserver = std::function<void(const std::string& model, const FoldFit&)>;

/// Display name of a spec, e.g. "knn(k=4)".
std::string model_label(const ModelSpec& spec);

/// Stratified cross-validation of each spec over every protocol seed. The
/// fold seed is the protocol seed; a spec's own seed is replaced by it so
/// randomized models vary with the protocol seed too. TF-IDF and
/// standardization are fitted on the training rows only.
CvReport cross_validate(std::span<const Sample> samples, std::span<const ModelSpec> specs,
                        const CvProtocol& protocol, const FoldObserver& observer = {});

inline CvReport cross_validate(std::span<const Sample> samples, const ModelSpec& spec,
                               const CvProtocol& protocol, const FoldObserver& observer = {}) {
  return cross_validate(samples, std::span<const ModelSpec>(&spec, 1), protocol, observer);
}

std::string render_cv_report(const CvReport& report);
/// model,accuracy,f1,f1_macro rows, one per model.
std::string render_cv_summary(const CvReport& report);

struct SubsetScore {
  std::vector<std::size_t> subset;  // feature indices, ascending
  double accuracy = 0;
  double f1 = 0;
};

struct AblationResult {
  std::string model;
  /// Per seed, every subset tied for the best (accuracy, then F1) score.
  std::vector<std::vector<SubsetScore>> best_per_seed;
  /// Subsets in the best set of every seed, with scores averaged over seeds.
  std::vector<SubsetScore> consistent_best;
  /// Highest mean accuracy (then F1, then fewer features) across seeds.
  SubsetScore best_mean;
};

struct AblationReport {
  std::vector<std::string> feature_names;
  std::size_t folds = 5;
  std::vector<std::uint64_t> seeds;
  std::size_t subsets_evaluated = 0;
  std::vector<AblationResult> models;
};

/// Every non-empty subset of the trajectory features (no TF-IDF), each
/// scored by cross-validation per seed.
AblationReport ablate_features(std::span<const Sample> samples, std::span<const ModelSpec> specs,
                               std::span<const std::string> feature_names,
                               std::size_t folds = 5,
                               std::vector<std::uint64_t> seeds = {1, 2, 3},
                               std::size_t workers = 1);

std::string render_ablation_report(const AblationReport& report);

}  // namespace magv
