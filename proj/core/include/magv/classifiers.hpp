// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "magv/trajectory.hpp"

namespace magv {

/// Row-major feature matrix; every row has the same length.
using FeatureMatrix = std::vector<std::vector<double>>;

enum class Algorithm { knn, logistic_regression, gaussian_nb, decision_tree, random_forest };

std::string_view to_string(Algorithm a) noexcept;
Algorithm algorithm_from_string(std::string_view text);

/// Algorithm choice plus its hyperparameters. Fields that do not apply to
/// the chosen algorithm are ignored.
struct ModelSpec {
  Algorithm algorithm = Algorithm::knn;

  // knn
  std::size_t k = 5;
  // logistic_regression: full-batch gradient descent from zero weights
  double learning_rate = 0.1;
  std::size_t iterations = 1000;
  double l2 = 1.0;
  // gaussian_nb: added variance = var_smoothing * largest feature variance
  double var_smoothing = 1e-9;
  // decision_tree / random_forest; max_depth 0 means unlimited
  std::size_t max_depth = 0;
  std::size_t min_samples_leaf = 1;
  // random_forest; max_features 0 means floor(sqrt(d))
  std::size_t n_trees = 100;
  std::size_t max_features = 0;
  bool bootstrap = true;

  std::uint64_t seed = 0;

  bool operator==(const ModelSpec&) const = default;
};

/// Throws ValidationError when a count is zero or a rate is not positive.
void validate(const ModelSpec& spec);

/// The documented defaults; k-NN uses k = 4 with arguments and k = 5 without.
ModelSpec default_spec(Algorithm algorithm, ArgMode mode, std::uint64_t seed = 0);

/// The five algorithms with default_spec settings, in a fixed order.
std::vector<ModelSpec> default_model_suite(ArgMode mode, std::uint64_t seed = 0);

/// Per-column z-score parameters (population standard deviation).
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> sd;

  std::vector<double> apply(std::span<const double> x) const;
  bool operator==(const Standardizer&) const = default;
};

/// Constant columns get sd = 1 and mean equal to the constant, so they
/// standardize to exactly 0. Throws ValidationError on an empty matrix.
Standardizer standardize_fit(const FeatureMatrix& x);

struct KnnParams {
  FeatureMatrix points;  // standardized training rows
  std::vector<int> labels;
  bool operator==(const KnnParams&) const = default;
};

struct LogisticParams {
  std::vector<double> weights;
  double bias = 0;
  bool operator==(const LogisticParams&) const = default;
};

struct GaussianNbParams {
  std::array<double, 2> log_prior{};
  std::array<std::vector<double>, 2> mean;
  std::array<std::vector<double>, 2> variance;
  bool operator==(const GaussianNbParams&) const = default;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;  // rows with x[feature] <= threshold go left
  std::size_t left = 0, right = 0;
  int label = 0;
  bool operator==(const TreeNode&) const = default;
};

struct DecisionTreeParams {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int predict(std::span<const double> x) const;
  bool operator==(const DecisionTreeParams&) const = default;
};

struct RandomForestParams {
  std::vector<DecisionTreeParams> trees;
  bool operator==(const RandomForestParams&) const = default;
};

using FittedParams = std::variant<KnnParams, LogisticParams, GaussianNbParams,
                                  DecisionTreeParams, RandomForestParams>;

/// A fitted binary classifier. Inputs are standardized internally with the
/// parameters learned at training time.
class TrainedModel {
 public:
  TrainedModel(ModelSpec spec, Standardizer standardizer, FittedParams params);

  const ModelSpec& spec() const noexcept { return spec_; }
  const Standardizer& standardizer() const noexcept { return standardizer_; }
  const FittedParams& params() const noexcept { return params_; }
  std::size_t dimension() const noexcept { return standardizer_.mean.size(); }

  /// 0 or 1. Throws ValidationError on a dimension mismatch.
  int predict(std::span<const double> x) const;
  std::vector<int> predict(const FeatureMatrix& x) const;

  bool operator==(const TrainedModel&) const = default;

 private:
  ModelSpec spec_;
  Standardizer standardizer_;
  FittedParams params_;
};

/// Deterministic given (spec, x, y). Throws ValidationError on size
/// mismatches, fewer than two rows, non-finite features, labels other than
/// 0/1, or a single class for algorithms that need both.
TrainedModel train(const ModelSpec& spec, const FeatureMatrix& x, std::span<const int> y);

/// Versioned JSON document; load_model(save_model(m)) predicts identically.
std::string save_model(const TrainedModel& model);
TrainedModel load_model(std::string_view text);

}  // namespace magv
