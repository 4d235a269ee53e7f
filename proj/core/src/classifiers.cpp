// SPDX-License-Identifier: Apache-2.0

#include "magv/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <json.hpp>

#include "json_util.hpp"
#include "magv/error.hpp"
#include "magv/random.hpp"

namespace magv {

__extension__ using u128 = unsigned __int128;

using nlohmann::json;

std::string_view to_string(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::knn: return "knn";
    case Algorithm::logistic_regression: return "logistic_regression";
    case Algorithm::gaussian_nb: return "gaussian_nb";
    case Algorithm::decision_tree: return "decision_tree";
    case Algorithm::random_forest: return "random_forest";
  }
  return "unknown";
}

Algorithm algorithm_from_string(std::string_view text) {
  for (auto a : {Algorithm::knn, Algorithm::logistic_regression, Algorithm::gaussian_nb,
                 Algorithm::decision_tree, Algorithm::random_forest}) {
    if (to_string(a) == text) return a;
  }
  throw ValidationError("unknown algorithm '" + std::string(text) + "'");
}

void validate(const ModelSpec& spec) {
  if (spec.k < 1) throw ValidationError("knn: k must be >= 1");
  if (spec.iterations < 1) throw ValidationError("logistic_regression: iterations must be >= 1");
  if (!(spec.learning_rate > 0)) throw ValidationError("logistic_regression: learning rate must be > 0");
  if (!(spec.l2 >= 0)) throw ValidationError("logistic_regression: l2 must be >= 0");
  if (!(spec.var_smoothing >= 0)) throw ValidationError("gaussian_nb: var_smoothing must be >= 0");
  if (spec.min_samples_leaf < 1) throw ValidationError("trees: min_samples_leaf must be >= 1");
  if (spec.n_trees < 1) throw ValidationError("random_forest: tree count must be >= 1");
}

ModelSpec default_spec(Algorithm algorithm, ArgMode mode, std::uint64_t seed) {
  ModelSpec spec;
  spec.algorithm = algorithm;
  spec.k = mode == ArgMode::with_args ? 4 : 5;
  spec.seed = seed;
  return spec;
}

std::vector<ModelSpec> default_model_suite(ArgMode mode, std::uint64_t seed) {
  std::vector<ModelSpec> specs;
  for (auto a : {Algorithm::knn, Algorithm::logistic_regression, Algorithm::gaussian_nb,
                 Algorithm::decision_tree, Algorithm::random_forest})
    specs.push_back(default_spec(a, mode, seed));
  return specs;
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / sd[j];
  return out;
}

Standardizer standardize_fit(const FeatureMatrix& x) {
  if (x.empty() || x.front().empty()) throw ValidationError("cannot standardize an empty matrix");
  const std::size_t n = x.size(), d = x.front().size();
  Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  for (std::size_t j = 0; j < d; ++j) {
    const bool constant =
        std::all_of(x.begin(), x.end(), [&](const auto& row) { return row[j] == x.front()[j]; });
    if (constant) {
      s.mean[j] = x.front()[j];
      continue;
    }
    double sum = 0;
    for (const auto& row : x) sum += row[j];
    const double mean = sum / static_cast<double>(n);
    double sq = 0;
    for (const auto& row : x) sq += (row[j] - mean) * (row[j] - mean);
    const double sd = std::sqrt(sq / static_cast<double>(n));
    s.mean[j] = mean;
    s.sd[j] = sd > 0 ? sd : 1.0;
  }
  return s;
}

namespace {

// ---------------------------------------------------------------- knn

int knn_predict(const KnnParams& p, std::size_t k, std::span<const double> z) {
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(p.points.size());
  for (std::size_t i = 0; i < p.points.size(); ++i) {
    double d2 = 0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      const double diff = p.points[i][j] - z[j];
      d2 += diff * diff;
    }
    dist.emplace_back(d2, i);
  }
  // Pairs compare by distance, then by row index.
  const std::size_t kk = std::min(k, dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(kk), dist.end());
  std::size_t ones = 0;
  for (std::size_t i = 0; i < kk; ++i) ones += p.labels[dist[i].second] == 1 ? 1 : 0;
  return 2 * ones > kk ? 1 : 0;
}

// ---------------------------------------------------------------- logistic regression

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double linear(const LogisticParams& p, std::span<const double> z) {
  double t = p.bias;
  for (std::size_t j = 0; j < z.size(); ++j) t += p.weights[j] * z[j];
  return t;
}

LogisticParams fit_logistic(const ModelSpec& spec, const FeatureMatrix& z, std::span<const int> y) {
  const std::size_t n = z.size(), d = z.front().size();
  LogisticParams p{std::vector<double>(d, 0.0), 0.0};
  std::vector<double> grad(d);
  // Loss: mean log-loss + l2 / (2n) * |w|^2; the bias is not penalized.
  for (std::size_t it = 0; it < spec.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double err = sigmoid(linear(p, z[i])) - static_cast<double>(y[i]);
      for (std::size_t j = 0; j < d; ++j) grad[j] += err * z[i][j];
      grad_b += err;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < d; ++j)
      p.weights[j] -= spec.learning_rate * (grad[j] + spec.l2 * p.weights[j]) * inv_n;
    p.bias -= spec.learning_rate * grad_b * inv_n;
  }
  return p;
}

// ---------------------------------------------------------------- gaussian naive bayes

GaussianNbParams fit_gaussian_nb(const ModelSpec& spec, const FeatureMatrix& z,
                                 std::span<const int> y) {
  const std::size_t n = z.size(), d = z.front().size();
  GaussianNbParams p;
  std::array<std::size_t, 2> count{0, 0};
  for (int label : y) ++count[static_cast<std::size_t>(label)];

  double max_var = 0;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0;
    for (const auto& row : z) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0;
    for (const auto& row : z) var += (row[j] - mean) * (row[j] - mean);
    max_var = std::max(max_var, var / static_cast<double>(n));
  }
  double epsilon = spec.var_smoothing * max_var;
  if (epsilon <= 0) epsilon = spec.var_smoothing > 0 ? spec.var_smoothing : 1e-9;

  for (std::size_t c = 0; c < 2; ++c) {
    p.log_prior[c] = std::log(static_cast<double>(count[c]) / static_cast<double>(n));
    p.mean[c].assign(d, 0.0);
    p.variance[c].assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<std::size_t>(y[i]) != c) continue;
      for (std::size_t j = 0; j < d; ++j) p.mean[c][j] += z[i][j];
    }
    for (double& m : p.mean[c]) m /= static_cast<double>(count[c]);
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<std::size_t>(y[i]) != c) continue;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = z[i][j] - p.mean[c][j];
        p.variance[c][j] += diff * diff;
      }
    }
    for (double& v : p.variance[c]) v = v / static_cast<double>(count[c]) + epsilon;
  }
  return p;
}

int gaussian_nb_predict(const GaussianNbParams& p, std::span<const double> z) {
  std::array<double, 2> joint{};
  for (std::size_t c = 0; c < 2; ++c) {
    double ll = p.log_prior[c];
    for (std::size_t j = 0; j < z.size(); ++j) {
      const double diff = z[j] - p.mean[c][j];
      ll -= 0.5 * (std::log(2.0 * std::numbers::pi * p.variance[c][j]) +
                   diff * diff / p.variance[c][j]);
    }
    joint[c] = ll;
  }
  return joint[1] > joint[0] ? 1 : 0;
}

// ---------------------------------------------------------------- trees

struct SplitCandidate {
  int feature = -1;
  double threshold = 0;
  // Split quality q = (l0^2 + l1^2) / nl + (r0^2 + r1^2) / nr; larger q means
  // lower weighted Gini impurity. Stored as a fraction for exact comparison.
  u128 numerator = 0;
  u128 denominator = 1;
};

bool better(const SplitCandidate& a, const SplitCandidate& b) {
  return a.numerator * b.denominator > b.numerator * a.denominator;
}

class TreeBuilder {
 public:
  TreeBuilder(const ModelSpec& spec, const FeatureMatrix& z, std::span<const int> y, Rng* rng)
      : spec_(spec), z_(z), y_(y), rng_(rng), d_(z.front().size()) {
    max_features_ = spec.max_features == 0
                        ? std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d_))))
                        : std::min(spec.max_features, d_);
  }

  DecisionTreeParams build(std::vector<std::size_t> rows) {
    DecisionTreeParams tree;
    grow(tree, std::move(rows), 0);
    return tree;
  }

 private:
  std::size_t grow(DecisionTreeParams& tree, std::vector<std::size_t> rows, std::size_t depth) {
    const std::size_t id = tree.nodes.size();
    tree.nodes.emplace_back();
    std::size_t ones = 0;
    for (auto r : rows) ones += y_[r] == 1 ? 1 : 0;
    tree.nodes[id].label = 2 * ones > rows.size() ? 1 : 0;

    const bool pure = ones == 0 || ones == rows.size();
    const bool depth_reached = spec_.max_depth != 0 && depth >= spec_.max_depth;
    if (pure || depth_reached || rows.size() < 2 * spec_.min_samples_leaf) return id;

    const auto split = find_split(rows);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (z_[r][static_cast<std::size_t>(split.feature)] <= split.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    tree.nodes[id].feature = split.feature;
    tree.nodes[id].threshold = split.threshold;
    const std::size_t l = grow(tree, std::move(left), depth + 1);
    const std::size_t r = grow(tree, std::move(right), depth + 1);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }

  SplitCandidate find_split(const std::vector<std::size_t>& rows) {
    if (rng_ == nullptr) {
      std::vector<std::size_t> all(d_);
      std::iota(all.begin(), all.end(), 0);
      return best_over(rows, all);
    }
    // Random subspace: draw features in random order, evaluating at least
    // max_features of them and continuing until some valid split exists.
    std::vector<std::size_t> order(d_);
    std::iota(order.begin(), order.end(), 0);
    rng_->shuffle(order);
    std::size_t taken = std::min(max_features_, d_);
    while (true) {
      std::vector<std::size_t> subset(order.begin(), order.begin() + static_cast<long>(taken));
      std::sort(subset.begin(), subset.end());
      auto split = best_over(rows, subset);
      if (split.feature >= 0 || taken == d_) return split;
      taken = std::min(d_, taken + max_features_);
    }
  }

  // Features are visited in ascending order and thresholds ascending; only a
  // strictly better split replaces the incumbent.
  SplitCandidate best_over(const std::vector<std::size_t>& rows,
                           const std::vector<std::size_t>& features) const {
    SplitCandidate best;
    bool found = false;
    const std::size_t n = rows.size();
    std::vector<std::size_t> sorted = rows;
    for (const std::size_t f : features) {
      std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
        return z_[a][f] < z_[b][f] || (z_[a][f] == z_[b][f] && a < b);
      });
      std::array<std::uint64_t, 2> left{0, 0}, total{0, 0};
      for (auto r : sorted) ++total[static_cast<std::size_t>(y_[r])];
      for (std::size_t i = 0; i + 1 < n; ++i) {
        ++left[static_cast<std::size_t>(y_[sorted[i]])];
        const double lo = z_[sorted[i]][f], hi = z_[sorted[i + 1]][f];
        if (lo == hi) continue;
        const std::uint64_t nl = i + 1, nr = n - nl;
        if (nl < spec_.min_samples_leaf || nr < spec_.min_samples_leaf) continue;
        const std::uint64_t r0 = total[0] - left[0], r1 = total[1] - left[1];
        SplitCandidate c;
        c.feature = static_cast<int>(f);
        c.threshold = lo + (hi - lo) / 2;
        c.numerator = (u128(left[0] * left[0] + left[1] * left[1]) * nr) +
                      (u128(r0 * r0 + r1 * r1) * nl);
        c.denominator = u128(nl) * nr;
        if (!found || better(c, best)) {
          best = c;
          found = true;
        }
      }
    }
    return best;
  }

  const ModelSpec& spec_;
  const FeatureMatrix& z_;
  std::span<const int> y_;
  Rng* rng_;
  std::size_t d_;
  std::size_t max_features_ = 1;
};

int forest_predict(const RandomForestParams& p, std::span<const double> z) {
  std::size_t ones = 0;
  for (const auto& t : p.trees) ones += t.predict(z) == 1 ? 1 : 0;
  return 2 * ones > p.trees.size() ? 1 : 0;
}

RandomForestParams fit_forest(const ModelSpec& spec, const FeatureMatrix& z,
                              std::span<const int> y) {
  RandomForestParams forest;
  forest.trees.reserve(spec.n_trees);
  const std::size_t n = z.size();
  for (std::size_t t = 0; t < spec.n_trees; ++t) {
    Rng rng(mix_seed(spec.seed, t));
    std::vector<std::size_t> rows(n);
    if (spec.bootstrap) {
      for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    forest.trees.push_back(TreeBuilder(spec, z, y, &rng).build(std::move(rows)));
  }
  return forest;
}

void check_training_data(const ModelSpec& spec, const FeatureMatrix& x, std::span<const int> y) {
  if (x.size() != y.size())
    throw ValidationError("train: " + std::to_string(x.size()) + " rows but " +
                          std::to_string(y.size()) + " labels");
  if (x.size() < 2) throw ValidationError("train: need at least 2 rows");
  const std::size_t d = x.front().size();
  if (d == 0) throw ValidationError("train: rows have no features");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != d) throw ValidationError("train: row " + std::to_string(i) + " has wrong length");
    for (double v : x[i])
      if (!std::isfinite(v))
        throw ValidationError("train: non-finite feature in row " + std::to_string(i));
  }
  std::size_t ones = 0;
  for (int label : y) {
    if (label != 0 && label != 1) throw ValidationError("train: labels must be 0 or 1");
    ones += static_cast<std::size_t>(label);
  }
  const bool single_class = ones == 0 || ones == y.size();
  if (single_class && spec.algorithm != Algorithm::knn)
    throw ValidationError(std::string("train: ") + std::string(to_string(spec.algorithm)) +
                          " needs both classes in the training data");
}

}  // namespace

int DecisionTreeParams::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    i = x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left
                                                                             : nodes[i].right;
  }
  return nodes[i].label;
}

TrainedModel::TrainedModel(ModelSpec spec, Standardizer standardizer, FittedParams params)
    : spec_(std::move(spec)), standardizer_(std::move(standardizer)), params_(std::move(params)) {}

int TrainedModel::predict(std::span<const double> x) const {
  if (x.size() != dimension())
    throw ValidationError("predict: expected " + std::to_string(dimension()) +
                          " features, got " + std::to_string(x.size()));
  const auto z = standardizer_.apply(x);
  return std::visit(
      [&](const auto& p) -> int {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, KnnParams>) return knn_predict(p, spec_.k, z);
        else if constexpr (std::is_same_v<P, LogisticParams>) return sigmoid(linear(p, z)) > 0.5 ? 1 : 0;
        else if constexpr (std::is_same_v<P, GaussianNbParams>) return gaussian_nb_predict(p, z);
        else if constexpr (std::is_same_v<P, DecisionTreeParams>) return p.predict(z);
        else return forest_predict(p, z);
      },
      params_);
}

std::vector<int> TrainedModel::predict(const FeatureMatrix& x) const {
  std::vector<int> out;
  out.reserve(x.size());
  for (const auto& row : x) out.push_back(predict(row));
  return out;
}

TrainedModel train(const ModelSpec& spec, const FeatureMatrix& x, std::span<const int> y) {
  validate(spec);
  check_training_data(spec, x, y);
  auto standardizer = standardize_fit(x);
  FeatureMatrix z;
  z.reserve(x.size());
  for (const auto& row : x) z.push_back(standardizer.apply(row));

  FittedParams params;
  switch (spec.algorithm) {
    case Algorithm::knn:
      params = KnnParams{z, std::vector<int>(y.begin(), y.end())};
      break;
    case Algorithm::logistic_regression:
      params = fit_logistic(spec, z, y);
      break;
    case Algorithm::gaussian_nb:
      params = fit_gaussian_nb(spec, z, y);
      break;
    case Algorithm::decision_tree: {
      std::vector<std::size_t> rows(z.size());
      std::iota(rows.begin(), rows.end(), 0);
      params = TreeBuilder(spec, z, y, nullptr).build(std::move(rows));
      break;
    }
    case Algorithm::random_forest:
      params = fit_forest(spec, z, y);
      break;
  }
  return TrainedModel(spec, std::move(standardizer), std::move(params));
}

// ---------------------------------------------------------------- persistence

namespace {

constexpr int kModelFormatVersion = 1;

json spec_to_json(const ModelSpec& s) {
  return json{{"algorithm", to_string(s.algorithm)},
              {"k", s.k},
              {"learning_rate", s.learning_rate},
              {"iterations", s.iterations},
              {"l2", s.l2},
              {"var_smoothing", s.var_smoothing},
              {"max_depth", s.max_depth},
              {"min_samples_leaf", s.min_samples_leaf},
              {"n_trees", s.n_trees},
              {"max_features", s.max_features},
              {"bootstrap", s.bootstrap},
              {"seed", s.seed}};
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec s;
  s.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
  s.k = j.at("k").get<std::size_t>();
  s.learning_rate = j.at("learning_rate").get<double>();
  s.iterations = j.at("iterations").get<std::size_t>();
  s.l2 = j.at("l2").get<double>();
  s.var_smoothing = j.at("var_smoothing").get<double>();
  s.max_depth = j.at("max_depth").get<std::size_t>();
  s.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
  s.n_trees = j.at("n_trees").get<std::size_t>();
  s.max_features = j.at("max_features").get<std::size_t>();
  s.bootstrap = j.at("bootstrap").get<bool>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

json tree_to_json(const DecisionTreeParams& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    if (n.feature < 0) nodes.push_back(json{{"label", n.label}});
    else
      nodes.push_back(json{{"feature", n.feature},
                           {"threshold", n.threshold},
                           {"left", n.left},
                           {"right", n.right},
                           {"label", n.label}});
  }
  return nodes;
}

DecisionTreeParams tree_from_json(const json& j) {
  DecisionTreeParams t;
  for (const auto& n : j) {
    TreeNode node;
    node.label = n.at("label").get<int>();
    if (n.contains("feature")) {
      node.feature = n.at("feature").get<int>();
      node.threshold = n.at("threshold").get<double>();
      node.left = n.at("left").get<std::size_t>();
      node.right = n.at("right").get<std::size_t>();
    }
    t.nodes.push_back(node);
  }
  const std::size_t n = t.nodes.size();
  if (n == 0) throw ParseError("model file: empty tree");
  for (const auto& node : t.nodes) {
    if (node.feature >= 0 && (node.left >= n || node.right >= n))
      throw ParseError("model file: tree child index out of range");
  }
  return t;
}

}  // namespace

std::string save_model(const TrainedModel& model) {
  json params = std::visit(
      [](const auto& p) -> json {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, KnnParams>) {
          return json{{"points", p.points}, {"labels", p.labels}};
        } else if constexpr (std::is_same_v<P, LogisticParams>) {
          return json{{"weights", p.weights}, {"bias", p.bias}};
        } else if constexpr (std::is_same_v<P, GaussianNbParams>) {
          return json{{"log_prior", p.log_prior}, {"mean", p.mean}, {"variance", p.variance}};
        } else if constexpr (std::is_same_v<P, DecisionTreeParams>) {
          return json{{"nodes", tree_to_json(p)}};
        } else {
          json trees = json::array();
          for (const auto& t : p.trees) trees.push_back(tree_to_json(t));
          return json{{"trees", std::move(trees)}};
        }
      },
      model.params());
  const json doc{{"format", "magv-model"},
                 {"version", kModelFormatVersion},
                 {"spec", spec_to_json(model.spec())},
                 {"standardizer",
                  {{"mean", model.standardizer().mean}, {"sd", model.standardizer().sd}}},
                 {"params", std::move(params)}};
  return doc.dump(2) + "\n";
}

TrainedModel load_model(std::string_view text) {
  const json doc = detail::parse_json_strict(text, "model file");
  try {
    if (doc.at("format") != "magv-model") throw ParseError("not a magv model file");
    if (doc.at("version").get<int>() != kModelFormatVersion)
      throw ParseError("unsupported model file version " + doc.at("version").dump());
    const auto spec = spec_from_json(doc.at("spec"));
    Standardizer st{doc.at("standardizer").at("mean").get<std::vector<double>>(),
                    doc.at("standardizer").at("sd").get<std::vector<double>>()};
    if (st.mean.size() != st.sd.size()) throw ParseError("model file: standardizer sizes differ");
    const auto& p = doc.at("params");
    FittedParams params;
    switch (spec.algorithm) {
      case Algorithm::knn:
        params = KnnParams{p.at("points").get<FeatureMatrix>(), p.at("labels").get<std::vector<int>>()};
        break;
      case Algorithm::logistic_regression:
        params = LogisticParams{p.at("weights").get<std::vector<double>>(), p.at("bias").get<double>()};
        break;
      case Algorithm::gaussian_nb: {
        GaussianNbParams nb;
        nb.log_prior = p.at("log_prior").get<std::array<double, 2>>();
        nb.mean = p.at("mean").get<std::array<std::vector<double>, 2>>();
        nb.variance = p.at("variance").get<std::array<std::vector<double>, 2>>();
        params = std::move(nb);
        break;
      }
      case Algorithm::decision_tree:
        params = tree_from_json(p.at("nodes"));
        break;
      case Algorithm::random_forest: {
        RandomForestParams rf;
        for (const auto& t : p.at("trees")) rf.trees.push_back(tree_from_json(t));
        params = std::move(rf);
        break;
      }
    }
    return TrainedModel(spec, std::move(st), std::move(params));
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
}

}  // namespace magv
