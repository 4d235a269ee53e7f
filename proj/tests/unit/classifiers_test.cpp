// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "magv/classifiers.hpp"
#include "magv/error.hpp"
#include "magv/random.hpp"
#include "oracles.hpp"

using namespace magv;

namespace {

struct Data {
  FeatureMatrix x;
  std::vector<int> y;
};

double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(rng.below(1u << 20)) / static_cast<double>(1u << 20);
}

// Two noisy clusters in d dimensions; both classes always present.
Data blobs(Rng& rng, std::size_t n, std::size_t d, double gap) {
  Data data;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = i % 2 == 0 ? 0 : 1;
    std::vector<double> row(d);
    for (auto& v : row) v = uniform(rng, -1, 1) + (label == 1 ? gap : 0.0);
    data.x.push_back(row);
    data.y.push_back(label);
  }
  return data;
}

std::vector<ModelSpec> all_specs() {
  auto specs = default_model_suite(ArgMode::with_args, 4);
  for (auto& s : specs) s.n_trees = 15;
  return specs;
}

}  // namespace

TEST(Standardize, Examples) {
  const auto s = standardize_fit({{1.0}, {3.0}});
  EXPECT_EQ(s.mean[0], 2.0);
  EXPECT_EQ(s.sd[0], 1.0);
  const auto c = standardize_fit({{5.0, 1.0}, {5.0, 2.0}, {5.0, 3.0}});
  EXPECT_EQ(c.sd[0], 1.0);
  EXPECT_EQ(c.apply(std::vector<double>{5.0, 2.0})[0], 0.0);
  FeatureMatrix z;
  Rng rng(2);
  for (int i = 0; i < 30; ++i) z.push_back({uniform(rng, -4, 9)});
  const auto first = standardize_fit(z);
  for (auto& row : z) row = first.apply(row);
  const auto again = standardize_fit(z);
  EXPECT_NEAR(again.mean[0], 0.0, 1e-12);
  EXPECT_NEAR(again.sd[0], 1.0, 1e-12);
  EXPECT_THROW(standardize_fit({}), ValidationError);
}

TEST(Knn, NearestPoint) {
  ModelSpec spec;
  spec.k = 1;
  const auto m = train(spec, {{0.0}, {10.0}}, std::vector<int>{0, 1});
  EXPECT_EQ(m.predict(std::vector<double>{1.0}), 0);
  EXPECT_EQ(m.predict(std::vector<double>{9.0}), 1);
}

TEST(Knn, VoteTieGoesToZero) {
  ModelSpec spec;
  spec.k = 2;
  const auto m = train(spec, {{0.0}, {2.0}}, std::vector<int>{1, 0});
  EXPECT_EQ(m.predict(std::vector<double>{1.0}), 0);
}

TEST(Knn, DistanceTieGoesToLowerRow) {
  ModelSpec spec;
  spec.k = 1;
  // Rows 0 and 1 stay exactly equidistant from the probe after scaling.
  const auto m = train(spec, {{-1.0}, {1.0}, {3.0}}, std::vector<int>{1, 0, 0});
  EXPECT_EQ(m.predict(std::vector<double>{0.0}), 1);
}

TEST(Knn, MatchesBruteForceOracle) {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(40), d = 1 + rng.below(6);
    auto data = blobs(rng, n, d, uniform(rng, 0, 2));
    FeatureMatrix probes;
    for (int p = 0; p < 5; ++p) {
      std::vector<double> row(d);
      for (auto& v : row) v = uniform(rng, -1, 3);
      probes.push_back(row);
    }
    auto z_probes = probes;
    const auto z_train = oracle::zscore_columns(data.x, &z_probes);
    for (std::size_t k : {1u, 4u, 5u}) {
      ModelSpec spec;
      spec.k = k;
      const auto m = train(spec, data.x, data.y);
      for (std::size_t p = 0; p < probes.size(); ++p)
        ASSERT_EQ(m.predict(probes[p]), oracle::knn(z_train, data.y, z_probes[p], k));
    }
  }
}

TEST(Knn, AffineColumnRescalingDoesNotChangePredictions) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    auto data = blobs(rng, 30, 3, 1.0);
    FeatureMatrix probes;
    for (int p = 0; p < 10; ++p) probes.push_back({uniform(rng, -1, 2), uniform(rng, -1, 2), uniform(rng, -1, 2)});
    ModelSpec spec;
    spec.k = 5;
    const auto before = train(spec, data.x, data.y).predict(probes);
    // Powers of two keep the rescaling exact in floating point.
    auto rescale = [](FeatureMatrix m) {
      for (auto& r : m) r[1] = 4.0 * r[1] + 16.0;
      return m;
    };
    const auto after = train(spec, rescale(data.x), data.y).predict(rescale(probes));
    EXPECT_EQ(before, after);
  }
}

TEST(LogisticRegression, ZeroModelPredictsTieBreakClass) {
  ModelSpec spec;
  spec.algorithm = Algorithm::logistic_regression;
  TrainedModel m(spec, Standardizer{{0.0, 0.0}, {1.0, 1.0}}, LogisticParams{{0.0, 0.0}, 0.0});
  EXPECT_EQ(m.predict(std::vector<double>{3.0, -2.0}), 0);
}

TEST(LogisticRegression, MatchesIndependentGradientDescent) {
  Rng rng(13);
  auto data = blobs(rng, 24, 3, 1.0);
  ModelSpec spec;
  spec.algorithm = Algorithm::logistic_regression;
  const auto m = train(spec, data.x, data.y);

  auto z = oracle::zscore_columns(data.x);
  std::vector<double> w(3, 0.0);
  double b = 0;
  const double n = static_cast<double>(z.size());
  for (int it = 0; it < 1000; ++it) {
    std::vector<double> gw(3, 0.0);
    double gb = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      double t = b;
      for (int j = 0; j < 3; ++j) t += w[j] * z[i][j];
      const double err = 1.0 / (1.0 + std::exp(-t)) - data.y[i];
      for (int j = 0; j < 3; ++j) gw[j] += err * z[i][j];
      gb += err;
    }
    // mean log-loss + (l2 / 2n) |w|^2, l2 = 1, learning rate 0.1
    for (int j = 0; j < 3; ++j) w[j] -= 0.1 * (gw[j] / n + w[j] / n);
    b -= 0.1 * gb / n;
  }
  const auto& p = std::get<LogisticParams>(m.params());
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(p.weights[j], w[j], 1e-9);
  EXPECT_NEAR(p.bias, b, 1e-9);
}

TEST(GaussianNb, SeparatedBlobsAndHandLikelihoods) {
  Rng rng(21);
  Data data;
  for (int i = 0; i < 20; ++i) {
    data.x.push_back({uniform(rng, 0, 1)});
    data.y.push_back(0);
    data.x.push_back({uniform(rng, 5, 6)});
    data.y.push_back(1);
  }
  ModelSpec spec;
  spec.algorithm = Algorithm::gaussian_nb;
  const auto m = train(spec, data.x, data.y);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.x.size(); ++i) correct += m.predict(data.x[i]) == data.y[i] ? 1 : 0;
  EXPECT_EQ(correct, data.x.size());

  // Class-conditional Gaussians on standardized values, recomputed here.
  const auto z = oracle::zscore_columns(data.x);
  double mu[2] = {0, 0}, var[2] = {0, 0}, cnt[2] = {0, 0};
  for (std::size_t i = 0; i < z.size(); ++i) {
    mu[data.y[i]] += z[i][0];
    cnt[data.y[i]] += 1;
  }
  for (int c = 0; c < 2; ++c) mu[c] /= cnt[c];
  for (std::size_t i = 0; i < z.size(); ++i) var[data.y[i]] += std::pow(z[i][0] - mu[data.y[i]], 2);
  for (int c = 0; c < 2; ++c) var[c] = var[c] / cnt[c] + 1e-9;  // max feature variance is 1 here
  const auto& sd = m.standardizer();
  for (double probe = -1.0; probe <= 7.0; probe += 0.05) {
    const double zp = (probe - sd.mean[0]) / sd.sd[0];
    double ll[2];
    for (int c = 0; c < 2; ++c)
      ll[c] = std::log(0.5) - 0.5 * std::log(2 * std::numbers::pi * var[c]) -
              (zp - mu[c]) * (zp - mu[c]) / (2 * var[c]);
    EXPECT_EQ(m.predict(std::vector<double>{probe}), ll[1] > ll[0] ? 1 : 0) << probe;
  }
}

TEST(DecisionTree, UnlimitedDepthFitsDistinctRows) {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    Data data;
    for (int i = 0; i < 40; ++i) {
      data.x.push_back({uniform(rng, 0, 1), uniform(rng, 0, 1)});
      data.y.push_back(static_cast<int>(rng.below(2)));
    }
    data.y[0] = 0;
    data.y[1] = 1;
    ModelSpec spec;
    spec.algorithm = Algorithm::decision_tree;
    const auto m = train(spec, data.x, data.y);
    EXPECT_EQ(m.predict(data.x), data.y);
  }
}

TEST(DecisionTree, PureLeafAndDepthLimit) {
  ModelSpec spec;
  spec.algorithm = Algorithm::decision_tree;
  const auto m = train(spec, {{0.0}, {1.0}, {2.0}, {3.0}}, std::vector<int>{0, 0, 1, 1});
  const auto& tree = std::get<DecisionTreeParams>(m.params());
  ASSERT_EQ(tree.nodes.size(), 3u);
  EXPECT_EQ(m.predict(std::vector<double>{-5.0}), 0);
  EXPECT_EQ(m.predict(std::vector<double>{8.0}), 1);
  spec.max_depth = 1;
  const auto stump = train(spec, {{0.0}, {1.0}, {2.0}, {3.0}}, std::vector<int>{0, 1, 0, 1});
  EXPECT_LE(std::get<DecisionTreeParams>(stump.params()).nodes.size(), 3u);
}

TEST(DecisionTree, SplitTieFavorsLowerFeature) {
  ModelSpec spec;
  spec.algorithm = Algorithm::decision_tree;
  // Both columns separate the classes identically.
  const auto m = train(spec, {{0.0, 0.0}, {1.0, 1.0}}, std::vector<int>{0, 1});
  EXPECT_EQ(std::get<DecisionTreeParams>(m.params()).nodes[0].feature, 0);
}

TEST(RandomForest, SameSeedSameModel) {
  Rng rng(77);
  auto data = blobs(rng, 40, 4, 0.7);
  ModelSpec spec;
  spec.algorithm = Algorithm::random_forest;
  spec.seed = 9;
  const auto a = train(spec, data.x, data.y);
  const auto b = train(spec, data.x, data.y);
  EXPECT_TRUE(a == b);
  FeatureMatrix probes;
  for (int i = 0; i < 50; ++i) probes.push_back({uniform(rng, -1, 2), uniform(rng, -1, 2), uniform(rng, -1, 2), uniform(rng, -1, 2)});
  EXPECT_EQ(a.predict(probes), b.predict(probes));
  EXPECT_EQ(std::get<RandomForestParams>(a.params()).trees.size(), 100u);
  spec.seed = 10;
  EXPECT_FALSE(train(spec, data.x, data.y) == a);
}

TEST(AllAlgorithms, DeterministicAndPersistable) {
  Rng rng(5);
  auto data = blobs(rng, 30, 3, 0.8);
  FeatureMatrix probes;
  for (int i = 0; i < 40; ++i) probes.push_back({uniform(rng, -1, 2), uniform(rng, -1, 2), uniform(rng, -1, 2)});
  for (const auto& spec : all_specs()) {
    const auto m = train(spec, data.x, data.y);
    EXPECT_TRUE(m == train(spec, data.x, data.y)) << to_string(spec.algorithm);
    const auto text = save_model(m);
    const auto loaded = load_model(text);
    EXPECT_TRUE(loaded == m) << to_string(spec.algorithm);
    EXPECT_EQ(loaded.predict(probes), m.predict(probes));
    EXPECT_EQ(save_model(loaded), text);
  }
}

TEST(AllAlgorithms, InputValidation) {
  for (auto spec : all_specs()) {
    EXPECT_THROW(train(spec, {{1.0}}, std::vector<int>{0}), ValidationError);
    EXPECT_THROW(train(spec, {{1.0}, {NAN}}, std::vector<int>{0, 1}), ValidationError);
    EXPECT_THROW(train(spec, {{1.0}, {2.0}}, std::vector<int>{0, 2}), ValidationError);
    EXPECT_THROW(train(spec, {{1.0}, {2.0}}, std::vector<int>{0}), ValidationError);
    const auto m = train(spec, {{1.0}, {2.0}, {3.0}}, std::vector<int>{0, 1, 0});
    EXPECT_THROW(m.predict(std::vector<double>{1.0, 2.0}), ValidationError);
    if (spec.algorithm != Algorithm::knn) {
      EXPECT_THROW(train(spec, {{1.0}, {2.0}}, std::vector<int>{1, 1}), ValidationError);
    }
  }
  ModelSpec bad;
  bad.k = 0;
  EXPECT_THROW(validate(bad), ValidationError);
  bad = ModelSpec{};
  bad.algorithm = Algorithm::random_forest;
  bad.n_trees = 0;
  EXPECT_THROW(validate(bad), ValidationError);
}

TEST(Defaults, KnnKDependsOnMode) {
  EXPECT_EQ(default_spec(Algorithm::knn, ArgMode::with_args).k, 4u);
  EXPECT_EQ(default_spec(Algorithm::knn, ArgMode::without_args).k, 5u);
  EXPECT_EQ(default_model_suite(ArgMode::with_args).size(), 5u);
  EXPECT_EQ(algorithm_from_string("random_forest"), Algorithm::random_forest);
  EXPECT_THROW(algorithm_from_string("svm"), ValidationError);
}

TEST(Persistence, RejectsForeignDocuments) {
  EXPECT_THROW(load_model("{}"), ParseError);
  EXPECT_THROW(load_model(R"({"format":"magv-model","version":99})"), ParseError);
  EXPECT_THROW(load_model("not json"), ParseError);
}
