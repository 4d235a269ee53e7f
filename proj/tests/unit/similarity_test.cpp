// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>

#include "fixtures.hpp"
#include "magv/error.hpp"
#include "magv/similarity.hpp"
#include "oracles.hpp"

using namespace magv;
using fixture::call;
using fixture::chain;

namespace {

constexpr double kTol = 1e-12;

const HashingEmbedder& embedder() {
  static const HashingEmbedder e;
  return e;
}

// FNV-1a written out from its definition, for bucket checks.
std::size_t bucket(const std::string& token, std::size_t dim = 256) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : token) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return static_cast<std::size_t>(h % dim);
}

}  // namespace

TEST(ExactMatch, Examples) {
  EXPECT_EQ(exact_match(chain({"a", "b"}), chain({"a", "b"}), ArgMode::with_args), 1);
  EXPECT_EQ(exact_match(chain({"a"}), chain({"a", "b"}), ArgMode::with_args), 0);
  EXPECT_EQ(exact_match(Trajectory{}, Trajectory{}, ArgMode::with_args), 1);
}

TEST(EditDistance, Examples) {
  EXPECT_EQ(edit_distance(chain({"a", "b", "c"}), chain({"a", "b", "c"}), ArgMode::with_args), 0u);
  EXPECT_EQ(edit_distance(chain({"a", "b", "c"}), Trajectory{}, ArgMode::with_args), 3u);
  EXPECT_EQ(edit_distance(chain({"a", "b", "c"}), chain({"a", "c", "d"}), ArgMode::with_args), 2u);
  EXPECT_EQ(oracle::edit_distance({"a", "b", "c"}, {"a", "c", "d"}), 2u);
}

TEST(EditDistance, ArgumentsMatterOnlyWithArgs) {
  Trajectory a{{call("f", {{"x", "1"}}), call("g")}};
  Trajectory b{{call("f", {{"x", "2"}}), call("g")}};
  EXPECT_EQ(edit_distance(a, b, ArgMode::with_args), 1u);
  EXPECT_EQ(edit_distance(a, b, ArgMode::without_args), 0u);
}

TEST(EditDistance, MatchesRecursiveOracleUpToLengthFive) {
  const auto seqs = fixture::all_sequences({"a", "b"}, 5);
  for (const auto& x : seqs)
    for (const auto& y : seqs)
      ASSERT_EQ(levenshtein(x, y), oracle::edit_distance(x, y));
}

TEST(GraphEditDistance, Examples) {
  EXPECT_EQ(graph_edit_distance(chain({"a", "b", "c"}), chain({"a", "b", "c"}), ArgMode::with_args), 0.0);
  EXPECT_EQ(graph_edit_distance(chain({"a"}), chain({"b"}), ArgMode::with_args), 1.0);
  EXPECT_EQ(graph_edit_distance(chain({"a", "b", "c"}), chain({"a", "b"}), ArgMode::with_args), 2.0);
  // Empty against x: every node and edge of x is inserted.
  EXPECT_EQ(graph_edit_distance(Trajectory{}, chain({"a", "b", "c"}), ArgMode::with_args), 5.0);
  EXPECT_EQ(graph_edit_distance(Trajectory{}, Trajectory{}, ArgMode::with_args), 0.0);
}

TEST(GraphEditDistance, MatchesEnumerationOracleUpToLengthThree) {
  const auto seqs = fixture::all_sequences({"a", "b", "c"}, 3);
  for (const auto& x : seqs)
    for (const auto& y : seqs) ASSERT_EQ(path_graph_edit_distance(x, y), oracle::path_ged(x, y));
}

TEST(GraphEditDistance, LongerRandomPairsAgreeWithOracle) {
  Rng rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<std::string> x, y;
    const auto nx = rng.below(7), ny = rng.below(7);
    for (std::uint64_t i = 0; i < nx; ++i) x.push_back(std::string(1, static_cast<char>('a' + rng.below(3))));
    for (std::uint64_t i = 0; i < ny; ++i) y.push_back(std::string(1, static_cast<char>('a' + rng.below(3))));
    ASSERT_EQ(path_graph_edit_distance(x, y), oracle::path_ged(x, y));
  }
}

TEST(GraphEditDistance, CapacityErrorAboveCap) {
  std::vector<std::string> long_seq(16, "a"), short_seq{"a"};
  EXPECT_THROW(path_graph_edit_distance(long_seq, short_seq), CapacityError);
  EXPECT_NO_THROW(path_graph_edit_distance(long_seq, short_seq, 16));
  try {
    path_graph_edit_distance(short_seq, long_seq, 4);
    FAIL();
  } catch (const CapacityError& e) {
    EXPECT_NE(std::string(e.what()).find("cap"), std::string::npos);
  }
}

TEST(GraphEditDistance, FifteenCallsFinishQuickly) {
  std::vector<std::string> x, y;
  Rng rng(3);
  for (int i = 0; i < 15; ++i) {
    x.push_back(std::string(1, static_cast<char>('a' + rng.below(4))));
    y.push_back(std::string(1, static_cast<char>('a' + rng.below(4))));
  }
  const auto d = path_graph_edit_distance(x, y);
  EXPECT_LE(d, 2 * 15u - 1);
}

TEST(SemanticSimilarity, Examples) {
  Trajectory a{{call("f", {{"a", "1"}}), call("g")}};
  EXPECT_DOUBLE_EQ(semantic_similarity(a, a, ArgMode::with_args, embedder()), 1.0);
  EXPECT_EQ(semantic_similarity(a, Trajectory{}, ArgMode::with_args, embedder()), 0.0);
  EXPECT_EQ(semantic_similarity(Trajectory{}, Trajectory{}, ArgMode::with_args, embedder()), 1.0);
}

TEST(SemanticSimilarity, HashingEmbedderHandComputed) {
  // BT tokens {f(a=1), g}, AT tokens {f(a=1)}: one shared unit count.
  ASSERT_NE(bucket("f(a=1)"), bucket("g"));
  Trajectory bt{{call("f", {{"a", "1"}}), call("g")}};
  Trajectory at{{call("f", {{"a", "1"}})}};
  EXPECT_NEAR(semantic_similarity(bt, at, ArgMode::with_args, embedder()), 1.0 / std::sqrt(2.0), kTol);
  // Repeated token: counts [2, 1] against [1, 0].
  ASSERT_NE(bucket("h"), bucket("k"));
  EXPECT_NEAR(semantic_similarity(chain({"h", "h", "k"}), chain({"h"}), ArgMode::with_args, embedder()),
              2.0 / std::sqrt(5.0), kTol);
}

TEST(SemanticSimilarity, OrthogonalEmbeddingsGiveZero) {
  ASSERT_NE(bucket("p"), bucket("q"));
  EXPECT_EQ(semantic_similarity(chain({"p"}), chain({"q"}), ArgMode::with_args, embedder()), 0.0);
}

namespace {

struct MismatchedEmbedder final : EmbeddingProvider {
  std::vector<double> embed(std::string_view text) const override {
    return std::vector<double>(text.size() % 2 == 0 ? 2 : 3, 1.0);
  }
};

struct ZeroEmbedder final : EmbeddingProvider {
  std::vector<double> embed(std::string_view) const override { return {0.0, 0.0}; }
};

}  // namespace

TEST(SemanticSimilarity, ProviderContract) {
  EXPECT_THROW(semantic_similarity(chain({"ab"}), chain({"abc"}), ArgMode::with_args, MismatchedEmbedder{}),
               ProviderError);
  EXPECT_EQ(semantic_similarity(chain({"a"}), chain({"b"}), ArgMode::with_args, ZeroEmbedder{}), 0.0);
}

TEST(ArgumentOverlap, Examples) {
  Trajectory bt{{call("get_current_weather", {{"city", "Boston"}, {"units", "F"}})}};
  Trajectory at{{call("get_current_weather", {{"city", "Boston"}})}};
  EXPECT_NEAR(argument_overlap(bt, at), 2.0 / 3.0, kTol);
  EXPECT_EQ(argument_overlap(bt, bt), 1.0);
  Trajectory disjoint{{call("get_current_weather", {{"city", "Paris"}})}};
  EXPECT_EQ(argument_overlap(bt, disjoint), 0.0);
  EXPECT_EQ(argument_overlap(chain({"a"}), chain({"a"})), 0.0);
}

TEST(ArgumentOverlap, PrefixStopsAtFirstNameMismatchBagDoesNot) {
  Trajectory bt{{call("a", {{"x", "1"}}), call("b", {{"y", "2"}})}};
  Trajectory at{{call("c", {{"x", "1"}}), call("b", {{"y", "2"}})}};
  EXPECT_EQ(argument_overlap(bt, at, ArgAlignment::prefix), 0.0);
  EXPECT_EQ(argument_overlap(bt, at, ArgAlignment::bag), 1.0);
}

TEST(Lcss, Examples) {
  EXPECT_EQ(lcss(chain({"a", "b", "c"}), chain({"a", "b", "c"}), ArgMode::with_args), 1.0);
  EXPECT_NEAR(lcss(chain({"t1", "t2", "t3"}), chain({"t1", "t2", "t4"}), ArgMode::with_args), 2.0 / 3.0, kTol);
  EXPECT_EQ(lcss(chain({"a", "b"}), chain({"b", "b"}), ArgMode::with_args), 0.0);
  EXPECT_EQ(lcss(Trajectory{}, Trajectory{}, ArgMode::with_args), 1.0);
  EXPECT_EQ(lcss(chain({"a"}), Trajectory{}, ArgMode::with_args), 0.0);
}

TEST(FeatureProperties, BoundsAndStrippedEquivalence) {
  Rng rng(23);
  const std::vector<std::string> tools{"a", "b", "c"};
  for (int i = 0; i < 400; ++i) {
    const auto bt = fixture::random_trajectory(rng, tools, 4);
    const auto at = fixture::random_trajectory(rng, tools, 4);
    const auto with = compute_features(bt, at, {}, embedder());
    EXPECT_TRUE(with.em == 0.0 || with.em == 1.0);
    EXPECT_GE(with.lcss, 0.0);
    EXPECT_LE(with.lcss, 1.0);
    EXPECT_GE(with.ao, 0.0);
    EXPECT_LE(with.ao, 1.0);
    EXPECT_GE(with.ss, -1.0);
    EXPECT_LE(with.ss, 1.0);
    if (with.em == 1.0 && !bt.empty()) {
      EXPECT_EQ(with.edit, 0.0);
      EXPECT_EQ(with.gedit, 0.0);
      EXPECT_EQ(with.lcss, 1.0);
    }
    FeatureOptions without{ArgMode::without_args};
    const auto a = to_vector(compute_features(bt, at, without, embedder()), ArgMode::without_args);
    const auto b = to_vector(
        compute_features(strip_arguments(bt), strip_arguments(at), {}, embedder()), ArgMode::without_args);
    EXPECT_EQ(a, b);
  }
}

TEST(CaseFeatures, IdentityCase) {
  VerificationCase c;
  c.base_trajectory = Trajectory{{call("f", {{"a", "1"}}), call("g", {{"b", "2"}})}};
  for (int i = 0; i < 3; ++i) c.alternates.push_back({"q", c.base_trajectory, "r"});
  EXPECT_EQ(compute_case_features(c, {}, embedder()), (std::vector<double>{1, 0, 0, 1, 1, 1}));
}

TEST(CaseFeatures, HandComputedThreeAlternateFixture) {
  const auto w_full = call("w", {{"city", "Boston"}, {"units", "F"}});
  const auto w_city = call("w", {{"city", "Boston"}});
  const auto m_x = call("m", {{"s", "x"}});
  const auto m_y = call("m", {{"s", "y"}});
  for (const auto& t : {"w(city=Boston,units=F)", "w(city=Boston)", "m(s=x)", "m(s=y)"})
    for (const auto& u : {"w(city=Boston,units=F)", "w(city=Boston)", "m(s=x)", "m(s=y)"})
      if (std::string(t) != u) {
        ASSERT_NE(bucket(t), bucket(u));
      }

  VerificationCase c;
  c.id = "fixed";
  c.base_trajectory = Trajectory{{w_full, m_x}};
  c.alternates = {{"q1", Trajectory{{w_full, m_x}}, "r"},
                  {"q2", Trajectory{{w_city}}, "r"},
                  {"q3", Trajectory{{w_full, m_y, m_x}}, "r"}};
  // Per alternate [em, edit, gedit, ss, ao, lcss]:
  //   AT1 identical:          1, 0, 0, 1,          1,   1
  //   AT2 [w(city)]:          0, 2, 3, 0,          1/2, 0
  //   AT3 [w_full, m_y, m_x]: 0, 1, 3, 2/sqrt(6),  4/7, 2/5
  const std::vector<double> expected{1.0 / 3, 1.0, 2.0, (1 + 2 / std::sqrt(6.0)) / 3,
                                     (1 + 0.5 + 4.0 / 7) / 3, (1 + 0.4) / 3};
  const auto got = compute_case_features(c, {}, embedder());
  ASSERT_EQ(got.size(), expected.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expected[i], kTol) << i;

  FeatureOptions concat;
  concat.aggregation = Aggregation::concat;
  const auto wide = compute_case_features(c, concat, embedder());
  ASSERT_EQ(wide.size(), 18u);
  EXPECT_EQ(case_feature_names(concat, 3).size(), 18u);
  EXPECT_EQ(case_feature_names(concat, 3)[6], "em_2");
  EXPECT_NEAR(wide[6 + 4], 0.5, kTol);
  EXPECT_NEAR(wide[12 + 5], 0.4, kTol);
}

TEST(CaseFeatures, EmMeanOfOneZeroZero) {
  VerificationCase c;
  c.base_trajectory = chain({"a"});
  c.alternates = {{"q", chain({"a"}), ""}, {"q", chain({"b"}), ""}, {"q", chain({"c"}), ""}};
  EXPECT_NEAR(compute_case_features(c, {}, embedder())[0], 1.0 / 3, kTol);
}

TEST(CaseFeatures, WithoutArgsDropsAoAndZeroAlternatesThrow) {
  EXPECT_EQ(feature_names(ArgMode::with_args),
            (std::vector<std::string>{"em", "edit", "gedit", "ss", "ao", "lcss"}));
  EXPECT_EQ(feature_names(ArgMode::without_args),
            (std::vector<std::string>{"em", "edit", "gedit", "ss", "lcss"}));
  VerificationCase c;
  c.base_trajectory = chain({"a"});
  EXPECT_THROW(compute_case_features(c, {}, embedder()), ValidationError);
  c.alternates = {{"q", chain({"a"}), ""}};
  EXPECT_EQ(compute_case_features(c, {ArgMode::without_args}, embedder()).size(), 5u);
}

TEST(CaseFeatures, MeanOfIdenticalSetsIsThatSet) {
  VerificationCase c;
  c.base_trajectory = Trajectory{{call("a", {{"x", "1"}}), call("b")}};
  const Trajectory at{{call("a", {{"x", "2"}})}};
  c.alternates = {{"q", at, ""}, {"q", at, ""}, {"q", at, ""}};
  const auto single = to_vector(compute_features(c.base_trajectory, at, {}, embedder()), ArgMode::with_args);
  const auto mean = compute_case_features(c, {}, embedder());
  for (std::size_t i = 0; i < mean.size(); ++i) EXPECT_NEAR(mean[i], single[i], kTol);
}

TEST(FeatureTable, RenderParseRoundTrip) {
  const auto cases = fixture::separable_cases(5);
  const auto rows = compute_feature_rows(cases, {}, embedder(), 3);
  const auto serial = compute_feature_rows(cases, {}, embedder(), 1);
  EXPECT_EQ(rows, serial);
  const auto names = feature_names(ArgMode::with_args);
  const auto text = render_feature_table(names, rows);
  EXPECT_EQ(text.substr(0, text.find('\n')), "id,label,em,edit,gedit,ss,ao,lcss");
  const auto table = parse_feature_table(text);
  EXPECT_EQ(table.columns, names);
  EXPECT_EQ(table.rows, rows);
}
