// Copyright 2026 The Tasteseq Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tasteseq/eval.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "small_world.h"

namespace tasteseq::eval {
namespace {

using testing::GetSmallWorld;

// Songs 1..n with random vectors.
embed::EmbeddingMatrix RandomSongs(int n, int dims, std::uint64_t seed) {
  std::vector<SongId> ids(n);
  for (int i = 0; i < n; ++i) ids[i] = i + 1;
  embed::EmbeddingMatrix m(ids, dims);
  Rng rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  for (float& v : m.mutable_values()) v = g(rng);
  return m;
}

// 100 + 50 distinct songs drawn from 1..n.
TrainSequence RandomSequence(std::int64_t source, int n, Rng& rng) {
  std::vector<SongId> all(n);
  for (int i = 0; i < n; ++i) all[i] = i + 1;
  std::shuffle(all.begin(), all.end(), rng);
  TrainSequence seq;
  seq.source_id = source;
  seq.input.assign(all.begin(), all.begin() + 100);
  seq.targets.assign(all.begin() + 100, all.begin() + 150);
  return seq;
}

Vector AsVector(std::span<const float> v) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i];
  return out;
}

TEST(CurveTest, TasteEqualToFirstTargetGivesZeroAtOne) {
  const auto m = RandomSongs(400, 6, 1);
  Rng rng(2);
  std::vector<TrainSequence> test;
  for (int u = 0; u < 5; ++u) test.push_back(RandomSequence(u, 400, rng));
  const TasteFn taste = [&m](const TrainSequence& s) {
    return AsVector(m.Vector(s.targets[0]));
  };
  const auto c = ForwardAnalysis("oracle", taste, test, m);
  ASSERT_EQ(c.values.size(), 50u);
  EXPECT_NEAR(c.values[0], 0.0, 1e-12);
  for (double v : c.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 2.0);
  }
}

TEST(CurveTest, SingleSequenceCurveIsRawDistances) {
  const auto m = RandomSongs(300, 5, 3);
  Rng rng(4);
  const std::vector<TrainSequence> test = {RandomSequence(7, 300, rng)};
  Vector t(5);
  t << 0.3, -1.0, 2.0, 0.5, 0.1;
  const TasteFn taste = [&t](const TrainSequence&) { return t; };
  const auto fwd = ForwardAnalysis("m", taste, test, m);
  const auto bwd = BackwardAnalysis("m", taste, test, m);
  ASSERT_EQ(bwd.values.size(), 100u);
  const std::vector<double> tv(t.data(), t.data() + 5);
  for (int j = 0; j < 50; ++j) {
    EXPECT_DOUBLE_EQ(fwd.values[j],
                     embed::CosineDistance(tv, m.Vector(test[0].targets[j])));
  }
  for (int j = 0; j < 100; ++j) {
    EXPECT_DOUBLE_EQ(bwd.values[j],
                     embed::CosineDistance(tv, m.Vector(test[0].input[j])));
  }
}

TEST(CurveTest, RejectsMalformedSequences) {
  const auto m = RandomSongs(300, 5, 3);
  Rng rng(4);
  auto seq = RandomSequence(1, 300, rng);
  seq.targets.pop_back();
  const TasteFn taste = [](const TrainSequence&) { return Vector::Ones(5); };
  EXPECT_THROW(ForwardAnalysis("m", taste, {seq}, m), std::invalid_argument);
  EXPECT_THROW(BackwardAnalysis("m", taste, {}, m), std::invalid_argument);
}

TEST(CurveTest, ZeroDiscountBottomsOutAtLastInput) {
  const auto& w = GetSmallWorld();
  const auto& test = w.history_data.test;
  ASSERT_FALSE(test.empty());
  const auto c = BackwardAnalysis("gamma0", DiscountTasteFn(0.0, w.embeddings),
                                  test, w.embeddings);
  EXPECT_EQ(std::min_element(c.values.begin(), c.values.end()) - c.values.begin(),
            99);
  EXPECT_NEAR(c.values[99], 0.0, 1e-9);
}

TEST(CurveTest, DirectionalTrendsOnSyntheticHistories) {
  const auto& w = GetSmallWorld();
  const auto& test = w.history_data.test;
  for (double gamma : {0.0, 0.5, 0.9, 1.0}) {
    const auto fwd = ForwardAnalysis("d", DiscountTasteFn(gamma, w.embeddings),
                                     test, w.embeddings);
    EXPECT_GE(fwd.values[49], fwd.values[0]) << "gamma " << gamma;
  }
  const auto bwd = BackwardAnalysis("d", DiscountTasteFn(1.0, w.embeddings),
                                    test, w.embeddings);
  // U shape: the plain sum sits closest to the middle of the window.
  EXPECT_LT(bwd.values[49], bwd.values[0]);
  EXPECT_LT(bwd.values[49], bwd.values[99]);
}

TEST(CurveTest, PureFunction) {
  const auto& w = GetSmallWorld();
  const auto& test = w.history_data.test;
  const auto taste = DiscountTasteFn(0.8, w.embeddings);
  EXPECT_EQ(ForwardAnalysis("a", taste, test, w.embeddings).values,
            ForwardAnalysis("a", taste, test, w.embeddings).values);
}

TEST(PrecisionTest, FractionAgainstSetIntersection) {
  Rng rng(5);
  std::uniform_int_distribution<SongId> song(1, 120);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<SongId> targets(50), recs(50);
    for (auto& t : targets) t = song(rng);
    for (auto& r : recs) r = song(rng);
    std::uniform_int_distribution<int> pick(1, 50);
    int j = pick(rng), k = pick(rng);
    if (j > k) std::swap(j, k);
    const int width = k - j + 1;
    std::set<SongId> truth(targets.begin() + j - 1, targets.begin() + k);
    std::set<SongId> top(recs.begin(), recs.begin() + width);
    std::vector<SongId> both;
    std::set_intersection(truth.begin(), truth.end(), top.begin(), top.end(),
                          std::back_inserter(both));
    EXPECT_DOUBLE_EQ(PrecisionFraction(recs, targets, j, k),
                     static_cast<double>(both.size()) / width);
  }
  const std::vector<SongId> t = {1, 2, 3};
  EXPECT_THROW(PrecisionFraction(t, t, 0, 2), std::invalid_argument);
  EXPECT_THROW(PrecisionFraction(t, t, 3, 2), std::invalid_argument);
  EXPECT_THROW(PrecisionFraction(t, t, 1, 4), std::invalid_argument);
}

TEST(PrecisionTest, PerfectRecommenderScoresOne) {
  Rng rng(6);
  std::vector<TrainSequence> test;
  for (int u = 0; u < 4; ++u) test.push_back(RandomSequence(u, 500, rng));
  const RecommendFn oracle = [](const TrainSequence& s, int count) {
    return std::vector<SongId>(s.targets.begin(), s.targets.begin() + count);
  };
  EXPECT_DOUBLE_EQ(PrecisionAt(oracle, test, 1, 50), 1.0);
  EXPECT_DOUBLE_EQ(PrecisionAt(oracle, test, 1, 10), 1.0);
  const auto row = PrecisionReport("oracle", oracle, test);
  EXPECT_DOUBLE_EQ(row.values[0], 1.0);   // @10
  EXPECT_DOUBLE_EQ(row.values[2], 1.0);   // @50
  // The first 26 targets occupy the top of the list, not positions 25..50.
  EXPECT_DOUBLE_EQ(row.values[3], 2.0 / 26.0);
}

TEST(PrecisionTest, ForestPathMatchesBruteForceOnToyUsers) {
  const auto m = RandomSongs(600, 4, 7);
  const auto forest = ann::IndexForest::Build(m, {}, 8);
  Rng rng(9);
  std::vector<TrainSequence> test;
  for (int u = 0; u < 3; ++u) test.push_back(RandomSequence(u, 600, rng));
  // Put a few targets right next to each user's taste vector.
  const TasteFn taste = [&m](const TrainSequence& s) {
    return AsVector(m.Vector(s.targets[s.source_id + 2]));
  };
  const auto recommend = ForestRecommender(forest, m, taste, 1 << 30);
  for (const auto& [j, k] : std::vector<std::pair<int, int>>{{1, 10}, {1, 50}, {5, 20}, {25, 50}}) {
    double expected = 0.0;
    for (const auto& s : test) {
      const Vector t = taste(s);
      const std::vector<double> q(t.data(), t.data() + t.size());
      std::unordered_set<SongId> exclude(s.input.begin(), s.input.end());
      const auto nn = ann::ExactKnn(m, q, k - j + 1, exclude);
      int hits = 0;
      for (const auto& n : nn) {
        for (int p = j - 1; p < k; ++p) hits += n.id == s.targets[p];
      }
      expected += static_cast<double>(hits) / (k - j + 1);
    }
    EXPECT_DOUBLE_EQ(PrecisionAt(recommend, test, j, k), expected / 3.0);
  }
}

TEST(PrecisionTest, RecommendationsNeverContainInputs) {
  const auto& w = GetSmallWorld();
  const auto forest = ann::IndexForest::Build(w.embeddings, {}, 3);
  const auto recommend =
      ForestRecommender(forest, w.embeddings, DiscountTasteFn(0.9, w.embeddings));
  for (const auto& s : w.history_data.test) {
    const std::unordered_set<SongId> input(s.input.begin(), s.input.end());
    const auto recs = recommend(s, 50);
    EXPECT_EQ(recs.size(), 50u);
    for (SongId id : recs) ASSERT_FALSE(input.contains(id));
  }
}

TEST(PrecisionTest, ForestOfOtherEmbeddingsRejected) {
  const auto a = RandomSongs(100, 4, 1);
  const auto b = RandomSongs(100, 4, 2);
  const auto forest = ann::IndexForest::Build(a, {}, 1);
  EXPECT_THROW(ForestRecommender(forest, b, DiscountTasteFn(1.0, b)),
               std::invalid_argument);
}

TEST(PrecisionTest, DiscountAndEquivalentWeightsAgree) {
  const auto& w = GetSmallWorld();
  const auto forest = ann::IndexForest::Build(w.embeddings, {}, 3);
  baselines::WeightModel weights{baselines::DiscountWeights(100, 0.85), 0.0};
  const auto a = PrecisionReport(
      "d", ForestRecommender(forest, w.embeddings, DiscountTasteFn(0.85, w.embeddings)),
      w.history_data.test);
  const auto b = PrecisionReport(
      "w", ForestRecommender(forest, w.embeddings, WeightTasteFn(weights, w.embeddings)),
      w.history_data.test);
  EXPECT_EQ(a.values, b.values);
}

TEST(PrecisionTest, ReportMatchesSeparateWindows) {
  const auto& w = GetSmallWorld();
  const auto forest = ann::IndexForest::Build(w.embeddings, {}, 3);
  const auto recommend =
      ForestRecommender(forest, w.embeddings, DiscountTasteFn(0.9, w.embeddings));
  const auto row = PrecisionReport("d", recommend, w.history_data.test);
  for (std::size_t i = 0; i < std::size(kReportWindows); ++i) {
    EXPECT_DOUBLE_EQ(row.values[i],
                     PrecisionAt(recommend, w.history_data.test,
                                 kReportWindows[i].j, kReportWindows[i].k));
    EXPECT_GE(row.values[i], 0.0);
    EXPECT_LE(row.values[i], 1.0);
  }
}

TEST(PopularityTest, ExcludesInputsAndFollowsCounts) {
  std::unordered_map<SongId, std::int64_t> counts;
  for (SongId id = 1; id <= 200; ++id) counts[id] = id <= 100 ? 1 : 0;
  counts[1] = 400;
  const auto recommend = PopularityRecommender(counts, 5);
  TrainSequence s;
  s.source_id = 3;
  for (SongId id = 51; id <= 150; ++id) s.input.push_back(id);
  const auto recs = recommend(s, 50);
  EXPECT_EQ(recs.size(), 50u);  // exactly songs 1..50 remain
  std::set<SongId> got(recs.begin(), recs.end());
  EXPECT_EQ(got.size(), 50u);
  EXPECT_EQ(*got.rbegin(), 50);
  EXPECT_EQ(recommend(s, 50), recs);

  // Song 1 carries 400 / 499 of the mass.
  s.input.clear();
  int first = 0;
  for (int u = 0; u < 2000; ++u) {
    s.source_id = u;
    first += recommend(s, 1)[0] == 1;
  }
  EXPECT_NEAR(first / 2000.0, 400.0 / 499.0, 0.03);
}

TEST(PopularityTest, PlayCountsCoverInputsAndTargets) {
  TrainSequence s;
  s.input = {1, 2, 2};
  s.targets = {2, 3};
  const auto counts = PlayCounts({s, s});
  EXPECT_EQ(counts.at(1), 2);
  EXPECT_EQ(counts.at(2), 6);
  EXPECT_EQ(counts.at(3), 2);
}

TEST(ClassifierPathTest, TopScoresOutsideInput) {
  const auto m = RandomSongs(150, 4, 11);
  baselines::ClassifierConfig config;
  config.recurrent_dims = {6};
  config.dense_hidden = {};
  const baselines::Classifier model(config, m, 3);
  const auto recommend = ClassifierRecommender(model, m);
  Rng rng(12);
  const auto s = RandomSequence(0, 150, rng);
  const auto recs = recommend(s, 20);
  ASSERT_EQ(recs.size(), 20u);
  const Vector scores = model.Scores(m, s.input);
  std::vector<std::pair<double, SongId>> ranked;
  for (std::int64_t i = 0; i < scores.size(); ++i) {
    const SongId id = model.items()[i];
    if (std::find(s.input.begin(), s.input.end(), id) == s.input.end()) {
      ranked.emplace_back(-scores[i], id);
    }
  }
  std::sort(ranked.begin(), ranked.end());
  for (int i = 0; i < 20; ++i) EXPECT_EQ(recs[i], ranked[i].second);
}

TEST(StatsTest, QuantilesMatchHandValues) {
  const auto b = BoxPlot({10.0, 3.0, 1.0, 4.0, 2.0});
  EXPECT_DOUBLE_EQ(b.q1, 2.0);
  EXPECT_DOUBLE_EQ(b.median, 3.0);
  EXPECT_DOUBLE_EQ(b.q3, 4.0);
  EXPECT_DOUBLE_EQ(b.lower_whisker, 1.0);
  EXPECT_DOUBLE_EQ(b.upper_whisker, 4.0);  // 10 lies beyond 4 + 1.5 * 2
  const auto even = BoxPlot({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(even.q1, 1.75);
  EXPECT_DOUBLE_EQ(even.median, 2.5);
  EXPECT_DOUBLE_EQ(even.q3, 3.25);
  EXPECT_THROW(BoxPlot({}), std::invalid_argument);
}

TEST(StatsTest, QuantilesMatchSortOracle) {
  Rng rng(13);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int n : {1, 2, 7, 100, 1001}) {
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    const auto b = BoxPlot(v);
    std::sort(v.begin(), v.end());
    auto oracle = [&](double p) {
      const double h = (n - 1) * p;
      const int lo = static_cast<int>(h);
      return lo + 1 < n ? v[lo] + (h - lo) * (v[lo + 1] - v[lo]) : v[lo];
    };
    EXPECT_EQ(b.q1, oracle(0.25));
    EXPECT_EQ(b.median, oracle(0.5));
    EXPECT_EQ(b.q3, oracle(0.75));
    const double iqr = b.q3 - b.q1;
    double lo = v.back(), hi = v.front();
    for (double x : v) {
      if (x >= b.q1 - 1.5 * iqr) lo = std::min(lo, x);
      if (x <= b.q3 + 1.5 * iqr) hi = std::max(hi, x);
    }
    EXPECT_EQ(b.lower_whisker, lo);
    EXPECT_EQ(b.upper_whisker, hi);
  }
}

TEST(StatsTest, IdenticalVectorsGiveZeroDistances) {
  embed::EmbeddingMatrix m(std::vector<SongId>{1, 2, 3}, 2);
  m.mutable_values() = {1.0f, 2.0f, 1.0f, 2.0f, 1.0f, 2.0f};
  TrainSequence s;
  s.source_id = 4;
  s.input = {1, 2, 3, 1};
  s.targets = {2, 3};
  const auto stats = ComputeListeningStats({s}, m);
  EXPECT_NEAR(stats.all_pairs.upper_whisker, 0.0, 1e-12);
  EXPECT_NEAR(stats.subsequent_pairs.upper_whisker, 0.0, 1e-12);
  EXPECT_EQ(stats.all_pairs.count, 15u);
  EXPECT_EQ(stats.subsequent_pairs.count, 5u);
  ASSERT_EQ(stats.transitions_over_one.size(), 1u);
  EXPECT_EQ(stats.transitions_over_one[0], std::make_pair(std::int64_t{4}, 0));
  EXPECT_EQ(stats.median_transitions, 0.0);
}

TEST(StatsTest, TransitionsCountedPerUser) {
  embed::EmbeddingMatrix m(std::vector<SongId>{1, 2}, 2);
  m.mutable_values() = {1.0f, 0.0f, -1.0f, 0.1f};
  TrainSequence a, b;
  a.source_id = 9;
  a.input = {1, 2, 1};  // two jumps
  b.source_id = 9;
  b.input = {1, 1};
  TrainSequence c;
  c.source_id = 2;
  c.input = {2, 2};
  const auto stats = ComputeListeningStats({a, b, c}, m);
  ASSERT_EQ(stats.transitions_over_one.size(), 2u);
  EXPECT_EQ(stats.transitions_over_one[0], std::make_pair(std::int64_t{2}, 0));
  EXPECT_EQ(stats.transitions_over_one[1], std::make_pair(std::int64_t{9}, 2));
  EXPECT_DOUBLE_EQ(stats.median_transitions, 1.0);
}

TEST(StatsTest, AllPairsMedianAboveSubsequentOnSyntheticHistories) {
  const auto& w = GetSmallWorld();
  const auto stats = ComputeListeningStats(w.history_data.test, w.embeddings);
  EXPECT_GT(stats.all_pairs.median, stats.subsequent_pairs.median);
}

TEST(ReportTest, TsvShapes) {
  Curve c{"m", std::vector<double>(50, 0.5)};
  std::ostringstream curves;
  WriteCurves(curves, {c, c});
  const std::string text = curves.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 101);
  EXPECT_EQ(text.substr(0, 17), "j\tmodel\tmean_cos\n");

  PrecisionRow row{"rHST", {0.1, 0.2, 0.3, 0.4, 0.5}};
  std::ostringstream prec;
  WritePrecision(prec, {row});
  EXPECT_NE(prec.str().find("rHST\t@[25:50]\t0.4\n"), std::string::npos);
  EXPECT_NE(prec.str().find("rHST\t@10\t0.1\n"), std::string::npos);

  std::ostringstream summary;
  WriteSummary(summary, {row}, -1.0);
  EXPECT_NE(summary.str().find("10.00%"), std::string::npos);
  EXPECT_EQ(summary.str().find("query time:"), std::string::npos);
}

TEST(LatencyTest, MeasuresPositiveTime) {
  const auto m = RandomSongs(2000, 8, 1);
  const auto forest = ann::IndexForest::Build(m, {}, 2);
  std::vector<Vector> queries = {Vector::Ones(8), Vector::Zero(8)};
  queries[1][0] = 1.0;
  EXPECT_GT(MeanQueryMillis(forest, queries, 100), 0.0);
}

}  // namespace
}  // namespace tasteseq::eval
