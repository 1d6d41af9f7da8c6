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

#ifndef TASTESEQ_EVAL_H_
#define TASTESEQ_EVAL_H_

// Offline evaluation: forward/backward distance curves, precision@k and
// precision@[j:k], listening statistics and TSV reports.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "tasteseq/ann_index.h"
#include "tasteseq/baselines.h"
#include "tasteseq/corpus.h"
#include "tasteseq/embeddings.h"
#include "tasteseq/nn.h"
#include "tasteseq/taste_model.h"

namespace tasteseq::eval {

using nn::Vector;
using corpus::TrainSequence;

inline constexpr int kForwardLength = corpus::kTargetLength;
inline constexpr int kBackwardLength = corpus::kHistoryInputLength;

// Taste vector from a test sequence's input songs.
using TasteFn = std::function<Vector(const TrainSequence&)>;
// The `count` best songs for a test sequence, best first.
using RecommendFn =
    std::function<std::vector<SongId>(const TrainSequence&, int count)>;

TasteFn ModelTasteFn(const taste::TasteModel& model,
                     const embed::EmbeddingMatrix& embeddings);
TasteFn DiscountTasteFn(double gamma, const embed::EmbeddingMatrix& embeddings);
TasteFn WeightTasteFn(const baselines::WeightModel& model,
                      const embed::EmbeddingMatrix& embeddings);

// Throws std::invalid_argument unless every sequence has 100 inputs and
// 50 targets.
void CheckTestSet(const std::vector<TrainSequence>& test);

struct Curve {
  std::string model;
  std::vector<double> values;  // values[j - 1]
};

// Mean over sequences of the cosine distance between the taste vector and
// target j, j = 1..50.
Curve ForwardAnalysis(const std::string& model, const TasteFn& taste,
                      const std::vector<TrainSequence>& test,
                      const embed::EmbeddingMatrix& embeddings);
// Same against input song j, j = 1..100.
Curve BackwardAnalysis(const std::string& model, const TasteFn& taste,
                       const std::vector<TrainSequence>& test,
                       const embed::EmbeddingMatrix& embeddings);

// Nearest songs to the taste vector, never any of the input songs. Throws
// std::invalid_argument when the forest was built from other embeddings.
RecommendFn ForestRecommender(const ann::IndexForest& forest,
                              const embed::EmbeddingMatrix& embeddings,
                              TasteFn taste,
                              std::int64_t search_k = ann::kDefaultSearchK);
// Highest-scoring classifier items outside the input, ties by lower id.
RecommendFn ClassifierRecommender(const baselines::Classifier& model,
                                  const embed::EmbeddingMatrix& embeddings);
// Songs drawn without replacement with probability proportional to their
// training play counts, excluding the input. Deterministic per source id.
RecommendFn PopularityRecommender(
    const std::unordered_map<SongId, std::int64_t>& play_counts,
    std::uint64_t seed);

// Play counts over the inputs and targets of a training set.
std::unordered_map<SongId, std::int64_t> PlayCounts(
    const std::vector<TrainSequence>& train);

// |recommended[0 .. k-j] intersect targets[j-1 .. k-1]| / (k - j + 1).
// Throws std::invalid_argument unless 1 <= j <= k <= targets.size().
double PrecisionFraction(std::span<const SongId> recommended,
                         std::span<const SongId> targets, int j, int k);

// Mean PrecisionFraction over the test set with k - j + 1 recommendations
// per sequence.
double PrecisionAt(const RecommendFn& recommend,
                   const std::vector<TrainSequence>& test, int j, int k);

struct Window {
  int j;
  int k;
};
inline constexpr Window kReportWindows[] = {
    {1, 10}, {1, 25}, {1, 50}, {25, 50}, {30, 50}};
// "@10" for j = 1, "@[25:50]" otherwise.
std::string WindowName(const Window& w);

struct PrecisionRow {
  std::string model;
  std::vector<double> values;  // parallel to kReportWindows
};

// All report windows from one list of 50 recommendations per sequence.
PrecisionRow PrecisionReport(const std::string& model,
                             const RecommendFn& recommend,
                             const std::vector<TrainSequence>& test);

// Linear-interpolation quantile of sorted data at position p (n - 1).
double Quantile(std::span<const double> sorted, double p);

struct BoxStats {
  double q1 = 0, median = 0, q3 = 0;
  // Most extreme data points within 1.5 IQR of the quartiles.
  double lower_whisker = 0, upper_whisker = 0;
  std::size_t count = 0;
};
// Throws std::invalid_argument on empty input.
BoxStats BoxPlot(std::vector<double> values);

struct ListeningStats {
  BoxStats all_pairs;         // every pair within a 150-song window
  BoxStats subsequent_pairs;  // adjacent songs only
  // Per user (ascending id): adjacent transitions with distance > 1.
  std::vector<std::pair<std::int64_t, int>> transitions_over_one;
  double median_transitions = 0;
};

// Over input + targets of each sequence. Throws std::invalid_argument on an
// empty set or empty sequences.
ListeningStats ComputeListeningStats(const std::vector<TrainSequence>& test,
                                     const embed::EmbeddingMatrix& embeddings);

// Mean wall time in milliseconds of forest.Query(q, k, search_k).
double MeanQueryMillis(const ann::IndexForest& forest,
                       const std::vector<Vector>& queries, int k,
                       std::int64_t search_k = ann::kDefaultSearchK);

// Reports. Curves: "j  model  mean_cos"; precision: "model  metric  value";
// both with a header line.
void WriteCurves(std::ostream& out, const std::vector<Curve>& curves);
void WritePrecision(std::ostream& out, const std::vector<PrecisionRow>& rows);
void WriteListeningStats(std::ostream& out, const ListeningStats& stats);
// Human-readable table with the 6M-song reference figures for context.
void WriteSummary(std::ostream& out, const std::vector<PrecisionRow>& rows,
                  double query_millis);

}  // namespace tasteseq::eval

#endif  // TASTESEQ_EVAL_H_
