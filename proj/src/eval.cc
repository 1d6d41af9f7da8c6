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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <map>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

namespace tasteseq::eval {
namespace {

std::unordered_set<SongId> InputSet(const TrainSequence& seq) {
  return {seq.input.begin(), seq.input.end()};
}

Curve DistanceCurve(const std::string& model, const TasteFn& taste,
                    const std::vector<TrainSequence>& test,
                    const embed::EmbeddingMatrix& embeddings, bool forward) {
  CheckTestSet(test);
  const int length = forward ? kForwardLength : kBackwardLength;
  Curve curve{model, std::vector<double>(length, 0.0)};
  for (const auto& seq : test) {
    const Vector t = taste(seq);
    const std::span<const double> tv(t.data(), t.size());
    const auto& songs = forward ? seq.targets : seq.input;
    for (int j = 0; j < length; ++j) {
      curve.values[j] += embed::CosineDistance(tv, embeddings.Vector(songs[j]));
    }
  }
  for (double& v : curve.values) v /= static_cast<double>(test.size());
  return curve;
}

std::string Percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

}  // namespace

TasteFn ModelTasteFn(const taste::TasteModel& model,
                     const embed::EmbeddingMatrix& embeddings) {
  return [&model, &embeddings](const TrainSequence& seq) {
    // Playlist-trained models see as many trailing songs as they were
    // trained on.
    const std::size_t n = std::min<std::size_t>(
        seq.input.size(), static_cast<std::size_t>(model.config().input_length));
    const std::size_t skip = seq.input.size() - n;
    std::span<const SongId> songs(seq.input.data() + skip, n);
    std::span<const corpus::ListeningEvent> events;
    if (model.config().context_enabled) {
      if (seq.context_inputs.size() != seq.input.size()) {
        throw std::invalid_argument("context model needs listening events");
      }
      events = {seq.context_inputs.data() + skip, n};
    }
    return model.TasteVector(embeddings, songs, events);
  };
}

TasteFn DiscountTasteFn(double gamma, const embed::EmbeddingMatrix& embeddings) {
  return [gamma, &embeddings](const TrainSequence& seq) {
    return baselines::DiscountTaste(baselines::SongMatrix(embeddings, seq.input),
                                    gamma);
  };
}

TasteFn WeightTasteFn(const baselines::WeightModel& model,
                      const embed::EmbeddingMatrix& embeddings) {
  return [&model, &embeddings](const TrainSequence& seq) {
    return baselines::WeightTaste(baselines::SongMatrix(embeddings, seq.input),
                                  model);
  };
}

void CheckTestSet(const std::vector<TrainSequence>& test) {
  if (test.empty()) throw std::invalid_argument("empty test set");
  for (const auto& seq : test) {
    if (seq.input.size() != static_cast<std::size_t>(kBackwardLength) ||
        seq.targets.size() != static_cast<std::size_t>(kForwardLength)) {
      throw std::invalid_argument(
          "test sequence " + std::to_string(seq.source_id) + " has " +
          std::to_string(seq.input.size()) + " + " +
          std::to_string(seq.targets.size()) + " songs, expected 100 + 50");
    }
  }
}

Curve ForwardAnalysis(const std::string& model, const TasteFn& taste,
                      const std::vector<TrainSequence>& test,
                      const embed::EmbeddingMatrix& embeddings) {
  return DistanceCurve(model, taste, test, embeddings, true);
}

Curve BackwardAnalysis(const std::string& model, const TasteFn& taste,
                       const std::vector<TrainSequence>& test,
                       const embed::EmbeddingMatrix& embeddings) {
  return DistanceCurve(model, taste, test, embeddings, false);
}

RecommendFn ForestRecommender(const ann::IndexForest& forest,
                              const embed::EmbeddingMatrix& embeddings,
                              TasteFn taste, std::int64_t search_k) {
  if (forest.fingerprint() != embed::Fingerprint(embeddings)) {
    throw std::invalid_argument("index was built from different embeddings");
  }
  return [&forest, taste = std::move(taste), search_k](const TrainSequence& seq,
                                                       int count) {
    const Vector t = taste(seq);
    // The forest filters exclusions before truncating to `count`.
    const auto result = forest.Query(std::span<const double>(t.data(), t.size()),
                                     count, search_k, InputSet(seq));
    std::vector<SongId> ids;
    ids.reserve(result.size());
    for (const auto& n : result) ids.push_back(n.id);
    return ids;
  };
}

RecommendFn ClassifierRecommender(const baselines::Classifier& model,
                                  const embed::EmbeddingMatrix& embeddings) {
  return [&model, &embeddings](const TrainSequence& seq, int count) {
    const Vector scores = model.Scores(embeddings, seq.input);
    const auto exclude = InputSet(seq);
    std::vector<std::int64_t> order;
    order.reserve(scores.size());
    for (std::int64_t i = 0; i < scores.size(); ++i) {
      if (!exclude.contains(model.items()[i])) order.push_back(i);
    }
    const auto better = [&](std::int64_t a, std::int64_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return model.items()[a] < model.items()[b];
    };
    const std::size_t n = std::min<std::size_t>(order.size(), count);
    std::partial_sort(order.begin(), order.begin() + n, order.end(), better);
    std::vector<SongId> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(model.items()[order[i]]);
    return ids;
  };
}

RecommendFn PopularityRecommender(
    const std::unordered_map<SongId, std::int64_t>& play_counts,
    std::uint64_t seed) {
  std::vector<std::pair<SongId, std::int64_t>> songs(play_counts.begin(),
                                                      play_counts.end());
  std::sort(songs.begin(), songs.end());
  std::vector<SongId> ids;
  std::vector<double> cdf;
  double total = 0.0;
  for (const auto& [id, count] : songs) {
    if (count <= 0) continue;
    total += static_cast<double>(count);
    ids.push_back(id);
    cdf.push_back(total);
  }
  if (ids.empty()) throw std::invalid_argument("no play counts");
  return [ids = std::move(ids), cdf = std::move(cdf), total, seed](
             const TrainSequence& seq, int count) {
    Rng rng(DeriveSeed(seed, static_cast<std::uint64_t>(seq.source_id)));
    auto taken = InputSet(seq);
    std::size_t available = 0;
    for (SongId id : ids) available += !taken.contains(id);
    const std::size_t n = std::min<std::size_t>(available, count);
    std::uniform_real_distribution<double> u(0.0, total);
    std::vector<SongId> out;
    while (out.size() < n) {
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), u(rng));
      const SongId id = ids[std::min<std::size_t>(it - cdf.begin(), ids.size() - 1)];
      if (taken.insert(id).second) out.push_back(id);
    }
    return out;
  };
}

std::unordered_map<SongId, std::int64_t> PlayCounts(
    const std::vector<TrainSequence>& train) {
  std::unordered_map<SongId, std::int64_t> counts;
  for (const auto& seq : train) {
    for (SongId id : seq.input) ++counts[id];
    for (SongId id : seq.targets) ++counts[id];
  }
  return counts;
}

double PrecisionFraction(std::span<const SongId> recommended,
                         std::span<const SongId> targets, int j, int k) {
  if (j < 1 || k < j || static_cast<std::size_t>(k) > targets.size()) {
    throw std::invalid_argument("precision needs 1 <= j <= k <= targets");
  }
  const std::size_t width = static_cast<std::size_t>(k - j + 1);
  const std::unordered_set<SongId> truth(targets.begin() + (j - 1),
                                         targets.begin() + k);
  std::unordered_set<SongId> seen;
  int hits = 0;
  for (std::size_t i = 0; i < std::min(width, recommended.size()); ++i) {
    if (seen.insert(recommended[i]).second && truth.contains(recommended[i])) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(width);
}

double PrecisionAt(const RecommendFn& recommend,
                   const std::vector<TrainSequence>& test, int j, int k) {
  CheckTestSet(test);
  double total = 0.0;
  for (const auto& seq : test) {
    const auto recs = recommend(seq, k - j + 1);
    total += PrecisionFraction(recs, seq.targets, j, k);
  }
  return total / static_cast<double>(test.size());
}

std::string WindowName(const Window& w) {
  if (w.j == 1) return "@" + std::to_string(w.k);
  return "@[" + std::to_string(w.j) + ":" + std::to_string(w.k) + "]";
}

PrecisionRow PrecisionReport(const std::string& model,
                             const RecommendFn& recommend,
                             const std::vector<TrainSequence>& test) {
  CheckTestSet(test);
  PrecisionRow row{model, std::vector<double>(std::size(kReportWindows), 0.0)};
  for (const auto& seq : test) {
    const auto recs = recommend(seq, kForwardLength);
    for (std::size_t w = 0; w < std::size(kReportWindows); ++w) {
      row.values[w] += PrecisionFraction(recs, seq.targets, kReportWindows[w].j,
                                         kReportWindows[w].k);
    }
  }
  for (double& v : row.values) v /= static_cast<double>(test.size());
  return row;
}

double Quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty data");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("quantile outside [0,1]");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BoxStats BoxPlot(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("box plot of empty data");
  std::sort(values.begin(), values.end());
  BoxStats s;
  s.count = values.size();
  s.q1 = Quantile(values, 0.25);
  s.median = Quantile(values, 0.5);
  s.q3 = Quantile(values, 0.75);
  const double reach = 1.5 * (s.q3 - s.q1);
  s.lower_whisker = *std::lower_bound(values.begin(), values.end(), s.q1 - reach);
  s.upper_whisker = *(std::upper_bound(values.begin(), values.end(), s.q3 + reach) - 1);
  return s;
}

ListeningStats ComputeListeningStats(const std::vector<TrainSequence>& test,
                                     const embed::EmbeddingMatrix& embeddings) {
  if (test.empty()) throw std::invalid_argument("empty test set");
  std::vector<double> all, adjacent;
  std::map<std::int64_t, int> transitions;
  std::vector<std::span<const float>> vecs;
  for (const auto& seq : test) {
    vecs.clear();
    for (SongId id : seq.input) vecs.push_back(embeddings.Vector(id));
    for (SongId id : seq.targets) vecs.push_back(embeddings.Vector(id));
    if (vecs.empty()) throw std::invalid_argument("empty sequence");
    int& over = transitions[seq.source_id];
    for (std::size_t a = 0; a < vecs.size(); ++a) {
      for (std::size_t b = a + 1; b < vecs.size(); ++b) {
        const double d = embed::CosineDistance(vecs[a], vecs[b]);
        all.push_back(d);
        if (b == a + 1) {
          adjacent.push_back(d);
          over += d > 1.0;
        }
      }
    }
  }
  ListeningStats stats;
  stats.all_pairs = BoxPlot(std::move(all));
  if (!adjacent.empty()) stats.subsequent_pairs = BoxPlot(std::move(adjacent));
  std::vector<double> counts;
  for (const auto& [user, n] : transitions) {
    stats.transitions_over_one.emplace_back(user, n);
    counts.push_back(n);
  }
  std::sort(counts.begin(), counts.end());
  stats.median_transitions = Quantile(counts, 0.5);
  return stats;
}

double MeanQueryMillis(const ann::IndexForest& forest,
                       const std::vector<Vector>& queries, int k,
                       std::int64_t search_k) {
  if (queries.empty()) throw std::invalid_argument("no queries");
  std::size_t sink = 0;
  const auto start = std::chrono::steady_clock::now();
  for (const auto& q : queries) {
    sink += forest.Query(std::span<const double>(q.data(), q.size()), k, search_k)
                .size();
  }
  const auto stop = std::chrono::steady_clock::now();
  if (sink == 0) throw std::logic_error("queries returned nothing");
  return std::chrono::duration<double, std::milli>(stop - start).count() /
         static_cast<double>(queries.size());
}

void WriteCurves(std::ostream& out, const std::vector<Curve>& curves) {
  out << "j\tmodel\tmean_cos\n" << std::setprecision(10);
  for (const auto& c : curves) {
    for (std::size_t j = 0; j < c.values.size(); ++j) {
      out << j + 1 << '\t' << c.model << '\t' << c.values[j] << '\n';
    }
  }
}

void WritePrecision(std::ostream& out, const std::vector<PrecisionRow>& rows) {
  out << "model\tmetric\tvalue\n" << std::setprecision(10);
  for (const auto& r : rows) {
    for (std::size_t w = 0; w < r.values.size(); ++w) {
      out << r.model << '\t' << WindowName(kReportWindows[w]) << '\t'
          << r.values[w] << '\n';
    }
  }
}

void WriteListeningStats(std::ostream& out, const ListeningStats& stats) {
  out << "population\tstat\tvalue\n" << std::setprecision(10);
  for (const auto& [name, b] :
       {std::pair{"all_pairs", stats.all_pairs},
        std::pair{"subsequent_pairs", stats.subsequent_pairs}}) {
    out << name << "\tcount\t" << b.count << '\n'
        << name << "\tlower_whisker\t" << b.lower_whisker << '\n'
        << name << "\tq1\t" << b.q1 << '\n'
        << name << "\tmedian\t" << b.median << '\n'
        << name << "\tq3\t" << b.q3 << '\n'
        << name << "\tupper_whisker\t" << b.upper_whisker << '\n';
  }
  out << "transitions_over_one\tmedian\t" << stats.median_transitions << '\n';
  for (const auto& [user, n] : stats.transitions_over_one) {
    out << "transitions_over_one\tuser_" << user << '\t' << n << '\n';
  }
}

void WriteSummary(std::ostream& out, const std::vector<PrecisionRow>& rows,
                  double query_millis) {
  out << "precision (mean over test sequences)\n";
  out << std::left << std::setw(16) << "model";
  for (const auto& w : kReportWindows) out << std::setw(10) << WindowName(w);
  out << '\n';
  for (const auto& r : rows) {
    out << std::setw(16) << r.model;
    for (double v : r.values) out << std::setw(10) << Percent(v);
    out << '\n';
  }
  out << std::right;
  if (query_millis >= 0.0) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", query_millis);
    out << "mean index query time: " << buf << " ms\n";
  }
  out << "reference at 6M-song scale, not comparable here: rHST @10 = 2.03%, "
         "rHLT @[25:50] = 1.89%, query time 2.6 ms\n";
}

}  // namespace tasteseq::eval
