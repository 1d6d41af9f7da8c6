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

#include "tasteseq/taste_model.h"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "gradient_check.h"
#include "small_world.h"

namespace tasteseq::taste {
namespace {

using corpus::ListeningEvent;
using corpus::PlayContext;

ListeningEvent Event(SongId id, std::int64_t ts,
                     std::initializer_list<PlayContext> contexts) {
  ListeningEvent e{id, ts, {}};
  for (PlayContext c : contexts) e.contexts.set(static_cast<int>(c));
  return e;
}

TEST(ContextVectorTest, FirstEventHasZeroDelta) {
  const Vector v = BuildContextVector(Event(1, 1000, {PlayContext::kRadio}),
                                      nullptr);
  ASSERT_EQ(v.size(), 15);
  EXPECT_EQ(v(0), 0.0);
}

TEST(ContextVectorTest, IndicatorsAtEnumerationPositions) {
  const Vector v = BuildContextVector(
      Event(1, 0, {PlayContext::kOwnPlaylist, PlayContext::kClicked}), nullptr);
  EXPECT_EQ(v.tail(14).sum(), 2.0);
  EXPECT_EQ(v(1 + 3), 1.0);   // own_playlist
  EXPECT_EQ(v(1 + 12), 1.0);  // clicked
}

TEST(ContextVectorTest, TimeScaling) {
  const ListeningEvent a = Event(1, 1000, {});
  const ListeningEvent b = Event(2, 1180, {});
  EXPECT_EQ(BuildContextVector(b, &a, TimeScaling::kRaw)(0), 180.0);
  EXPECT_NEAR(BuildContextVector(b, &a, TimeScaling::kLog)(0),
              std::log(181.0), 1e-12);
}

TEST(LossTest, L2) {
  Vector p = Vector::Zero(2), t(2);
  t << 3, 4;
  EXPECT_DOUBLE_EQ(L2Loss(p, t), 5.0);
  EXPECT_EQ(L2Loss(t, t), 0.0);
  EXPECT_EQ(L2LossGradient(t, t), Vector::Zero(2));
  Rng rng(1);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    Vector x(6), y(6);
    double s = 0;
    for (int i = 0; i < 6; ++i) {
      x(i) = g(rng);
      y(i) = g(rng);
      s += (y(i) - x(i)) * (y(i) - x(i));
    }
    EXPECT_NEAR(L2Loss(x, y), std::sqrt(s), 1e-12);
  }
}

TEST(LossTest, GradientsMatchFiniteDifferences) {
  Rng rng(2);
  std::normal_distribution<double> g;
  Vector p(5), t(5);
  for (int i = 0; i < 5; ++i) {
    p(i) = g(rng);
    t(i) = g(rng);
  }
  for (LossKind kind : {LossKind::kL2, LossKind::kCosine}) {
    auto f = [&](const Vector& x) {
      return kind == LossKind::kL2 ? L2Loss(x, t) : CosineLoss(x, t);
    };
    const Vector analytic =
        kind == LossKind::kL2 ? L2LossGradient(p, t) : CosineLossGradient(p, t);
    EXPECT_LT(testing::MaxRelativeError(
                  analytic, testing::CentralDifference(f, p, 1e-5)),
              1e-6);
  }
}

// Frequencies of every value must lie within 3 sigma of n / width.
void ExpectUniform(OffsetRange range, std::uint64_t seed) {
  OffsetSampler sampler(range);
  Rng rng(seed);
  const int draws = 100'000;
  std::map<int, int> counts;
  for (int i = 0; i < draws; ++i) {
    const int l = sampler.Draw(rng);
    ASSERT_GE(l, range.min);
    ASSERT_LE(l, range.max);
    ++counts[l];
  }
  const double p = 1.0 / (range.max - range.min + 1);
  const double sigma = std::sqrt(draws * p * (1 - p));
  ASSERT_EQ(counts.size(), static_cast<std::size_t>(range.max - range.min + 1));
  for (const auto& [l, n] : counts) EXPECT_LT(std::abs(n - draws * p), 3 * sigma);
}

TEST(OffsetSamplerTest, ShortAndLongTermUniform) {
  ExpectUniform(kShortTerm, 3);
  ExpectUniform(kLongTerm, 4);
}

TEST(OffsetSamplerTest, DegenerateRange) {
  OffsetSampler sampler({7, 7});
  Rng rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sampler.Draw(rng), 7);
  EXPECT_THROW(OffsetSampler({0, 3}), std::invalid_argument);
  EXPECT_THROW(OffsetSampler({5, 3}), std::invalid_argument);
}

TEST(DefaultConfigTest, Variants) {
  EXPECT_EQ(DefaultConfig(Variant::kPST).offsets, kShortTerm);
  EXPECT_EQ(DefaultConfig(Variant::kPLT).input_length, 60);
  EXPECT_EQ(DefaultConfig(Variant::kHLT).offsets, kLongTerm);
  EXPECT_EQ(DefaultConfig(Variant::kHST).input_length, 100);
  EXPECT_EQ(ParseVariant("rHLT"), Variant::kHLT);
}

TrainConfig SmallConfig(Variant v, bool context) {
  TrainConfig c = DefaultConfig(v);
  c.context_enabled = context;
  c.recurrent_dims = {12, 12};
  c.dense_hidden = {{24, nn::Activation::kLeakyRelu}};
  return c;
}

TEST(TasteModelTest, ShapesAndDelegation) {
  const auto& w = testing::GetSmallWorld();
  TasteModel model(SmallConfig(Variant::kHST, false), 16, 5);
  const SongId id = w.embeddings.id(0);
  const Vector t = model.TasteVector(w.embeddings, std::vector<SongId>{id});
  EXPECT_EQ(t.size(), 16);
  Matrix x(16, 1);
  for (int d = 0; d < 16; ++d) x(d, 0) = w.embeddings.row(0)[d];
  EXPECT_EQ(model.network().Forward({x}).col(0), t);
  EXPECT_THROW(model.TasteVector(w.embeddings, std::vector<SongId>{}),
               std::invalid_argument);
  embed::EmbeddingMatrix wrong({id}, 8);
  EXPECT_THROW(model.TasteVector(wrong, std::vector<SongId>{id}),
               std::invalid_argument);
}

// Incremental replay against the static recompute for every variant.
TEST(UserStateTest, IncrementalEqualsStatic) {
  const auto& w = testing::GetSmallWorld();
  Rng rng(6);
  for (Variant v : {Variant::kPST, Variant::kPLT, Variant::kHST, Variant::kHLT}) {
    for (bool context : {false, true}) {
      TasteModel model(SmallConfig(v, context), 16, 7);
      const auto& h = w.histories[static_cast<int>(v) + (context ? 4 : 0)];
      const auto kept = corpus::DropEvents(
          h, [&](SongId id) { return w.embeddings.Contains(id); });
      std::vector<ListeningEvent> events(kept.events.begin(),
                                         kept.events.begin() + 100);
      std::vector<SongId> songs;
      for (const auto& e : events) songs.push_back(e.song_id);
      UserState state = NewUserState(model);
      Vector incremental;
      for (const auto& e : events) {
        std::tie(state, incremental) = UserStateUpdate(model, w.embeddings, state, e);
      }
      const Vector full = context ? model.TasteVector(w.embeddings, songs, events)
                                  : model.TasteVector(w.embeddings, songs);
      EXPECT_LT((incremental - full).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(UserStateTest, FreshStatePlusOneSong) {
  const auto& w = testing::GetSmallWorld();
  TasteModel model(SmallConfig(Variant::kHST, false), 16, 8);
  const ListeningEvent e = w.histories[0].events[0];
  if (!w.embeddings.Contains(e.song_id)) GTEST_SKIP();
  auto [state, taste] = UserStateUpdate(model, w.embeddings, NewUserState(model), e);
  EXPECT_EQ(taste, model.TasteVector(w.embeddings, std::vector<SongId>{e.song_id}));
  EXPECT_EQ(state.num_events, 1);
}

TEST(UserStateTest, SerializedStateContinuesIdentically) {
  const auto& w = testing::GetSmallWorld();
  for (nn::RecurrentKind kind : {nn::RecurrentKind::kGru, nn::RecurrentKind::kLstm}) {
    TrainConfig c = SmallConfig(Variant::kHST, true);
    c.recurrent_kind = kind;
    TasteModel model(c, 16, 9);
    const auto kept = corpus::DropEvents(
        w.histories[3], [&](SongId id) { return w.embeddings.Contains(id); });
    UserState state = NewUserState(model);
    Vector taste;
    for (int i = 0; i < 30; ++i) {
      std::tie(state, taste) = UserStateUpdate(model, w.embeddings, state, kept.events[i]);
    }
    std::stringstream s;
    WriteUserState(s, state);
    UserState restored = ReadUserState(s);
    Vector a, b;
    for (int i = 30; i < 40; ++i) {
      std::tie(state, a) = UserStateUpdate(model, w.embeddings, state, kept.events[i]);
      std::tie(restored, b) =
          UserStateUpdate(model, w.embeddings, restored, kept.events[i]);
      EXPECT_EQ(a, b);
    }
  }
}

TEST(UserStateTest, MismatchRejected) {
  const auto& w = testing::GetSmallWorld();
  TasteModel model(SmallConfig(Variant::kHST, false), 16, 8);
  TrainConfig other = SmallConfig(Variant::kHST, false);
  other.recurrent_dims = {5};
  TasteModel small(other, 16, 8);
  EXPECT_THROW(UserStateUpdate(model, w.embeddings, NewUserState(small),
                               w.histories[0].events[0]),
               std::invalid_argument);
}

TEST(TasteModelIoTest, RoundTrip) {
  TrainConfig c = SmallConfig(Variant::kPLT, false);
  c.offsets = {20, 40};
  TasteModel model(c, 16, 10);
  model.set_tag("emb:0123abcd");
  std::stringstream s;
  WriteTasteModel(s, model);
  const TasteModel back = ReadTasteModel(s);
  EXPECT_EQ(back.config().variant, Variant::kPLT);
  EXPECT_EQ(back.config().input_length, 60);
  EXPECT_EQ(back.config().offsets, c.offsets);
  EXPECT_EQ(back.config().recurrent_dims, c.recurrent_dims);
  EXPECT_EQ(back.tag(), "emb:0123abcd");
  EXPECT_EQ(back.network().architecture(), model.network().architecture());
}

TEST(TrainTest, LearnsOnSyntheticHistories) {
  const auto& w = testing::GetSmallWorld();
  ASSERT_GT(w.history_data.train.size(), 100u);
  ASSERT_GT(w.history_data.valid.size(), 5u);
  TrainConfig c = SmallConfig(Variant::kHST, false);
  c.epochs = 4;
  const TrainResult r = TrainTasteModel(w.history_data.train,
                                        w.history_data.valid, w.embeddings, c, 1);
  ASSERT_EQ(r.history.size(), 5u);
  EXPECT_LT(r.history.back().train_loss, r.history.front().train_loss);
  double best = r.history[0].valid_loss;
  for (const auto& e : r.history) best = std::min(best, e.valid_loss);
  EXPECT_LT(best, r.history.front().valid_loss);
  EXPECT_EQ(r.history[r.best_epoch].valid_loss, best);
  for (const auto& e : r.history) EXPECT_GE(e.train_loss, 0.0);

  // The best snapshot is what was returned.
  std::vector<int> offsets(w.history_data.valid.size());
  Rng vrng(DeriveSeed(1, 3));
  OffsetSampler sampler(c.offsets);
  for (int& l : offsets) l = sampler.Draw(vrng);
  EXPECT_NEAR(EvaluateLoss(r.model, w.history_data.valid, offsets, w.embeddings),
              best, 1e-9);

  // Next song closer than a random catalog song on held-out data.
  Rng rng(2);
  std::uniform_int_distribution<std::size_t> any(0, w.embeddings.rows() - 1);
  double next = 0, random = 0;
  const auto& test = w.history_data.test.empty() ? w.history_data.valid
                                                 : w.history_data.test;
  for (const auto& seq : test) {
    const Vector t = r.model.TasteVector(w.embeddings, seq.input);
    next += embed::CosineDistance(std::span<const double>(t.data(), t.size()),
                                  w.embeddings.Vector(seq.targets[0]));
    for (int k = 0; k < 50; ++k) {
      random += embed::CosineDistance(std::span<const double>(t.data(), t.size()),
                                      w.embeddings.row(any(rng))) / 50;
    }
  }
  EXPECT_LT(next, random);
}

TEST(TrainTest, DeterministicAndDegenerateOffsets) {
  const auto& w = testing::GetSmallWorld();
  std::vector<corpus::TrainSequence> train(w.history_data.train.begin(),
                                           w.history_data.train.begin() + 40);
  TrainConfig c = SmallConfig(Variant::kHST, false);
  c.offsets = {5, 5};
  c.epochs = 2;
  const auto a = TrainTasteModel(train, {}, w.embeddings, c, 3);
  const auto b = TrainTasteModel(train, {}, w.embeddings, c, 3);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
  }
  EXPECT_EQ(a.model.network().Parameters(), b.model.network().Parameters());
}

TEST(TrainTest, RejectsShortSequences) {
  const auto& w = testing::GetSmallWorld();
  std::vector<corpus::TrainSequence> train = {w.history_data.train[0]};
  train[0].targets.resize(20);
  TrainConfig c = SmallConfig(Variant::kHLT, false);
  EXPECT_THROW(TrainTasteModel(train, {}, w.embeddings, c, 1),
               std::invalid_argument);
}

TEST(TrainTest, DivergenceReportsLocation) {
  const auto& w = testing::GetSmallWorld();
  std::vector<corpus::TrainSequence> train(w.history_data.train.begin(),
                                           w.history_data.train.begin() + 8);
  TrainConfig c = SmallConfig(Variant::kHST, false);
  c.learning_rate = std::numeric_limits<double>::infinity();
  c.batch_size = 4;
  c.epochs = 1;
  try {
    TrainTasteModel(train, {}, w.embeddings, c, 1);
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
  }
}

TEST(LossHistoryTest, Tsv) {
  std::ostringstream out;
  WriteLossHistory(out, {{0, 2.5, 3.0}, {1, 1.5, 2.0}});
  EXPECT_EQ(out.str(), "0\t2.5\t3\n1\t1.5\t2\n");
}

}  // namespace
}  // namespace tasteseq::taste
