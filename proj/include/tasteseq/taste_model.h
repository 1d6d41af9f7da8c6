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

#ifndef TASTESEQ_TASTE_MODEL_H_
#define TASTESEQ_TASTE_MODEL_H_

// Recurrent taste-vector regressors: a network reads the vectors of the
// songs a user played and predicts the vector of a song played ell steps
// later.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tasteseq/common.h"
#include "tasteseq/corpus.h"
#include "tasteseq/embeddings.h"
#include "tasteseq/nn.h"

namespace tasteseq::taste {

using nn::Matrix;
using nn::Vector;

// Playlist or history data, short- or long-term offsets.
enum class Variant { kPST, kPLT, kHST, kHLT };

std::string_view VariantName(Variant variant);  // "rPST", ...
std::optional<Variant> ParseVariant(std::string_view name);
bool IsHistoryVariant(Variant variant);

struct OffsetRange {
  int min = 1;
  int max = 10;
  bool operator==(const OffsetRange&) const = default;
};
inline constexpr OffsetRange kShortTerm{1, 10};
inline constexpr OffsetRange kLongTerm{25, 50};

// Draws ell uniformly from {min, ..., max}.
class OffsetSampler {
 public:
  explicit OffsetSampler(OffsetRange range);
  int Draw(Rng& rng) { return dist_(rng); }

 private:
  std::uniform_int_distribution<int> dist_;
};

enum class TimeScaling { kLog, kRaw };

// Time delta followed by one indicator per play context.
inline constexpr int kContextWidth = 1 + corpus::kNumPlayContexts;

// log(1 + seconds) or raw seconds; negative deltas are clamped to 0.
double ScaleTimeDelta(std::int64_t seconds, TimeScaling scaling);
Vector BuildContextVector(const corpus::ListeningEvent& event,
                          const corpus::ListeningEvent* previous,
                          TimeScaling scaling = TimeScaling::kLog);

enum class LossKind { kL2, kCosine };

// |target - pred|_2 and its gradient with respect to pred (zero at the
// minimum, where the norm is not differentiable).
double L2Loss(const Vector& pred, const Vector& target);
Vector L2LossGradient(const Vector& pred, const Vector& target);
// 1 - pred.target / (|pred| |target|).
double CosineLoss(const Vector& pred, const Vector& target);
Vector CosineLossGradient(const Vector& pred, const Vector& target);

struct TrainConfig {
  Variant variant = Variant::kHST;
  int input_length = corpus::kHistoryInputLength;
  OffsetRange offsets = kShortTerm;
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 10;
  bool context_enabled = false;
  TimeScaling time_scaling = TimeScaling::kLog;
  LossKind loss = LossKind::kL2;
  nn::RecurrentKind recurrent_kind = nn::RecurrentKind::kGru;
  std::vector<int> recurrent_dims = {50, 50};
  std::vector<nn::DenseSpec> dense_hidden = {{200, nn::Activation::kLeakyRelu}};
};

// Input length and offsets matching the variant.
TrainConfig DefaultConfig(Variant variant);

class TasteModel {
 public:
  TasteModel() = default;
  // A freshly initialized model whose output lives in a space of
  // `embedding_dims` dimensions.
  TasteModel(const TrainConfig& config, int embedding_dims,
             std::uint64_t seed);
  TasteModel(const TrainConfig& config, nn::Network network);

  const TrainConfig& config() const { return config_; }
  const nn::Network& network() const { return network_; }
  nn::Network& mutable_network() { return network_; }
  int embedding_dims() const { return network_.architecture().output_dim(); }
  int input_width() const { return network_.architecture().input_dim; }

  // Free text stored alongside the weights, e.g. an embedding fingerprint.
  const std::string& tag() const { return tag_; }
  void set_tag(std::string tag) { tag_ = std::move(tag); }

  // One input column: the song vector, followed by the context vector when
  // context is enabled. Throws std::invalid_argument when the embedding width
  // does not match the model or the song has no vector.
  Vector InputFor(const embed::EmbeddingMatrix& embeddings, SongId song,
                  const corpus::ListeningEvent* event,
                  const corpus::ListeningEvent* previous) const;

  // Taste vector of a non-empty song sequence. `events`, when given, runs
  // parallel to `songs` and is required for context-enabled models.
  Vector TasteVector(const embed::EmbeddingMatrix& embeddings,
                     std::span<const SongId> songs,
                     std::span<const corpus::ListeningEvent> events = {}) const;

 private:
  TrainConfig config_;
  nn::Network network_;
  std::string tag_;
};

// Model file: the network weight format with variant, n, the ell range and
// the context settings recorded in its metadata line.
void WriteTasteModel(std::ostream& out, const TasteModel& model);
TasteModel ReadTasteModel(std::istream& in);

struct EpochLoss {
  int epoch = 0;  // 0 is the untrained model
  double train_loss = 0;
  double valid_loss = 0;  // NaN without a validation set
};

struct TrainResult {
  TasteModel model;  // best-validation snapshot
  std::vector<EpochLoss> history;
  int best_epoch = 0;
};

// Mini-batch training: per epoch the sequences are shuffled, and per batch
// each sequence draws ell, the losses between s_{n+ell} and the prediction
// from s_{1..n} are summed and one Adam step is taken. Reported losses are
// means per sequence. Validation offsets are drawn once and reused across
// epochs. Throws TrainingDiverged with the epoch and batch on a non-finite
// loss, and std::invalid_argument for sequences that are too short.
TrainResult TrainTasteModel(
    const std::vector<corpus::TrainSequence>& train,
    const std::vector<corpus::TrainSequence>& valid,
    const embed::EmbeddingMatrix& embeddings, const TrainConfig& config,
    std::uint64_t seed,
    const std::function<void(const EpochLoss&)>& on_epoch = {});

// Mean loss of `model` on `data` with the given per-sequence offsets.
double EvaluateLoss(const TasteModel& model,
                    const std::vector<corpus::TrainSequence>& data,
                    const std::vector<int>& offsets,
                    const embed::EmbeddingMatrix& embeddings);

// TSV "epoch  train_loss  valid_loss".
void WriteLossHistory(std::ostream& out, const std::vector<EpochLoss>& history);

// Recurrent states of one user, advanced one play at a time.
struct UserState {
  std::vector<nn::RecurrentState> layers;
  std::optional<corpus::ListeningEvent> last_event;
  std::int64_t num_events = 0;
};

UserState NewUserState(const TasteModel& model);

// Advances the state by one play and returns the taste vector after it.
// Throws std::invalid_argument when the state does not fit the model.
std::pair<UserState, Vector> UserStateUpdate(
    const TasteModel& model, const embed::EmbeddingMatrix& embeddings,
    const UserState& state, const corpus::ListeningEvent& event);

// Binary, exact (64-bit) state serialization.
void WriteUserState(std::ostream& out, const UserState& state);
UserState ReadUserState(std::istream& in);

}  // namespace tasteseq::taste

#endif  // TASTESEQ_TASTE_MODEL_H_
