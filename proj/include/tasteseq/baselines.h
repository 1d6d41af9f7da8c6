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

#ifndef TASTESEQ_BASELINES_H_
#define TASTESEQ_BASELINES_H_

// Comparison models: exponential discounting, learned position weights, and
// a softmax classifier over the whole vocabulary trained with cross-entropy
// or BPR against Zipf-sampled negatives.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <unordered_set>
#include <vector>

#include "tasteseq/common.h"
#include "tasteseq/corpus.h"
#include "tasteseq/embeddings.h"
#include "tasteseq/nn.h"
#include "tasteseq/taste_model.h"

namespace tasteseq::baselines {

using nn::Matrix;
using nn::Vector;

// D x k matrix whose column j is the vector of songs[j]. Throws
// std::invalid_argument for songs without a vector.
Matrix SongMatrix(const embed::EmbeddingMatrix& embeddings,
                  std::span<const SongId> songs);

// sum_j s_j gamma^(k-j) over the k columns of `songs`.
Vector DiscountTaste(const Matrix& songs, double gamma);

// w_j = gamma^(k-j), the weight vector that reproduces DiscountTaste.
Vector DiscountWeights(int k, double gamma);

struct WeightModel {
  Vector weights;  // w_1 .. w_k
  double lambda = 0.001;
};

// sum_j s_j w_j. Throws std::invalid_argument when k differs from the
// number of weights.
Vector WeightTaste(const Matrix& songs, const WeightModel& model);

// |target - W(songs; w)|_2 + lambda |w|_2 and its gradient in w.
double WeightLoss(const Matrix& songs, const Vector& target,
                  const WeightModel& model);
Vector WeightLossGradient(const Matrix& songs, const Vector& target,
                          const WeightModel& model);

struct WeightTrainConfig {
  int k = corpus::kHistoryInputLength;
  double lambda = 0.001;
  taste::OffsetRange offsets = taste::kShortTerm;
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 10;
};

struct WeightTrainResult {
  WeightModel model;
  std::vector<double> train_loss;  // index 0 is the initial model
};

// Adam on the regularized loss, starting from w_j = 1/k, with the same
// shuffle / offset / batch loop as the taste models.
WeightTrainResult TrainWeightModel(
    const std::vector<corpus::TrainSequence>& train,
    const embed::EmbeddingMatrix& embeddings, const WeightTrainConfig& config,
    std::uint64_t seed);

// TSV "index  weight", 1-based.
void WriteWeights(std::ostream& out, const WeightModel& model);
WeightModel ReadWeights(std::istream& in, double lambda);

// Zipf(z) over ranks 1..N, normalized over the finite support.
class ZipfSampler {
 public:
  ZipfSampler(std::int64_t n, double z = 1.05);

  std::int64_t size() const { return static_cast<std::int64_t>(cdf_.size()); }
  double z() const { return z_; }
  double Probability(std::int64_t rank) const;
  std::int64_t Sample(Rng& rng) const;
  // Redraws while the rank is in `exclude`; gives up after 1000 attempts
  // with std::runtime_error.
  std::int64_t SampleExcluding(Rng& rng,
                               const std::unordered_set<std::int64_t>& exclude) const;

 private:
  double z_;
  std::vector<double> cdf_;
};

inline constexpr int kMaxZipfAttempts = 1000;

// Numerically stable softmax.
Vector Softmax(const Vector& logits);

// -log softmax(logits)[target] and its gradient in the logits.
double CrossEntropyLoss(const Vector& logits, std::int64_t target);
Vector CrossEntropyGradient(const Vector& logits, std::int64_t target);

// -(1/N_S) sum_j log sigma(x_pos - x_j) + reg (x_pos^2 + sum_j x_j^2).
double BprLoss(const Vector& logits, std::int64_t positive,
               std::span<const std::int64_t> negatives, double reg);
Vector BprGradient(const Vector& logits, std::int64_t positive,
                   std::span<const std::int64_t> negatives, double reg);

enum class ClassifierLoss { kCrossEntropy, kBpr };

struct ClassifierConfig {
  ClassifierLoss loss = ClassifierLoss::kCrossEntropy;
  int input_length = corpus::kHistoryInputLength;
  taste::OffsetRange offsets = taste::kShortTerm;
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 5;
  std::vector<int> recurrent_dims = {50, 50};
  std::vector<nn::DenseSpec> dense_hidden = {{200, nn::Activation::kLeakyRelu}};
  int bpr_negatives = 100;
  double bpr_reg = 1e-4;
  double zipf_z = 1.05;
};

// Recurrent trunk plus a dense output of one logit per item. Items are the
// embedding rows in order, which is popularity order, so Zipf rank r is
// item r - 1.
class Classifier {
 public:
  Classifier() = default;
  Classifier(const ClassifierConfig& config,
             const embed::EmbeddingMatrix& embeddings, std::uint64_t seed);
  Classifier(const ClassifierConfig& config, nn::Network network,
             const embed::EmbeddingMatrix& embeddings);

  const ClassifierConfig& config() const { return config_; }
  const nn::Network& network() const { return network_; }
  nn::Network& mutable_network() { return network_; }
  const std::vector<SongId>& items() const { return items_; }
  std::int64_t ItemIndex(SongId id) const;  // -1 when absent

  Vector Logits(const embed::EmbeddingMatrix& embeddings,
                std::span<const SongId> songs) const;
  // Softmax probabilities for cross-entropy models, raw logits for BPR.
  Vector Scores(const embed::EmbeddingMatrix& embeddings,
                std::span<const SongId> songs) const;

 private:
  ClassifierConfig config_;
  nn::Network network_;
  std::vector<SongId> items_;
  std::unordered_map<SongId, std::int64_t> index_;
};

struct ClassifierTrainResult {
  Classifier model;
  std::vector<double> train_loss;  // index 0 is the initial model
};

ClassifierTrainResult TrainClassifier(
    const std::vector<corpus::TrainSequence>& train,
    const embed::EmbeddingMatrix& embeddings, const ClassifierConfig& config,
    std::uint64_t seed);

// Network weight format; the item list is the embedding row order, so
// reading needs the same embeddings.
void WriteClassifier(std::ostream& out, const Classifier& model,
                     const std::string& tag);
Classifier ReadClassifier(std::istream& in,
                          const embed::EmbeddingMatrix& embeddings,
                          std::string* tag);

}  // namespace tasteseq::baselines

#endif  // TASTESEQ_BASELINES_H_
