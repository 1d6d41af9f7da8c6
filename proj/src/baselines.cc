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

#include "tasteseq/baselines.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace tasteseq::baselines {
namespace {

// log(sigma(x)) without overflow.
double LogSigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector Column(const embed::EmbeddingMatrix& embeddings, SongId id) {
  const auto v = embeddings.Vector(id);
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out(i) = v[i];
  return out;
}

void CheckIndex(const Vector& logits, std::int64_t index) {
  if (index < 0 || index >= logits.size()) {
    throw std::invalid_argument("item index " + std::to_string(index) +
                                " out of range");
  }
}

nn::Architecture ClassifierArchitecture(const ClassifierConfig& config,
                                        int embedding_dims,
                                        std::int64_t num_items) {
  nn::Architecture arch;
  arch.input_dim = embedding_dims;
  arch.recurrent_kind = nn::RecurrentKind::kGru;
  arch.recurrent_dims = config.recurrent_dims;
  arch.dense = config.dense_hidden;
  arch.dense.push_back({static_cast<int>(num_items), nn::Activation::kLinear});
  return arch;
}

void CheckSequence(const corpus::TrainSequence& seq, int n, int l_max) {
  if (static_cast<int>(seq.input.size()) != n ||
      static_cast<int>(seq.targets.size()) < l_max) {
    throw std::invalid_argument("sequence " + std::to_string(seq.source_id) +
                                " does not fit input length " +
                                std::to_string(n) + " and offset " +
                                std::to_string(l_max));
  }
}

}  // namespace

Matrix SongMatrix(const embed::EmbeddingMatrix& embeddings,
                  std::span<const SongId> songs) {
  Matrix m(embeddings.dims(), static_cast<Eigen::Index>(songs.size()));
  for (std::size_t j = 0; j < songs.size(); ++j) {
    m.col(j) = Column(embeddings, songs[j]);
  }
  return m;
}

namespace {

// sum_j w_j s_j, added column by column from j = 1.
Vector Accumulate(const Matrix& songs, const Vector& w) {
  Vector t = Vector::Zero(songs.rows());
  for (Eigen::Index j = 0; j < songs.cols(); ++j) t.noalias() += w(j) * songs.col(j);
  return t;
}

}  // namespace

Vector DiscountWeights(int k, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("gamma must lie in [0, 1]");
  }
  Vector w(k);
  for (int j = 1; j <= k; ++j) w(j - 1) = std::pow(gamma, k - j);
  return w;
}

Vector DiscountTaste(const Matrix& songs, double gamma) {
  if (songs.cols() == 0) throw std::invalid_argument("empty song sequence");
  const Vector w = DiscountWeights(static_cast<int>(songs.cols()), gamma);
  return Accumulate(songs, w);
}

Vector WeightTaste(const Matrix& songs, const WeightModel& model) {
  if (songs.cols() != model.weights.size()) {
    throw std::invalid_argument("weight model expects " +
                                std::to_string(model.weights.size()) +
                                " songs, got " + std::to_string(songs.cols()));
  }
  return Accumulate(songs, model.weights);
}

double WeightLoss(const Matrix& songs, const Vector& target,
                  const WeightModel& model) {
  return (target - WeightTaste(songs, model)).norm() +
         model.lambda * model.weights.norm();
}

Vector WeightLossGradient(const Matrix& songs, const Vector& target,
                          const WeightModel& model) {
  const Vector residual = target - WeightTaste(songs, model);
  const double rn = residual.norm();
  Vector grad = Vector::Zero(model.weights.size());
  if (rn > 0) grad -= songs.transpose() * residual / rn;
  const double wn = model.weights.norm();
  if (wn > 0) grad += model.lambda * model.weights / wn;
  return grad;
}

WeightTrainResult TrainWeightModel(
    const std::vector<corpus::TrainSequence>& train,
    const embed::EmbeddingMatrix& embeddings, const WeightTrainConfig& config,
    std::uint64_t seed) {
  if (train.empty()) throw std::invalid_argument("empty training set");
  if (config.k < 1 || config.batch_size < 1 || config.epochs < 0 ||
      config.lambda < 0) {
    throw std::invalid_argument("bad weight-model configuration");
  }
  taste::OffsetSampler sampler(config.offsets);
  for (const auto& seq : train) CheckSequence(seq, config.k, config.offsets.max);

  WeightTrainResult result;
  WeightModel& model = result.model;
  model.lambda = config.lambda;
  model.weights = Vector::Constant(config.k, 1.0 / config.k);

  auto loss_of = [&](const corpus::TrainSequence& seq, int l, Vector* grad) {
    const Matrix songs = SongMatrix(embeddings, seq.input);
    const Vector target = Column(embeddings, seq.targets[l - 1]);
    if (grad != nullptr) *grad += WeightLossGradient(songs, target, model);
    return WeightLoss(songs, target, model);
  };

  {
    Rng irng(DeriveSeed(seed, 4));
    double total = 0;
    for (const auto& seq : train) total += loss_of(seq, sampler.Draw(irng), nullptr);
    result.train_loss.push_back(total / static_cast<double>(train.size()));
  }

  Rng rng(DeriveSeed(seed, 2));
  nn::AdamState adam(config.k,
                     nn::AdamOptions{config.learning_rate, 0.9, 0.999, 1e-8});
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      Vector grad = Vector::Zero(config.k);
      double loss = 0;
      for (std::size_t b = begin; b < end; ++b) {
        loss += loss_of(train[order[b]], sampler.Draw(rng), &grad);
      }
      if (!std::isfinite(loss)) {
        throw TrainingDiverged("weight model: non-finite loss at epoch " +
                               std::to_string(epoch) + ", batch " +
                               std::to_string(begin / batch));
      }
      total += loss;
      nn::AdamUpdate(model.weights, grad, adam);
    }
    result.train_loss.push_back(total / static_cast<double>(train.size()));
  }
  return result;
}

void WriteWeights(std::ostream& out, const WeightModel& model) {
  out.precision(17);
  for (Eigen::Index j = 0; j < model.weights.size(); ++j) {
    out << j + 1 << '\t' << model.weights(j) << '\n';
  }
}

WeightModel ReadWeights(std::istream& in, double lambda) {
  std::vector<double> w;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    long index = 0;
    double value = 0;
    if (!(fields >> index >> value) ||
        index != static_cast<long>(w.size()) + 1) {
      throw DataError("weights line " + std::to_string(w.size() + 1) +
                      ": expected 'index<TAB>weight'");
    }
    w.push_back(value);
  }
  if (w.empty()) throw DataError("weights: empty file");
  WeightModel model;
  model.lambda = lambda;
  model.weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
  return model;
}

// ---------------------------------------------------------------------------
// Zipf

ZipfSampler::ZipfSampler(std::int64_t n, double z) : z_(z) {
  if (n < 1) throw std::invalid_argument("Zipf support must be non-empty");
  if (!(z > 0)) throw std::invalid_argument("Zipf exponent must be positive");
  cdf_.resize(n);
  double total = 0;
  for (std::int64_t k = 1; k <= n; ++k) {
    total += std::pow(static_cast<double>(k), -z);
    cdf_[k - 1] = total;
  }
  for (double& c : cdf_) c /= total;
  cdf_.back() = 1.0;
}

double ZipfSampler::Probability(std::int64_t rank) const {
  if (rank < 1 || rank > size()) return 0.0;
  return cdf_[rank - 1] - (rank > 1 ? cdf_[rank - 2] : 0.0);
}

std::int64_t ZipfSampler::Sample(Rng& rng) const {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return std::min<std::int64_t>(it - cdf_.begin(), size() - 1) + 1;
}

std::int64_t ZipfSampler::SampleExcluding(
    Rng& rng, const std::unordered_set<std::int64_t>& exclude) const {
  for (int attempt = 0; attempt < kMaxZipfAttempts; ++attempt) {
    const std::int64_t rank = Sample(rng);
    if (!exclude.count(rank)) return rank;
  }
  throw std::runtime_error("Zipf sampler: no admissible rank after " +
                           std::to_string(kMaxZipfAttempts) + " attempts");
}

// ---------------------------------------------------------------------------
// Losses

Vector Softmax(const Vector& logits) {
  const Vector e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

double CrossEntropyLoss(const Vector& logits, std::int64_t target) {
  CheckIndex(logits, target);
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return lse - logits(target);
}

Vector CrossEntropyGradient(const Vector& logits, std::int64_t target) {
  CheckIndex(logits, target);
  Vector g = Softmax(logits);
  g(target) -= 1.0;
  return g;
}

double BprLoss(const Vector& logits, std::int64_t positive,
               std::span<const std::int64_t> negatives, double reg) {
  CheckIndex(logits, positive);
  if (negatives.empty()) throw std::invalid_argument("BPR needs negatives");
  double loss = 0;
  double squares = logits(positive) * logits(positive);
  for (std::int64_t j : negatives) {
    CheckIndex(logits, j);
    loss -= LogSigmoid(logits(positive) - logits(j));
    squares += logits(j) * logits(j);
  }
  return loss / static_cast<double>(negatives.size()) + reg * squares;
}

Vector BprGradient(const Vector& logits, std::int64_t positive,
                   std::span<const std::int64_t> negatives, double reg) {
  CheckIndex(logits, positive);
  if (negatives.empty()) throw std::invalid_argument("BPR needs negatives");
  Vector g = Vector::Zero(logits.size());
  const double scale = 1.0 / static_cast<double>(negatives.size());
  g(positive) += 2 * reg * logits(positive);
  for (std::int64_t j : negatives) {
    CheckIndex(logits, j);
    const double d = -(1.0 - Sigmoid(logits(positive) - logits(j))) * scale;
    g(positive) += d;
    g(j) += -d + 2 * reg * logits(j);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Classifier

Classifier::Classifier(const ClassifierConfig& config,
                       const embed::EmbeddingMatrix& embeddings,
                       std::uint64_t seed)
    : Classifier(config,
                 nn::Network(ClassifierArchitecture(
                                 config, embeddings.dims(),
                                 static_cast<std::int64_t>(embeddings.rows())),
                             seed),
                 embeddings) {}

Classifier::Classifier(const ClassifierConfig& config, nn::Network network,
                       const embed::EmbeddingMatrix& embeddings)
    : config_(config), network_(std::move(network)), items_(embeddings.ids()) {
  const auto& arch = network_.architecture();
  if (arch.input_dim != embeddings.dims() ||
      arch.output_dim() != static_cast<int>(items_.size())) {
    throw std::invalid_argument(
        "classifier: network shape does not match the embeddings (" +
        std::to_string(arch.output_dim()) + " outputs, " +
        std::to_string(items_.size()) + " items)");
  }
  for (std::size_t i = 0; i < items_.size(); ++i) {
    index_.emplace(items_[i], static_cast<std::int64_t>(i));
  }
}

std::int64_t Classifier::ItemIndex(SongId id) const {
  auto it = index_.find(id);
  return it == index_.end() ? -1 : it->second;
}

Vector Classifier::Logits(const embed::EmbeddingMatrix& embeddings,
                          std::span<const SongId> songs) const {
  if (songs.empty()) throw std::invalid_argument("empty song sequence");
  if (embeddings.rows() != items_.size() ||
      embeddings.dims() != network_.architecture().input_dim) {
    throw std::invalid_argument("classifier: embedding/catalog mismatch");
  }
  std::vector<Matrix> inputs;
  inputs.reserve(songs.size());
  for (SongId id : songs) inputs.push_back(Column(embeddings, id));
  return network_.Forward(inputs).col(0);
}

Vector Classifier::Scores(const embed::EmbeddingMatrix& embeddings,
                          std::span<const SongId> songs) const {
  Vector logits = Logits(embeddings, songs);
  if (config_.loss == ClassifierLoss::kCrossEntropy) return Softmax(logits);
  return logits;
}

ClassifierTrainResult TrainClassifier(
    const std::vector<corpus::TrainSequence>& train,
    const embed::EmbeddingMatrix& embeddings, const ClassifierConfig& config,
    std::uint64_t seed) {
  if (train.empty()) throw std::invalid_argument("empty training set");
  if (config.batch_size < 1 || config.epochs < 0 || config.bpr_negatives < 1) {
    throw std::invalid_argument("bad classifier configuration");
  }
  taste::OffsetSampler sampler(config.offsets);
  for (const auto& seq : train) {
    CheckSequence(seq, config.input_length, config.offsets.max);
  }
  ClassifierTrainResult result;
  result.model = Classifier(config, embeddings, DeriveSeed(seed, 1));
  Classifier& model = result.model;
  const ZipfSampler zipf(static_cast<std::int64_t>(model.items().size()),
                         config.zipf_z);

  // Loss and logit gradients for a batch of sequences.
  auto batch_loss = [&](const std::vector<std::size_t>& order,
                        std::size_t begin, std::size_t end,
                        const std::vector<int>& offsets, Rng& rng,
                        nn::Tape* tape, Matrix* upstream) {
    const Eigen::Index width = static_cast<Eigen::Index>(end - begin);
    std::vector<Matrix> inputs(config.input_length,
                               Matrix(embeddings.dims(), width));
    for (std::size_t b = begin; b < end; ++b) {
      const auto& seq = train[order[b]];
      for (int t = 0; t < config.input_length; ++t) {
        inputs[t].col(b - begin) = Column(embeddings, seq.input[t]);
      }
    }
    const Matrix logits = model.network().Forward(inputs, tape);
    if (upstream != nullptr) upstream->resize(logits.rows(), logits.cols());
    double total = 0;
    std::vector<std::int64_t> negatives(config.bpr_negatives);
    for (std::size_t b = begin; b < end; ++b) {
      const auto& seq = train[order[b]];
      const Vector x = logits.col(b - begin);
      const std::int64_t target =
          model.ItemIndex(seq.targets[offsets[order[b]] - 1]);
      if (target < 0) throw std::invalid_argument("target song has no vector");
      if (config.loss == ClassifierLoss::kCrossEntropy) {
        total += CrossEntropyLoss(x, target);
        if (upstream) upstream->col(b - begin) = CrossEntropyGradient(x, target);
      } else {
        std::unordered_set<std::int64_t> exclude = {target + 1};
        for (SongId id : seq.input) exclude.insert(model.ItemIndex(id) + 1);
        for (auto& j : negatives) j = zipf.SampleExcluding(rng, exclude) - 1;
        total += BprLoss(x, target, negatives, config.bpr_reg);
        if (upstream) {
          upstream->col(b - begin) =
              BprGradient(x, target, negatives, config.bpr_reg);
        }
      }
    }
    return total;
  };

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> offsets(train.size());
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  {
    Rng irng(DeriveSeed(seed, 4));
    for (int& l : offsets) l = sampler.Draw(irng);
    double total = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += 256) {
      total += batch_loss(order, begin, std::min(order.size(), begin + 256),
                          offsets, irng, nullptr, nullptr);
    }
    result.train_loss.push_back(total / static_cast<double>(train.size()));
  }

  Rng rng(DeriveSeed(seed, 2));
  nn::Vector params = model.network().Parameters();
  nn::AdamState adam(params.size(),
                     nn::AdamOptions{config.learning_rate, 0.9, 0.999, 1e-8});
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      for (std::size_t b = begin; b < end; ++b) offsets[order[b]] = sampler.Draw(rng);
      nn::Tape tape;
      Matrix upstream;
      const double loss =
          batch_loss(order, begin, end, offsets, rng, &tape, &upstream);
      if (!std::isfinite(loss)) {
        throw TrainingDiverged("classifier: non-finite loss at epoch " +
                               std::to_string(epoch) + ", batch " +
                               std::to_string(begin / batch));
      }
      total += loss;
      nn::AdamUpdate(params, model.network().Backward(tape, upstream), adam);
      model.mutable_network().SetParameters(params);
    }
    result.train_loss.push_back(total / static_cast<double>(train.size()));
  }
  return result;
}

void WriteClassifier(std::ostream& out, const Classifier& model,
                     const std::string& tag) {
  const auto& c = model.config();
  std::ostringstream meta;
  meta.precision(17);
  meta << "classifier loss="
       << (c.loss == ClassifierLoss::kCrossEntropy ? "ce" : "bpr")
       << " n=" << c.input_length << " l_min=" << c.offsets.min
       << " l_max=" << c.offsets.max << " negatives=" << c.bpr_negatives
       << " reg=" << c.bpr_reg << " z=" << c.zipf_z << " tag=" << tag;
  nn::WriteNetwork(out, model.network(), meta.str());
}

Classifier ReadClassifier(std::istream& in,
                          const embed::EmbeddingMatrix& embeddings,
                          std::string* tag) {
  std::string meta;
  nn::Network network = nn::ReadNetwork(in, &meta);
  std::istringstream fields(meta);
  std::string field;
  if (!(fields >> field) || field != "classifier") {
    throw DataError("not a classifier model file");
  }
  ClassifierConfig c;
  while (fields >> field) {
    const std::size_t eq = field.find('=');
    if (eq == std::string::npos) throw DataError("classifier metadata: " + field);
    const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
    try {
      if (key == "loss") {
        c.loss = value == "bpr" ? ClassifierLoss::kBpr
                                : ClassifierLoss::kCrossEntropy;
      } else if (key == "n") {
        c.input_length = std::stoi(value);
      } else if (key == "l_min") {
        c.offsets.min = std::stoi(value);
      } else if (key == "l_max") {
        c.offsets.max = std::stoi(value);
      } else if (key == "negatives") {
        c.bpr_negatives = std::stoi(value);
      } else if (key == "reg") {
        c.bpr_reg = std::stod(value);
      } else if (key == "z") {
        c.zipf_z = std::stod(value);
      } else if (key == "tag" && tag != nullptr) {
        *tag = value;
      }
    } catch (const std::logic_error&) {
      throw DataError("classifier metadata: bad value in '" + field + "'");
    }
  }
  const auto& arch = network.architecture();
  c.recurrent_dims = arch.recurrent_dims;
  c.dense_hidden.assign(arch.dense.begin(),
                        arch.dense.end() - (arch.dense.empty() ? 0 : 1));
  try {
    return Classifier(c, std::move(network), embeddings);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
}

}  // namespace tasteseq::baselines
