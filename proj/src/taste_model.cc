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

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace tasteseq::taste {
namespace {

constexpr std::string_view kVariantNames[] = {"rPST", "rPLT", "rHST", "rHLT"};

nn::Architecture ArchitectureFor(const TrainConfig& config,
                                 int embedding_dims) {
  nn::Architecture arch;
  arch.input_dim = embedding_dims + (config.context_enabled ? kContextWidth : 0);
  arch.recurrent_kind = config.recurrent_kind;
  arch.recurrent_dims = config.recurrent_dims;
  arch.dense = config.dense_hidden;
  arch.dense.push_back({embedding_dims, nn::Activation::kLinear});
  return arch;
}

Vector ToVector(std::span<const float> v) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out(i) = v[i];
  return out;
}

void CheckSequence(const corpus::TrainSequence& seq, const TrainConfig& config) {
  if (static_cast<int>(seq.input.size()) != config.input_length) {
    throw std::invalid_argument(
        "sequence " + std::to_string(seq.source_id) + " has " +
        std::to_string(seq.input.size()) + " input songs, expected " +
        std::to_string(config.input_length));
  }
  if (static_cast<int>(seq.targets.size()) < config.offsets.max) {
    throw std::invalid_argument("sequence " + std::to_string(seq.source_id) +
                                " has too few targets for offset " +
                                std::to_string(config.offsets.max));
  }
  if (config.context_enabled && seq.context_inputs.size() != seq.input.size()) {
    throw std::invalid_argument("sequence " + std::to_string(seq.source_id) +
                                " lacks play contexts");
  }
}

// Input matrices for the sequences data[order[begin..end)].
std::vector<Matrix> BatchInputs(const TasteModel& model,
                                const embed::EmbeddingMatrix& embeddings,
                                const std::vector<corpus::TrainSequence>& data,
                                const std::vector<std::size_t>& order,
                                std::size_t begin, std::size_t end) {
  const int n = model.config().input_length;
  const bool ctx = model.config().context_enabled;
  const Eigen::Index batch = static_cast<Eigen::Index>(end - begin);
  std::vector<Matrix> inputs(n, Matrix(model.input_width(), batch));
  for (std::size_t b = begin; b < end; ++b) {
    const auto& seq = data[order[b]];
    for (int t = 0; t < n; ++t) {
      const corpus::ListeningEvent* event =
          ctx ? &seq.context_inputs[t] : nullptr;
      const corpus::ListeningEvent* prev =
          ctx && t > 0 ? &seq.context_inputs[t - 1] : nullptr;
      inputs[t].col(b - begin) = model.InputFor(embeddings, seq.input[t], event, prev);
    }
  }
  return inputs;
}

double Loss(LossKind kind, const Vector& pred, const Vector& target) {
  return kind == LossKind::kL2 ? L2Loss(pred, target) : CosineLoss(pred, target);
}

Vector LossGradient(LossKind kind, const Vector& pred, const Vector& target) {
  return kind == LossKind::kL2 ? L2LossGradient(pred, target)
                               : CosineLossGradient(pred, target);
}

// Sum of per-sequence losses over a batch; fills `upstream` when non-null.
double BatchLoss(const TasteModel& model,
                 const embed::EmbeddingMatrix& embeddings,
                 const std::vector<corpus::TrainSequence>& data,
                 const std::vector<std::size_t>& order,
                 const std::vector<int>& offsets, std::size_t begin,
                 std::size_t end, const Matrix& output, Matrix* upstream) {
  double total = 0;
  if (upstream != nullptr) upstream->resize(output.rows(), output.cols());
  for (std::size_t b = begin; b < end; ++b) {
    const auto& seq = data[order[b]];
    const SongId target_id = seq.targets[offsets[order[b]] - 1];
    const Vector target = ToVector(embeddings.Vector(target_id));
    const Vector pred = output.col(b - begin);
    total += Loss(model.config().loss, pred, target);
    if (upstream != nullptr) {
      upstream->col(b - begin) = LossGradient(model.config().loss, pred, target);
    }
  }
  return total;
}

std::string MetadataFor(const TasteModel& model) {
  const TrainConfig& c = model.config();
  std::ostringstream meta;
  meta.precision(17);
  meta << "variant=" << VariantName(c.variant) << " n=" << c.input_length
       << " l_min=" << c.offsets.min << " l_max=" << c.offsets.max
       << " context=" << (c.context_enabled ? 1 : 0)
       << " time=" << (c.time_scaling == TimeScaling::kLog ? "log" : "raw")
       << " loss=" << (c.loss == LossKind::kL2 ? "l2" : "cos")
       << " lr=" << c.learning_rate << " batch=" << c.batch_size
       << " epochs=" << c.epochs << " tag=" << model.tag();
  return meta.str();
}

void PutU64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t GetU64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (in.gcount() != 8) throw DataError("user state: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void PutMatrix(std::ostream& out, const Matrix& m) {
  PutU64(out, static_cast<std::uint64_t>(m.rows()));
  PutU64(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      PutU64(out, std::bit_cast<std::uint64_t>(m(r, c)));
    }
  }
}

Matrix GetMatrix(std::istream& in) {
  const std::uint64_t rows = GetU64(in), cols = GetU64(in);
  if (rows > (1u << 20) || cols > (1u << 20)) {
    throw DataError("user state: implausible matrix shape");
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = std::bit_cast<double>(GetU64(in));
    }
  }
  return m;
}

}  // namespace

std::string_view VariantName(Variant variant) {
  return kVariantNames[static_cast<int>(variant)];
}

std::optional<Variant> ParseVariant(std::string_view name) {
  for (int i = 0; i < 4; ++i) {
    if (kVariantNames[i] == name) return static_cast<Variant>(i);
  }
  return std::nullopt;
}

bool IsHistoryVariant(Variant variant) {
  return variant == Variant::kHST || variant == Variant::kHLT;
}

OffsetSampler::OffsetSampler(OffsetRange range) : dist_(range.min, range.max) {
  if (range.min < 1 || range.max < range.min) {
    throw std::invalid_argument("offset range must satisfy 1 <= min <= max");
  }
}

double ScaleTimeDelta(std::int64_t seconds, TimeScaling scaling) {
  const double s = static_cast<double>(std::max<std::int64_t>(0, seconds));
  return scaling == TimeScaling::kLog ? std::log1p(s) : s;
}

Vector BuildContextVector(const corpus::ListeningEvent& event,
                          const corpus::ListeningEvent* previous,
                          TimeScaling scaling) {
  Vector v = Vector::Zero(kContextWidth);
  if (previous != nullptr) {
    v(0) = ScaleTimeDelta(event.timestamp - previous->timestamp, scaling);
  }
  for (int c = 0; c < corpus::kNumPlayContexts; ++c) {
    if (event.contexts.test(c)) v(1 + c) = 1.0;
  }
  return v;
}

double L2Loss(const Vector& pred, const Vector& target) {
  if (pred.size() != target.size()) {
    throw std::invalid_argument("loss: dimension mismatch");
  }
  return (target - pred).norm();
}

Vector L2LossGradient(const Vector& pred, const Vector& target) {
  const double norm = L2Loss(pred, target);
  if (norm == 0.0) return Vector::Zero(pred.size());
  return (pred - target) / norm;
}

double CosineLoss(const Vector& pred, const Vector& target) {
  if (pred.size() != target.size()) {
    throw std::invalid_argument("loss: dimension mismatch");
  }
  const double np = pred.norm(), nt = target.norm();
  if (np == 0.0 || nt == 0.0) {
    throw std::invalid_argument("cosine loss: zero-norm vector");
  }
  return 1.0 - pred.dot(target) / (np * nt);
}

Vector CosineLossGradient(const Vector& pred, const Vector& target) {
  CosineLoss(pred, target);
  const double np = pred.norm(), nt = target.norm();
  const double dot = pred.dot(target);
  return -(target / (np * nt) - dot * pred / (np * np * np * nt));
}

TrainConfig DefaultConfig(Variant variant) {
  TrainConfig c;
  c.variant = variant;
  c.input_length = IsHistoryVariant(variant) ? corpus::kHistoryInputLength
                                             : corpus::kPlaylistInputLength;
  c.offsets = variant == Variant::kPST || variant == Variant::kHST ? kShortTerm
                                                                   : kLongTerm;
  return c;
}

TasteModel::TasteModel(const TrainConfig& config, int embedding_dims,
                       std::uint64_t seed)
    : config_(config),
      network_(ArchitectureFor(config, embedding_dims), seed) {}

TasteModel::TasteModel(const TrainConfig& config, nn::Network network)
    : config_(config), network_(std::move(network)) {
  const auto& arch = network_.architecture();
  if (arch.input_dim !=
      arch.output_dim() + (config.context_enabled ? kContextWidth : 0)) {
    throw std::invalid_argument("taste model: input width does not match "
                                "the output space and context setting");
  }
}

Vector TasteModel::InputFor(const embed::EmbeddingMatrix& embeddings,
                            SongId song, const corpus::ListeningEvent* event,
                            const corpus::ListeningEvent* previous) const {
  if (embeddings.dims() != embedding_dims()) {
    throw std::invalid_argument(
        "model expects " + std::to_string(embedding_dims()) +
        "-dim song vectors, embeddings have " +
        std::to_string(embeddings.dims()));
  }
  Vector x(input_width());
  x.head(embedding_dims()) = ToVector(embeddings.Vector(song));
  if (config_.context_enabled) {
    if (event == nullptr) {
      throw std::invalid_argument("context-enabled model needs play events");
    }
    x.tail(kContextWidth) =
        BuildContextVector(*event, previous, config_.time_scaling);
  }
  return x;
}

Vector TasteModel::TasteVector(
    const embed::EmbeddingMatrix& embeddings, std::span<const SongId> songs,
    std::span<const corpus::ListeningEvent> events) const {
  if (songs.empty()) throw std::invalid_argument("empty song sequence");
  if (!events.empty() && events.size() != songs.size()) {
    throw std::invalid_argument("events and songs differ in length");
  }
  std::vector<Matrix> inputs;
  inputs.reserve(songs.size());
  for (std::size_t t = 0; t < songs.size(); ++t) {
    const corpus::ListeningEvent* event = events.empty() ? nullptr : &events[t];
    const corpus::ListeningEvent* prev =
        events.empty() || t == 0 ? nullptr : &events[t - 1];
    inputs.push_back(InputFor(embeddings, songs[t], event, prev));
  }
  return network_.Forward(inputs).col(0);
}

void WriteTasteModel(std::ostream& out, const TasteModel& model) {
  if (model.tag().find_first_of(" \n") != std::string::npos) {
    throw std::invalid_argument("model tag must not contain spaces");
  }
  nn::WriteNetwork(out, model.network(), MetadataFor(model));
}

TasteModel ReadTasteModel(std::istream& in) {
  std::string meta;
  nn::Network network = nn::ReadNetwork(in, &meta);
  TrainConfig c;
  std::string tag;
  std::istringstream fields(meta);
  std::string field;
  bool have_variant = false;
  while (fields >> field) {
    const std::size_t eq = field.find('=');
    if (eq == std::string::npos) throw DataError("model metadata: '" + field + "'");
    const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
    try {
      if (key == "variant") {
        auto v = ParseVariant(value);
        if (!v) throw DataError("model metadata: unknown variant " + value);
        c.variant = *v;
        have_variant = true;
      } else if (key == "n") {
        c.input_length = std::stoi(value);
      } else if (key == "l_min") {
        c.offsets.min = std::stoi(value);
      } else if (key == "l_max") {
        c.offsets.max = std::stoi(value);
      } else if (key == "context") {
        c.context_enabled = value == "1";
      } else if (key == "time") {
        c.time_scaling = value == "raw" ? TimeScaling::kRaw : TimeScaling::kLog;
      } else if (key == "loss") {
        c.loss = value == "cos" ? LossKind::kCosine : LossKind::kL2;
      } else if (key == "lr") {
        c.learning_rate = std::stod(value);
      } else if (key == "batch") {
        c.batch_size = std::stoi(value);
      } else if (key == "epochs") {
        c.epochs = std::stoi(value);
      } else if (key == "tag") {
        tag = value;
      }
    } catch (const std::logic_error&) {
      throw DataError("model metadata: bad value in '" + field + "'");
    }
  }
  if (!have_variant) throw DataError("model metadata: missing variant");
  const auto& arch = network.architecture();
  c.recurrent_kind = arch.recurrent_kind;
  c.recurrent_dims = arch.recurrent_dims;
  c.dense_hidden.assign(arch.dense.begin(),
                        arch.dense.end() - (arch.dense.empty() ? 0 : 1));
  TasteModel model;
  try {
    model = TasteModel(c, std::move(network));
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  model.set_tag(tag);
  return model;
}

double EvaluateLoss(const TasteModel& model,
                    const std::vector<corpus::TrainSequence>& data,
                    const std::vector<int>& offsets,
                    const embed::EmbeddingMatrix& embeddings) {
  if (data.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (offsets.size() != data.size()) {
    throw std::invalid_argument("one offset per sequence required");
  }
  for (const auto& seq : data) CheckSequence(seq, model.config());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  constexpr std::size_t kChunk = 256;
  double total = 0;
  for (std::size_t begin = 0; begin < data.size(); begin += kChunk) {
    const std::size_t end = std::min(data.size(), begin + kChunk);
    const auto inputs =
        BatchInputs(model, embeddings, data, order, begin, end);
    const Matrix out = model.network().Forward(inputs);
    total += BatchLoss(model, embeddings, data, order, offsets, begin, end, out,
                       nullptr);
  }
  return total / static_cast<double>(data.size());
}

TrainResult TrainTasteModel(const std::vector<corpus::TrainSequence>& train,
                            const std::vector<corpus::TrainSequence>& valid,
                            const embed::EmbeddingMatrix& embeddings,
                            const TrainConfig& config, std::uint64_t seed,
                            const std::function<void(const EpochLoss&)>& on_epoch) {
  if (train.empty()) throw std::invalid_argument("empty training set");
  if (config.batch_size < 1 || config.epochs < 0 || config.input_length < 1) {
    throw std::invalid_argument("bad training configuration");
  }
  OffsetSampler sampler(config.offsets);
  for (const auto& seq : train) CheckSequence(seq, config);
  for (const auto& seq : valid) CheckSequence(seq, config);

  TasteModel model(config, embeddings.dims(), DeriveSeed(seed, 1));
  Rng rng(DeriveSeed(seed, 2));

  std::vector<int> valid_offsets(valid.size());
  {
    Rng vrng(DeriveSeed(seed, 3));
    for (int& l : valid_offsets) l = sampler.Draw(vrng);
  }
  std::vector<int> initial_offsets(train.size());
  {
    Rng irng(DeriveSeed(seed, 4));
    for (int& l : initial_offsets) l = sampler.Draw(irng);
  }

  TrainResult result;
  EpochLoss initial{0, EvaluateLoss(model, train, initial_offsets, embeddings),
                    EvaluateLoss(model, valid, valid_offsets, embeddings)};
  result.history.push_back(initial);
  if (on_epoch) on_epoch(initial);
  nn::Vector best_params = model.network().Parameters();
  double best_valid = initial.valid_loss;

  nn::Vector params = best_params;
  nn::AdamState adam(params.size(),
                     nn::AdamOptions{config.learning_rate, 0.9, 0.999, 1e-8});
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> offsets(train.size());
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    int batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch, ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + batch);
      for (std::size_t b = begin; b < end; ++b) offsets[order[b]] = sampler.Draw(rng);
      const auto inputs =
          BatchInputs(model, embeddings, train, order, begin, end);
      nn::Tape tape;
      const Matrix out = model.network().Forward(inputs, &tape);
      Matrix upstream;
      const double loss = BatchLoss(model, embeddings, train, order, offsets,
                                    begin, end, out, &upstream);
      if (!std::isfinite(loss)) {
        throw TrainingDiverged("non-finite loss at epoch " +
                               std::to_string(epoch) + ", batch " +
                               std::to_string(batch_index));
      }
      epoch_loss += loss;
      const nn::Vector grads = model.network().Backward(tape, upstream);
      try {
        nn::AdamUpdate(params, grads, adam);
      } catch (const TrainingDiverged& e) {
        throw TrainingDiverged(std::string(e.what()) + " (epoch " +
                               std::to_string(epoch) + ", batch " +
                               std::to_string(batch_index) + ")");
      }
      model.mutable_network().SetParameters(params);
    }
    EpochLoss record{epoch, epoch_loss / static_cast<double>(train.size()),
                     EvaluateLoss(model, valid, valid_offsets, embeddings)};
    if (!std::isfinite(record.train_loss)) {
      throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch));
    }
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
    if (valid.empty() || record.valid_loss < best_valid) {
      best_valid = record.valid_loss;
      best_params = params;
      result.best_epoch = epoch;
    }
  }
  model.mutable_network().SetParameters(best_params);
  result.model = std::move(model);
  return result;
}

void WriteLossHistory(std::ostream& out, const std::vector<EpochLoss>& history) {
  out.precision(9);
  for (const auto& e : history) {
    out << e.epoch << '\t' << e.train_loss << '\t' << e.valid_loss << '\n';
  }
}

UserState NewUserState(const TasteModel& model) {
  return {model.network().ZeroStates(1), std::nullopt, 0};
}

std::pair<UserState, Vector> UserStateUpdate(
    const TasteModel& model, const embed::EmbeddingMatrix& embeddings,
    const UserState& state, const corpus::ListeningEvent& event) {
  const auto& layers = model.network().recurrent();
  if (state.layers.size() != layers.size()) {
    throw std::invalid_argument("user state has " +
                                std::to_string(state.layers.size()) +
                                " layers, model has " +
                                std::to_string(layers.size()));
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const int hid = std::visit([](const auto& x) { return x.hidden_dim(); },
                               layers[l]);
    const bool lstm = std::holds_alternative<nn::LstmLayer>(layers[l]);
    const auto& s = state.layers[l];
    if (s.h.rows() != hid || s.h.cols() != 1 ||
        (lstm && (s.c.rows() != hid || s.c.cols() != 1))) {
      throw std::invalid_argument("user state does not fit layer " +
                                  std::to_string(l));
    }
  }
  UserState next = state;
  const corpus::ListeningEvent* prev =
      state.last_event ? &*state.last_event : nullptr;
  const Vector x = model.InputFor(embeddings, event.song_id, &event, prev);
  model.network().Advance(x, &next.layers);
  next.last_event = event;
  ++next.num_events;
  Vector taste = model.network().Head(next.layers).col(0);
  return {std::move(next), std::move(taste)};
}

void WriteUserState(std::ostream& out, const UserState& state) {
  out.write("TUSR1\n", 6);
  PutU64(out, state.layers.size());
  for (const auto& s : state.layers) {
    PutMatrix(out, s.h);
    PutMatrix(out, s.c);
  }
  PutU64(out, state.last_event ? 1 : 0);
  if (state.last_event) {
    PutU64(out, static_cast<std::uint64_t>(state.last_event->song_id));
    PutU64(out, static_cast<std::uint64_t>(state.last_event->timestamp));
    PutU64(out, state.last_event->contexts.to_ullong());
  }
  PutU64(out, static_cast<std::uint64_t>(state.num_events));
}

UserState ReadUserState(std::istream& in) {
  char magic[6];
  in.read(magic, 6);
  if (in.gcount() != 6 || std::string_view(magic, 6) != "TUSR1\n") {
    throw DataError("user state: bad magic");
  }
  UserState state;
  const std::uint64_t layers = GetU64(in);
  if (layers > 64) throw DataError("user state: implausible layer count");
  for (std::uint64_t l = 0; l < layers; ++l) {
    nn::RecurrentState s;
    s.h = GetMatrix(in);
    s.c = GetMatrix(in);
    state.layers.push_back(std::move(s));
  }
  if (GetU64(in) != 0) {
    corpus::ListeningEvent e;
    e.song_id = static_cast<SongId>(GetU64(in));
    e.timestamp = static_cast<std::int64_t>(GetU64(in));
    e.contexts = corpus::ContextSet(GetU64(in));
    state.last_event = e;
  }
  state.num_events = static_cast<std::int64_t>(GetU64(in));
  return state;
}

}  // namespace tasteseq::taste
