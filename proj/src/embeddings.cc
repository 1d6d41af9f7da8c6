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

#include "tasteseq/embeddings.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace tasteseq::embed {
namespace {

template <typename A, typename B>
double CosineDistanceImpl(std::span<const A> x, std::span<const B> y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("cosine distance: dimension mismatch");
  }
  double dot = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = x[i];
    const double b = y[i];
    dot += a * b;
    xx += a * a;
    yy += b * b;
  }
  if (xx == 0.0 || yy == 0.0) {
    throw std::invalid_argument("cosine distance: zero-norm vector");
  }
  return std::clamp(1.0 - dot / (std::sqrt(xx) * std::sqrt(yy)), 0.0, 2.0);
}

float Sigmoid(float x) {
  if (x >= 0) return 1.0f / (1.0f + std::exp(-x));
  const float e = std::exp(x);
  return e / (1.0f + e);
}

}  // namespace

Vocabulary::Vocabulary(std::vector<SongId> ids,
                       std::vector<std::int64_t> counts)
    : ids_(std::move(ids)), counts_(std::move(counts)) {
  if (ids_.size() != counts_.size()) {
    throw std::invalid_argument("vocabulary: ids and counts differ in size");
  }
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], static_cast<std::int64_t>(i)).second) {
      throw std::invalid_argument("vocabulary: duplicate id");
    }
  }
}

std::int64_t Vocabulary::IndexOf(SongId id) const {
  auto it = index_.find(id);
  return it == index_.end() ? -1 : it->second;
}

Vocabulary BuildVocabulary(const std::vector<corpus::Playlist>& playlists,
                           const corpus::Catalog& catalog, int top_n) {
  if (top_n < 1) throw std::invalid_argument("top_n must be positive");
  std::unordered_map<SongId, std::int64_t> counts;
  for (const auto& p : playlists) {
    for (SongId id : p.songs) {
      if (catalog.Find(id) != nullptr) ++counts[id];
    }
  }
  if (counts.empty()) throw std::invalid_argument("empty playlist corpus");
  std::vector<const corpus::Song*> present;
  present.reserve(counts.size());
  for (const auto& [id, n] : counts) present.push_back(catalog.Find(id));
  std::sort(present.begin(), present.end(),
            [](const corpus::Song* a, const corpus::Song* b) {
              if (a->popularity_rank != b->popularity_rank) {
                return a->popularity_rank < b->popularity_rank;
              }
              return a->id < b->id;
            });
  std::vector<SongId> ids;
  std::vector<std::int64_t> tally;
  for (const corpus::Song* s : present) {
    if (s->popularity_rank > top_n) break;
    ids.push_back(s->id);
    tally.push_back(counts[s->id]);
  }
  return Vocabulary(std::move(ids), std::move(tally));
}

EmbeddingMatrix::EmbeddingMatrix(std::vector<SongId> ids, int dims)
    : ids_(std::move(ids)), dims_(dims) {
  if (dims < 1) throw std::invalid_argument("embedding dims must be >= 1");
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    if (!rows_.emplace(ids_[r], static_cast<std::int64_t>(r)).second) {
      throw std::invalid_argument("embedding matrix: duplicate id");
    }
  }
  values_.assign(ids_.size() * dims_, 0.0f);
}

std::int64_t EmbeddingMatrix::RowOf(SongId id) const {
  auto it = rows_.find(id);
  return it == rows_.end() ? -1 : it->second;
}

std::span<const float> EmbeddingMatrix::Vector(SongId id) const {
  const std::int64_t r = RowOf(id);
  if (r < 0) {
    throw std::invalid_argument("no vector for song " + std::to_string(id));
  }
  return row(static_cast<std::size_t>(r));
}

bool EmbeddingMatrix::AllFinite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](float v) { return std::isfinite(v); });
}

EmbeddingMatrix TrainCbow(const std::vector<corpus::Playlist>& playlists,
                          const Vocabulary& vocab, const CbowOptions& options,
                          std::uint64_t seed) {
  if (vocab.empty()) throw std::invalid_argument("empty vocabulary");
  if (options.dims < 1 || options.window < 1 || options.negatives < 1 ||
      options.epochs < 0) {
    throw std::invalid_argument("bad CBoW options");
  }
  const int dims = options.dims;
  const std::size_t n = vocab.size();
  Rng rng(seed);

  EmbeddingMatrix input(vocab.ids(), dims);
  {
    std::uniform_real_distribution<float> init(-0.5f / dims, 0.5f / dims);
    for (float& v : input.mutable_values()) v = init(rng);
  }
  std::vector<float> output(n * dims, 0.0f);

  std::vector<std::vector<std::int64_t>> docs;
  std::int64_t total_tokens = 0;
  for (const auto& p : playlists) {
    std::vector<std::int64_t> doc;
    for (SongId id : p.songs) {
      const std::int64_t idx = vocab.IndexOf(id);
      if (idx >= 0) doc.push_back(idx);
    }
    total_tokens += static_cast<std::int64_t>(doc.size());
    docs.push_back(std::move(doc));
  }

  std::vector<double> noise(n);
  for (std::size_t i = 0; i < n; ++i) {
    noise[i] = std::pow(static_cast<double>(vocab.count(i)), 0.75);
  }
  std::discrete_distribution<std::int64_t> negative(noise.begin(),
                                                    noise.end());

  const double total = std::max<double>(1.0, static_cast<double>(
                                                 total_tokens) *
                                                 options.epochs);
  std::vector<float> hidden(dims), hidden_grad(dims);
  std::int64_t processed = 0;
  std::int64_t updates = 0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (const auto& doc : docs) {
      const std::int64_t len = static_cast<std::int64_t>(doc.size());
      for (std::int64_t pos = 0; pos < len; ++pos, ++processed) {
        const float alpha = static_cast<float>(
            options.start_learning_rate -
            (options.start_learning_rate - options.end_learning_rate) *
                (static_cast<double>(processed) / total));
        const std::int64_t lo = std::max<std::int64_t>(0, pos - options.window);
        const std::int64_t hi = std::min(len - 1, pos + options.window);
        const std::int64_t context_size = hi - lo;  // excludes the centre
        if (context_size == 0) continue;

        std::fill(hidden.begin(), hidden.end(), 0.0f);
        std::fill(hidden_grad.begin(), hidden_grad.end(), 0.0f);
        for (std::int64_t c = lo; c <= hi; ++c) {
          if (c == pos) continue;
          const auto v = input.row(doc[c]);
          for (int d = 0; d < dims; ++d) hidden[d] += v[d];
        }
        for (int d = 0; d < dims; ++d) hidden[d] /= context_size;

        const std::int64_t centre = doc[pos];
        for (int k = 0; k <= options.negatives; ++k) {
          std::int64_t target;
          float label;
          if (k == 0) {
            target = centre;
            label = 1.0f;
          } else {
            target = negative(rng);
            if (target == centre) continue;
            label = 0.0f;
          }
          float* out = output.data() + target * dims;
          float f = 0.0f;
          for (int d = 0; d < dims; ++d) f += hidden[d] * out[d];
          const float g = (label - Sigmoid(f)) * alpha;
          for (int d = 0; d < dims; ++d) hidden_grad[d] += g * out[d];
          for (int d = 0; d < dims; ++d) out[d] += g * hidden[d];
        }
        for (int d = 0; d < dims; ++d) {
          if (!std::isfinite(hidden_grad[d])) {
            throw TrainingDiverged("CBoW diverged at update " +
                                   std::to_string(updates));
          }
        }
        for (std::int64_t c = lo; c <= hi; ++c) {
          if (c == pos) continue;
          auto v = input.mutable_row(doc[c]);
          for (int d = 0; d < dims; ++d) v[d] += hidden_grad[d];
        }
        ++updates;
        if (options.checkpoint_every > 0 && options.on_checkpoint &&
            updates % options.checkpoint_every == 0) {
          options.on_checkpoint(updates, input);
        }
      }
    }
  }
  if (!input.AllFinite()) {
    throw TrainingDiverged("CBoW produced non-finite vectors");
  }
  return input;
}

double CosineDistance(std::span<const float> x, std::span<const float> y) {
  return CosineDistanceImpl(x, y);
}

double CosineDistance(std::span<const double> x, std::span<const double> y) {
  return CosineDistanceImpl(x, y);
}

double CosineDistance(std::span<const double> x, std::span<const float> y) {
  return CosineDistanceImpl(x, y);
}

std::uint64_t Fingerprint(const EmbeddingMatrix& matrix) {
  std::string bytes;
  bytes.reserve(matrix.rows() * (8 + 4 * matrix.dims()) + 4);
  auto put = [&bytes](std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes.push_back(static_cast<char>(v >> (8 * i)));
  };
  put(static_cast<std::uint64_t>(matrix.dims()), 4);
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    put(static_cast<std::uint64_t>(matrix.id(r)), 8);
    for (float v : matrix.row(r)) put(std::bit_cast<std::uint32_t>(v), 4);
  }
  return tasteseq::Fingerprint(bytes);
}

void WriteEmbeddings(std::ostream& out, const EmbeddingMatrix& matrix) {
  out << matrix.rows() << ' ' << matrix.dims() << '\n';
  out << std::setprecision(9);
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    out << matrix.id(r);
    for (float v : matrix.row(r)) out << ' ' << v;
    out << '\n';
  }
}

EmbeddingMatrix ReadEmbeddings(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("embeddings: missing header");
  std::istringstream header(line);
  std::int64_t rows = -1;
  int dims = -1;
  if (!(header >> rows >> dims) || rows < 0 || dims < 1) {
    throw DataError("embeddings: bad header '" + line + "'");
  }
  std::vector<SongId> ids;
  std::vector<float> values;
  ids.reserve(rows);
  values.reserve(rows * dims);
  for (std::int64_t r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) {
      throw DataError("embeddings: expected " + std::to_string(rows) +
                      " rows, got " + std::to_string(r));
    }
    const char* p = line.c_str();
    char* end = nullptr;
    const long long id = std::strtoll(p, &end, 10);
    if (end == p) throw DataError("embeddings: bad id on row " + std::to_string(r));
    ids.push_back(id);
    p = end;
    for (int d = 0; d < dims; ++d) {
      const float v = std::strtof(p, &end);
      if (end == p) {
        throw DataError("embeddings: row " + std::to_string(r) +
                        " has fewer than " + std::to_string(dims) + " values");
      }
      values.push_back(v);
      p = end;
    }
    while (*p == ' ' || *p == '\r') ++p;
    if (*p != '\0') {
      throw DataError("embeddings: trailing data on row " + std::to_string(r));
    }
  }
  EmbeddingMatrix matrix(std::move(ids), dims);
  matrix.mutable_values() = std::move(values);
  return matrix;
}

}  // namespace tasteseq::embed
