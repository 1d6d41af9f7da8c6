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

#ifndef TASTESEQ_EMBEDDINGS_H_
#define TASTESEQ_EMBEDDINGS_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

#include "tasteseq/common.h"
#include "tasteseq/corpus.h"

namespace tasteseq::embed {

// Contiguous indices over the retained songs, ordered by popularity rank so
// that index 0 is the most popular song.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<SongId> ids, std::vector<std::int64_t> counts);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  SongId id(std::size_t index) const { return ids_[index]; }
  const std::vector<SongId>& ids() const { return ids_; }
  std::int64_t count(std::size_t index) const { return counts_[index]; }
  const std::vector<std::int64_t>& counts() const { return counts_; }
  // -1 when absent.
  std::int64_t IndexOf(SongId id) const;
  bool Contains(SongId id) const { return IndexOf(id) >= 0; }

 private:
  std::vector<SongId> ids_;
  std::vector<std::int64_t> counts_;
  std::unordered_map<SongId, std::int64_t> index_;
};

// Songs occurring in `playlists`, truncated to the top_n by catalog rank.
// Songs missing from the catalog are ignored.
Vocabulary BuildVocabulary(const std::vector<corpus::Playlist>& playlists,
                           const corpus::Catalog& catalog, int top_n);

// N x D row-major float matrix with one row per song id.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::vector<SongId> ids, int dims);

  std::size_t rows() const { return ids_.size(); }
  int dims() const { return dims_; }
  const std::vector<SongId>& ids() const { return ids_; }
  SongId id(std::size_t row) const { return ids_[row]; }
  std::int64_t RowOf(SongId id) const;  // -1 when absent
  bool Contains(SongId id) const { return RowOf(id) >= 0; }

  std::span<const float> row(std::size_t r) const {
    return {values_.data() + r * dims_, static_cast<std::size_t>(dims_)};
  }
  std::span<float> mutable_row(std::size_t r) {
    return {values_.data() + r * dims_, static_cast<std::size_t>(dims_)};
  }
  std::span<const float> Vector(SongId id) const;

  const std::vector<float>& values() const { return values_; }
  std::vector<float>& mutable_values() { return values_; }
  bool AllFinite() const;

  bool operator==(const EmbeddingMatrix& other) const {
    return dims_ == other.dims_ && ids_ == other.ids_ &&
           values_ == other.values_;
  }

 private:
  std::vector<SongId> ids_;
  std::unordered_map<SongId, std::int64_t> rows_;
  int dims_ = 0;
  std::vector<float> values_;
};

struct CbowOptions {
  int dims = 40;
  int window = 5;
  int negatives = 5;
  double start_learning_rate = 0.025;
  double end_learning_rate = 0.0001;
  int epochs = 1;
  // Invoked every `checkpoint_every` updates with the input table.
  int checkpoint_every = 0;
  std::function<void(std::int64_t, const EmbeddingMatrix&)> on_checkpoint;
};

// CBoW with negative sampling; single threaded and deterministic. Context
// vectors inside the window are averaged, the centre song is contrasted
// against `negatives` songs drawn from unigram^0.75, and the input table is
// returned. Throws TrainingDiverged on a non-finite update.
EmbeddingMatrix TrainCbow(const std::vector<corpus::Playlist>& playlists,
                          const Vocabulary& vocab, const CbowOptions& options,
                          std::uint64_t seed);

// 1 - x.y / (|x| |y|). Throws std::invalid_argument on a size mismatch or a
// zero-norm input.
double CosineDistance(std::span<const float> x, std::span<const float> y);
double CosineDistance(std::span<const double> x, std::span<const double> y);
double CosineDistance(std::span<const double> x, std::span<const float> y);

// FNV-1a over the ids, dims and float bit patterns.
std::uint64_t Fingerprint(const EmbeddingMatrix& matrix);

// Text format: "N D" then one "song_id v1 .. vD" line per row, 9 significant
// digits so that floats round-trip exactly.
void WriteEmbeddings(std::ostream& out, const EmbeddingMatrix& matrix);
EmbeddingMatrix ReadEmbeddings(std::istream& in);

}  // namespace tasteseq::embed

#endif  // TASTESEQ_EMBEDDINGS_H_
