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

#ifndef TASTESEQ_ANN_INDEX_H_
#define TASTESEQ_ANN_INDEX_H_

// Forest of random-projection trees for approximate nearest-neighbour
// search over song vectors, plus an exact linear-scan oracle.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <unordered_set>
#include <vector>

#include "tasteseq/common.h"
#include "tasteseq/embeddings.h"

namespace tasteseq::ann {

enum class Metric : std::uint8_t { kCosine = 0, kEuclidean = 1 };

struct Neighbor {
  SongId id = 0;
  double distance = 0.0;
  bool operator==(const Neighbor&) const = default;
};

// Ascending by distance, ties by lower id.
using QueryResult = std::vector<Neighbor>;

struct IndexOptions {
  int num_trees = 10;
  int max_leaf_size = 16;
  Metric metric = Metric::kCosine;
};

inline constexpr std::int64_t kDefaultSearchK = 10000;

// Split nodes hold a unit normal and offset: a point x goes right when
// normal . x + offset > 0. Leaves hold embedding row indices.
struct TreeNode {
  bool leaf = true;
  std::vector<float> normal;
  float offset = 0.0f;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::vector<std::int32_t> items;
  bool operator==(const TreeNode&) const = default;
};

struct ProjectionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  bool operator==(const ProjectionTree&) const = default;
};

double Distance(Metric metric, std::span<const double> q,
                std::span<const float> x);

class IndexForest {
 public:
  // Throws std::invalid_argument on an empty matrix or bad options.
  static IndexForest Build(const embed::EmbeddingMatrix& embeddings,
                           const IndexOptions& options, std::uint64_t seed);

  // Pops up to search_k nodes from a frontier shared by all trees, then
  // ranks the union of reached leaves exactly. Throws std::invalid_argument
  // on a dimension mismatch, k < 1 or search_k < 1.
  QueryResult Query(std::span<const double> q, int k,
                    std::int64_t search_k = kDefaultSearchK,
                    const std::unordered_set<SongId>& exclude = {}) const;
  QueryResult Query(std::span<const float> q, int k,
                    std::int64_t search_k = kDefaultSearchK,
                    const std::unordered_set<SongId>& exclude = {}) const;

  const embed::EmbeddingMatrix& embeddings() const { return embeddings_; }
  const std::vector<ProjectionTree>& trees() const { return trees_; }
  Metric metric() const { return metric_; }
  int max_leaf_size() const { return max_leaf_size_; }
  std::uint64_t fingerprint() const { return fingerprint_; }

 private:
  friend IndexForest ReadIndex(std::istream&, const embed::EmbeddingMatrix&);

  embed::EmbeddingMatrix embeddings_;
  std::vector<ProjectionTree> trees_;
  Metric metric_ = Metric::kCosine;
  int max_leaf_size_ = 16;
  std::uint64_t fingerprint_ = 0;
};

QueryResult ExactKnn(const embed::EmbeddingMatrix& embeddings,
                     std::span<const double> q, int k,
                     const std::unordered_set<SongId>& exclude = {},
                     Metric metric = Metric::kCosine);

// Binary: "TIDX1", metric byte, u64 embedding fingerprint, u32 dims,
// u64 item count, u32 max leaf size, u32 tree count; per tree a u32 node
// count and node records. Little-endian throughout; leaves store song ids.
void WriteIndex(std::ostream& out, const IndexForest& forest);
// Throws DataError on corruption or when `embeddings` is not the matrix
// the index was built from.
IndexForest ReadIndex(std::istream& in,
                      const embed::EmbeddingMatrix& embeddings);

}  // namespace tasteseq::ann

#endif  // TASTESEQ_ANN_INDEX_H_
