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

#include "tasteseq/ann_index.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>

namespace tasteseq::ann {
namespace {

constexpr char kMagic[] = "TIDX1";
constexpr int kSplitAttempts = 8;

void Normalize(std::vector<double>& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
}

// Points as seen by the splitter: unit vectors for cosine, raw otherwise.
std::vector<double> SplitPoints(const embed::EmbeddingMatrix& emb,
                                Metric metric) {
  const std::size_t d = emb.dims();
  std::vector<double> points(emb.values().begin(), emb.values().end());
  if (metric == Metric::kCosine) {
    std::vector<double> row(d);
    for (std::size_t r = 0; r < emb.rows(); ++r) {
      std::copy_n(points.begin() + r * d, d, row.begin());
      Normalize(row);
      std::copy(row.begin(), row.end(), points.begin() + r * d);
    }
  }
  return points;
}

double Margin(const TreeNode& node, const double* x) {
  double m = node.offset;
  for (std::size_t i = 0; i < node.normal.size(); ++i) m += node.normal[i] * x[i];
  return m;
}

ProjectionTree BuildTree(const std::vector<double>& points, int dims,
                         std::int32_t n, int max_leaf, Rng& rng) {
  ProjectionTree tree;
  std::vector<std::int32_t> all(n);
  for (std::int32_t i = 0; i < n; ++i) all[i] = i;
  tree.nodes.emplace_back();
  std::vector<std::pair<std::int32_t, std::vector<std::int32_t>>> stack;
  stack.emplace_back(0, std::move(all));
  std::vector<double> normal(dims);
  while (!stack.empty()) {
    auto [at, items] = std::move(stack.back());
    stack.pop_back();
    if (static_cast<int>(items.size()) <= max_leaf) {
      tree.nodes[at].leaf = true;
      tree.nodes[at].items = std::move(items);
      continue;
    }
    TreeNode split;
    split.leaf = false;
    std::vector<std::int32_t> left, right;
    std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
    bool found = false;
    for (int attempt = 0; attempt < kSplitAttempts && !found; ++attempt) {
      const std::size_t i = pick(rng);
      std::size_t j = pick(rng);
      if (i == j) j = (j + 1) % items.size();
      const double* a = points.data() + static_cast<std::size_t>(items[i]) * dims;
      const double* b = points.data() + static_cast<std::size_t>(items[j]) * dims;
      for (int k = 0; k < dims; ++k) normal[k] = a[k] - b[k];
      Normalize(normal);
      double offset = 0.0;
      bool zero = true;
      for (int k = 0; k < dims; ++k) {
        offset -= normal[k] * 0.5 * (a[k] + b[k]);
        zero = zero && normal[k] == 0.0;
      }
      if (zero) continue;
      split.normal.assign(normal.begin(), normal.end());
      split.offset = static_cast<float>(offset);
      left.clear();
      right.clear();
      for (std::int32_t item : items) {
        const double* x = points.data() + static_cast<std::size_t>(item) * dims;
        (Margin(split, x) > 0.0 ? right : left).push_back(item);
      }
      found = !left.empty() && !right.empty();
    }
    if (!found) {
      // Random halves; a zero normal gives both children equal priority.
      split.normal.assign(dims, 0.0f);
      split.offset = 0.0f;
      std::shuffle(items.begin(), items.end(), rng);
      const std::size_t half = items.size() / 2;
      left.assign(items.begin(), items.begin() + half);
      right.assign(items.begin() + half, items.end());
      std::sort(left.begin(), left.end());
      std::sort(right.begin(), right.end());
    }
    split.left = static_cast<std::int32_t>(tree.nodes.size());
    split.right = split.left + 1;
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    stack.emplace_back(split.right, std::move(right));
    stack.emplace_back(split.left, std::move(left));
    tree.nodes[at] = std::move(split);
  }
  return tree;
}

void PutU(std::ostream& out, std::uint64_t v, int bytes) {
  char buf[8];
  for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, bytes);
}

std::uint64_t GetU(std::istream& in, int bytes, const char* what) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), bytes)) {
    throw DataError(std::string("index: truncated while reading ") + what);
  }
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void PutF(std::ostream& out, float f) {
  PutU(out, std::bit_cast<std::uint32_t>(f), 4);
}

float GetF(std::istream& in, const char* what) {
  return std::bit_cast<float>(static_cast<std::uint32_t>(GetU(in, 4, what)));
}

}  // namespace

double Distance(Metric metric, std::span<const double> q,
                std::span<const float> x) {
  if (metric == Metric::kCosine) return embed::CosineDistance(q, x);
  if (q.size() != x.size()) {
    throw std::invalid_argument("distance: dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double d = q[i] - x[i];
    s += d * d;
  }
  return std::sqrt(s);
}

IndexForest IndexForest::Build(const embed::EmbeddingMatrix& embeddings,
                               const IndexOptions& options,
                               std::uint64_t seed) {
  if (embeddings.rows() == 0 || embeddings.dims() < 1) {
    throw std::invalid_argument("index: empty embedding matrix");
  }
  if (embeddings.rows() >
      static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
    throw std::invalid_argument("index: too many items");
  }
  if (options.num_trees < 1 || options.max_leaf_size < 1) {
    throw std::invalid_argument("index: num_trees and max_leaf_size must be >= 1");
  }
  IndexForest forest;
  forest.embeddings_ = embeddings;
  forest.metric_ = options.metric;
  forest.max_leaf_size_ = options.max_leaf_size;
  forest.fingerprint_ = embed::Fingerprint(embeddings);
  const auto points = SplitPoints(embeddings, options.metric);
  for (int t = 0; t < options.num_trees; ++t) {
    Rng rng(DeriveSeed(seed, static_cast<std::uint64_t>(t) + 1));
    forest.trees_.push_back(
        BuildTree(points, embeddings.dims(),
                  static_cast<std::int32_t>(embeddings.rows()),
                  options.max_leaf_size, rng));
  }
  return forest;
}

QueryResult IndexForest::Query(std::span<const float> q, int k,
                               std::int64_t search_k,
                               const std::unordered_set<SongId>& exclude) const {
  std::vector<double> qd(q.begin(), q.end());
  return Query(std::span<const double>(qd), k, search_k, exclude);
}

QueryResult IndexForest::Query(std::span<const double> q, int k,
                               std::int64_t search_k,
                               const std::unordered_set<SongId>& exclude) const {
  if (static_cast<int>(q.size()) != embeddings_.dims()) {
    throw std::invalid_argument("query: dimension mismatch");
  }
  if (k < 1) throw std::invalid_argument("query: k must be >= 1");
  if (search_k < 1) throw std::invalid_argument("query: search_k must be >= 1");
  std::vector<double> probe(q.begin(), q.end());
  if (metric_ == Metric::kCosine) Normalize(probe);

  using Entry = std::tuple<double, std::int32_t, std::int32_t>;
  std::priority_queue<Entry> frontier;
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    frontier.emplace(inf, -static_cast<std::int32_t>(t), 0);
  }
  std::vector<char> seen(embeddings_.rows(), 0);
  std::vector<std::int32_t> candidates;
  std::int64_t popped = 0;
  while (!frontier.empty() && popped < search_k) {
    const auto [priority, neg_tree, at] = frontier.top();
    frontier.pop();
    ++popped;
    const TreeNode& node = trees_[-neg_tree].nodes[at];
    if (node.leaf) {
      for (std::int32_t item : node.items) {
        if (!seen[item]) {
          seen[item] = 1;
          candidates.push_back(item);
        }
      }
      continue;
    }
    const double m = Margin(node, probe.data());
    frontier.emplace(std::min(priority, m), neg_tree, node.right);
    frontier.emplace(std::min(priority, -m), neg_tree, node.left);
  }

  QueryResult result;
  result.reserve(candidates.size());
  for (std::int32_t item : candidates) {
    const SongId id = embeddings_.id(item);
    if (exclude.contains(id)) continue;
    result.push_back({id, Distance(metric_, q, embeddings_.row(item))});
  }
  auto order = [](const Neighbor& a, const Neighbor& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
  };
  if (static_cast<std::size_t>(k) < result.size()) {
    std::partial_sort(result.begin(), result.begin() + k, result.end(), order);
    result.resize(k);
  } else {
    std::sort(result.begin(), result.end(), order);
  }
  return result;
}

QueryResult ExactKnn(const embed::EmbeddingMatrix& embeddings,
                     std::span<const double> q, int k,
                     const std::unordered_set<SongId>& exclude,
                     Metric metric) {
  if (static_cast<int>(q.size()) != embeddings.dims()) {
    throw std::invalid_argument("exact knn: dimension mismatch");
  }
  if (k < 1) throw std::invalid_argument("exact knn: k must be >= 1");
  QueryResult result;
  result.reserve(embeddings.rows());
  for (std::size_t r = 0; r < embeddings.rows(); ++r) {
    const SongId id = embeddings.id(r);
    if (exclude.contains(id)) continue;
    result.push_back({id, Distance(metric, q, embeddings.row(r))});
  }
  auto order = [](const Neighbor& a, const Neighbor& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
  };
  std::sort(result.begin(), result.end(), order);
  if (static_cast<std::size_t>(k) < result.size()) result.resize(k);
  return result;
}

void WriteIndex(std::ostream& out, const IndexForest& forest) {
  const auto& emb = forest.embeddings();
  out.write(kMagic, 5);
  PutU(out, static_cast<std::uint8_t>(forest.metric()), 1);
  PutU(out, forest.fingerprint(), 8);
  PutU(out, static_cast<std::uint64_t>(emb.dims()), 4);
  PutU(out, emb.rows(), 8);
  PutU(out, static_cast<std::uint64_t>(forest.max_leaf_size()), 4);
  PutU(out, forest.trees().size(), 4);
  for (const auto& tree : forest.trees()) {
    PutU(out, tree.nodes.size(), 4);
    for (const auto& node : tree.nodes) {
      if (node.leaf) {
        PutU(out, 0, 1);
        PutU(out, node.items.size(), 4);
        for (std::int32_t item : node.items) {
          PutU(out, static_cast<std::uint64_t>(emb.id(item)), 8);
        }
      } else {
        PutU(out, 1, 1);
        for (float f : node.normal) PutF(out, f);
        PutF(out, node.offset);
        PutU(out, static_cast<std::uint32_t>(node.left), 4);
        PutU(out, static_cast<std::uint32_t>(node.right), 4);
      }
    }
  }
}

IndexForest ReadIndex(std::istream& in,
                      const embed::EmbeddingMatrix& embeddings) {
  char magic[5];
  if (!in.read(magic, 5) || std::string(magic, 5) != kMagic) {
    throw DataError("index: bad magic");
  }
  const auto metric = GetU(in, 1, "metric");
  if (metric > 1) throw DataError("index: unknown metric " + std::to_string(metric));
  const std::uint64_t fingerprint = GetU(in, 8, "fingerprint");
  const auto dims = GetU(in, 4, "dims");
  const auto rows = GetU(in, 8, "item count");
  if (fingerprint != embed::Fingerprint(embeddings) ||
      dims != static_cast<std::uint64_t>(embeddings.dims()) ||
      rows != embeddings.rows()) {
    throw DataError("index: built from different embeddings (fingerprint " +
                    FingerprintHex(fingerprint) + ")");
  }
  IndexForest forest;
  forest.embeddings_ = embeddings;
  forest.metric_ = static_cast<Metric>(metric);
  forest.fingerprint_ = fingerprint;
  forest.max_leaf_size_ = static_cast<int>(GetU(in, 4, "max leaf size"));
  const auto num_trees = GetU(in, 4, "tree count");
  for (std::uint64_t t = 0; t < num_trees; ++t) {
    const auto count = GetU(in, 4, "node count");
    if (count == 0) throw DataError("index: empty tree");
    ProjectionTree tree;
    for (std::uint64_t i = 0; i < count; ++i) {
      TreeNode node;
      const auto type = GetU(in, 1, "node type");
      if (type == 0) {
        const auto size = GetU(in, 4, "leaf size");
        if (size > rows) throw DataError("index: oversized leaf");
        for (std::uint64_t j = 0; j < size; ++j) {
          const auto id = static_cast<SongId>(GetU(in, 8, "leaf id"));
          const std::int64_t r = embeddings.RowOf(id);
          if (r < 0) throw DataError("index: unknown song " + std::to_string(id));
          node.items.push_back(static_cast<std::int32_t>(r));
        }
      } else if (type == 1) {
        node.leaf = false;
        node.normal.resize(dims);
        for (auto& f : node.normal) f = GetF(in, "normal");
        node.offset = GetF(in, "offset");
        const auto left = GetU(in, 4, "child");
        const auto right = GetU(in, 4, "child");
        if (left >= count || right >= count || left <= i || right <= i) {
          throw DataError("index: bad child offset");
        }
        node.left = static_cast<std::int32_t>(left);
        node.right = static_cast<std::int32_t>(right);
      } else {
        throw DataError("index: bad node type");
      }
      tree.nodes.push_back(std::move(node));
    }
    forest.trees_.push_back(std::move(tree));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError("index: trailing bytes");
  }
  return forest;
}

}  // namespace tasteseq::ann
