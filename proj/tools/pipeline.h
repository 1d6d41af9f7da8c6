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

#ifndef TASTESEQ_TOOLS_PIPELINE_H_
#define TASTESEQ_TOOLS_PIPELINE_H_

// Pipeline steps behind the tasteseq command. Every step reads its inputs
// from, and writes its artifacts to, one working directory:
//
//   data/catalog.tsv data/playlists.tsv data/histories.tsv  gen-data
//   data/playlists.filtered.tsv                             filter
//   embeddings.txt                                          train-embeddings
//   models/<name>.{model,weights,classifier,loss.tsv}       train-model/-baseline
//   index.tidx                                              build-index
//   reports/*                                               evaluate, stats
//   manifest.json   settings and embedding fingerprint of every trained artifact

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace tasteseq::cli {

// Bad option values or combinations.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PipelineConfig {
  std::filesystem::path dir = ".";
  std::uint64_t seed = 1;

  // gen-data
  int songs = 10000;
  int artists = 4000;
  int genres = 20;
  int playlists = 20000;
  int users = 5000;
  int history_length = 450;
  double fixation_mean = 21.0;

  // filter / train-embeddings; 0 keeps every catalog song
  int top_n = 0;
  int dims = 40;
  int window = 5;
  int negatives = 5;
  int cbow_epochs = 1;

  // train-model
  std::string variant = "rHST";
  int l_min = 0;  // 0: the variant's default range
  int l_max = 0;
  int d_hid = 50;
  int layers = 2;
  int dense = 200;
  std::string cell = "gru";
  std::string loss = "l2";
  bool context = false;
  int epochs = 10;
  double learning_rate = 1e-3;
  int batch_size = 32;

  // train-baseline
  std::string baseline = "weights";  // weights, ce, bpr
  std::string term = "short";
  double lambda = 0.001;
  int bpr_negatives = 100;

  // build-index
  int trees = 10;
  int max_leaf = 16;
  std::int64_t search_k = 10000;

  // recommend / evaluate
  std::string model = "rHST";
  std::filesystem::path history;
  std::int64_t user = -1;  // -1: first user in the file
  int k = 10;
  bool exclude_heard = true;
  std::vector<double> gammas = {0.97, 1.0};
};

void GenData(const PipelineConfig& config, std::ostream& out);
void Filter(const PipelineConfig& config, std::ostream& out);
void TrainEmbeddings(const PipelineConfig& config, std::ostream& out);
void TrainModel(const PipelineConfig& config, std::ostream& out);
void TrainBaseline(const PipelineConfig& config, std::ostream& out);
void BuildIndex(const PipelineConfig& config, std::ostream& out);
// Writes "song_id  distance" (or "song_id  score" for classifiers) lines.
void Recommend(const PipelineConfig& config, std::ostream& out);
void Evaluate(const PipelineConfig& config, std::ostream& out);
void Stats(const PipelineConfig& config, std::ostream& out);
// Retrains embeddings, then every recorded model, then the index.
void Refresh(const PipelineConfig& config, std::ostream& out);

}  // namespace tasteseq::cli

#endif  // TASTESEQ_TOOLS_PIPELINE_H_
