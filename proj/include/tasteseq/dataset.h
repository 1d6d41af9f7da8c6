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

#ifndef TASTESEQ_DATASET_H_
#define TASTESEQ_DATASET_H_

// Train/validation/test chunk sets built from playlists or histories.

#include <vector>

#include "tasteseq/corpus.h"
#include "tasteseq/embeddings.h"

namespace tasteseq {

struct Dataset {
  std::vector<corpus::TrainSequence> train;
  std::vector<corpus::TrainSequence> valid;
  std::vector<corpus::TrainSequence> test;
};

// Drops plays of songs without a vector, cuts each history into filtered
// 100 + 50 chunks and splits by user id.
Dataset HistoryDataset(const std::vector<corpus::ListeningHistory>& histories,
                       const corpus::Catalog& catalog,
                       const embed::EmbeddingMatrix& embeddings);

// Drops songs without a vector, cuts 60 + 50 chunks and splits by playlist
// index.
Dataset PlaylistDataset(const std::vector<corpus::Playlist>& playlists,
                        const embed::EmbeddingMatrix& embeddings);

}  // namespace tasteseq

#endif  // TASTESEQ_DATASET_H_
