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

#include "tasteseq/dataset.h"

namespace tasteseq {
namespace {

void Place(corpus::Split split, std::vector<corpus::TrainSequence> chunks,
           Dataset* out) {
  auto& dest = split == corpus::Split::kTest         ? out->test
               : split == corpus::Split::kValidation ? out->valid
                                                     : out->train;
  for (auto& c : chunks) dest.push_back(std::move(c));
}

}  // namespace

Dataset HistoryDataset(const std::vector<corpus::ListeningHistory>& histories,
                       const corpus::Catalog& catalog,
                       const embed::EmbeddingMatrix& embeddings) {
  Dataset out;
  for (const auto& h : histories) {
    const auto kept = corpus::DropEvents(
        h, [&](SongId id) { return embeddings.Contains(id); });
    Place(corpus::SplitOf(h.user_id), corpus::ExtractHistoryChunks(kept, catalog),
          &out);
  }
  return out;
}

Dataset PlaylistDataset(const std::vector<corpus::Playlist>& playlists,
                        const embed::EmbeddingMatrix& embeddings) {
  Dataset out;
  for (std::size_t i = 0; i < playlists.size(); ++i) {
    corpus::Playlist kept;
    for (SongId id : playlists[i].songs) {
      if (embeddings.Contains(id)) kept.songs.push_back(id);
    }
    Place(corpus::SplitOf(static_cast<std::int64_t>(i)),
          corpus::ExtractPlaylistChunks(kept, static_cast<std::int64_t>(i)),
          &out);
  }
  return out;
}

}  // namespace tasteseq
