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

#ifndef TASTESEQ_CORPUS_H_
#define TASTESEQ_CORPUS_H_

// Synthetic catalogs, playlists and listening histories, plus the corpus
// filtering and training-chunk extraction rules.

#include <bitset>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tasteseq/common.h"

namespace tasteseq::corpus {

struct Song {
  SongId id = 0;
  std::int32_t artist_id = 0;
  std::int32_t album_id = 0;
  std::int32_t genre_id = 0;
  std::int32_t popularity_rank = 0;  // 1 = most popular

  bool operator==(const Song&) const = default;
};

class Catalog {
 public:
  Catalog() = default;
  // Throws DataError on duplicate ids or an album shared by two artists.
  explicit Catalog(std::vector<Song> songs);

  const std::vector<Song>& songs() const { return songs_; }
  std::size_t size() const { return songs_.size(); }
  bool empty() const { return songs_.empty(); }
  int num_genres() const { return num_genres_; }

  // nullptr when the id is unknown.
  const Song* Find(SongId id) const;
  const Song& Get(SongId id) const;

 private:
  std::vector<Song> songs_;
  std::unordered_map<SongId, std::size_t> index_;
  int num_genres_ = 0;
};

struct Playlist {
  std::vector<SongId> songs;

  bool operator==(const Playlist&) const = default;
};

enum class PlayContext : std::uint8_t {
  kCollection = 0,
  kLibrary,
  kRadio,
  kOwnPlaylist,
  kSharedPlaylist,
  kCuratedPlaylist,
  kSearch,
  kBrowse,
  kArtist,
  kAlbum,
  kChart,
  kTrack,
  kClicked,
  kUnknown,
};
inline constexpr int kNumPlayContexts = 14;

std::string_view ContextName(PlayContext context);
std::optional<PlayContext> ParseContext(std::string_view name);

using ContextSet = std::bitset<kNumPlayContexts>;

struct ListeningEvent {
  SongId song_id = 0;
  std::int64_t timestamp = 0;  // seconds since epoch
  ContextSet contexts;

  bool operator==(const ListeningEvent&) const = default;
};

struct ListeningHistory {
  std::int64_t user_id = 0;
  std::vector<ListeningEvent> events;

  bool operator==(const ListeningHistory&) const = default;
};

struct TrainSequence {
  std::int64_t source_id = 0;  // playlist index or user id
  std::vector<SongId> input;
  std::vector<SongId> targets;
  // Events parallel to `input`; empty for playlist chunks.
  std::vector<ListeningEvent> context_inputs;
};

// ---------------------------------------------------------------------------
// Generators. All of them are pure functions of their arguments and seed.

Catalog GenerateCatalog(int num_songs, int num_artists, int num_genres,
                        std::uint64_t seed);

// Song choice within a genre is weighted by rank^-popularity_exponent.
inline constexpr double kDefaultPopularityExponent = 0.8;

struct PlaylistOptions {
  int count = 1000;
  int min_length = 11;
  int max_length = 200;
  double genre_coherence = 0.9;
  double popularity_exponent = kDefaultPopularityExponent;
};

// Genre-sticky random walk: with probability genre_coherence the next song
// shares the current genre, otherwise a genre is redrawn by genre weight.
std::vector<Playlist> GeneratePlaylists(const Catalog& catalog,
                                        const PlaylistOptions& options,
                                        std::uint64_t seed);

struct HistoryOptions {
  int num_users = 100;
  int length = 450;
  // Mean length of a fixation run. A mean of at least `length` gives one run.
  double fixation_mean = 21.0;
  // On a switch the user returns to their home genre with this probability,
  // to one of their secondary genres with `secondary_prob`, and explores a
  // random genre otherwise.
  double home_prob = 0.45;
  double secondary_prob = 0.35;
  int num_secondary = 2;
  // Probability of replaying a song heard in the recent past.
  double repeat_prob = 0.02;
  // Artists heard within this many events are avoided when drawing a fresh
  // song.
  int artist_memory = 150;
  double popularity_exponent = kDefaultPopularityExponent;
  std::int64_t start_time = 1451606400;  // 2016-01-01
};

std::vector<ListeningHistory> GenerateHistories(const Catalog& catalog,
                                                const HistoryOptions& options,
                                                std::uint64_t seed);

// ---------------------------------------------------------------------------
// Filtering and chunking.

// Removes songs ranked below top_n (and unknown ids), then drops playlists
// that are not strictly between 10 and 5000 songs long or have fewer than
// three distinct artists or albums.
std::vector<Playlist> FilterPlaylists(const std::vector<Playlist>& playlists,
                                      const Catalog& catalog, int top_n);

inline constexpr int kPlaylistInputLength = 60;
inline constexpr int kHistoryInputLength = 100;
inline constexpr int kTargetLength = 50;

// Non-overlapping windows of input_length + target_length songs.
std::vector<TrainSequence> ExtractPlaylistChunks(
    const Playlist& playlist, std::int64_t source_id,
    int input_length = kPlaylistInputLength,
    int target_length = kTargetLength);

// Non-overlapping windows whose targets pass the four easy-prediction rules:
// targets unique, targets absent from the input, target artists unique, and
// target artists absent from the input artists. The input is left untouched.
std::vector<TrainSequence> ExtractHistoryChunks(
    const ListeningHistory& history, const Catalog& catalog,
    int input_length = kHistoryInputLength,
    int target_length = kTargetLength);

// Removes events whose song fails `keep` (e.g. songs without a vector).
template <typename Pred>
ListeningHistory DropEvents(const ListeningHistory& history, Pred keep) {
  ListeningHistory out{history.user_id, {}};
  out.events.reserve(history.events.size());
  for (const auto& e : history.events) {
    if (keep(e.song_id)) out.events.push_back(e);
  }
  return out;
}

// Deterministic split by key: bucket = key % 10; 0 -> test, 1 -> validation.
enum class Split { kTrain, kValidation, kTest };
Split SplitOf(std::int64_t key);

// ---------------------------------------------------------------------------
// TSV files: no header, tab separated, LF line endings.

void WriteCatalog(std::ostream& out, const Catalog& catalog);
Catalog ReadCatalog(std::istream& in);

void WritePlaylists(std::ostream& out, const std::vector<Playlist>& playlists);
std::vector<Playlist> ReadPlaylists(std::istream& in);

void WriteHistories(std::ostream& out,
                    const std::vector<ListeningHistory>& histories);
std::vector<ListeningHistory> ReadHistories(std::istream& in);

}  // namespace tasteseq::corpus

#endif  // TASTESEQ_CORPUS_H_
