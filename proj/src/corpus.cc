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

#include "tasteseq/corpus.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace tasteseq::corpus {
namespace {

constexpr std::array<std::string_view, kNumPlayContexts> kContextNames = {
    "collection", "library", "radio",  "own_playlist", "shared_playlist",
    "curated_playlist", "search", "browse", "artist", "album",
    "chart", "track", "clicked", "unknown"};

// Per-genre popularity-weighted song pools over catalog indices.
class GenrePools {
 public:
  GenrePools(const Catalog& catalog, double popularity_exponent) {
    const int num_genres = catalog.num_genres();
    members_.resize(num_genres);
    std::vector<std::vector<double>> weights(num_genres);
    std::vector<double> genre_weight(num_genres, 0.0);
    const auto& songs = catalog.songs();
    for (std::size_t i = 0; i < songs.size(); ++i) {
      const double w =
          std::pow(static_cast<double>(songs[i].popularity_rank),
                   -popularity_exponent);
      members_[songs[i].genre_id].push_back(i);
      weights[songs[i].genre_id].push_back(w);
      genre_weight[songs[i].genre_id] += w;
    }
    for (int g = 0; g < num_genres; ++g) {
      if (weights[g].empty()) {
        // Keeps the distribution well-formed; the genre has zero weight.
        weights[g].push_back(1.0);
        genre_weight[g] = 0.0;
      }
      within_.emplace_back(weights[g].begin(), weights[g].end());
    }
    genres_ = std::discrete_distribution<int>(genre_weight.begin(),
                                              genre_weight.end());
  }

  int num_genres() const { return static_cast<int>(members_.size()); }
  int DrawGenre(Rng& rng) { return genres_(rng); }
  std::size_t DrawSong(int genre, Rng& rng) {
    return members_[genre][within_[genre](rng)];
  }

 private:
  std::vector<std::vector<std::size_t>> members_;
  std::vector<std::discrete_distribution<int>> within_;
  std::discrete_distribution<int> genres_;
};

// Splits on `sep`, keeping empty fields.
std::vector<std::string_view> SplitFields(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::int64_t ParseInt(std::string_view field, int line_no) {
  std::int64_t value = 0;
  std::size_t used = 0;
  try {
    value = std::stoll(std::string(field), &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != field.size()) {
    throw DataError("line " + std::to_string(line_no) + ": bad integer '" +
                    std::string(field) + "'");
  }
  return value;
}

}  // namespace

std::string_view ContextName(PlayContext context) {
  return kContextNames.at(static_cast<std::size_t>(context));
}

std::optional<PlayContext> ParseContext(std::string_view name) {
  for (std::size_t i = 0; i < kContextNames.size(); ++i) {
    if (kContextNames[i] == name) return static_cast<PlayContext>(i);
  }
  return std::nullopt;
}

Catalog::Catalog(std::vector<Song> songs) : songs_(std::move(songs)) {
  std::unordered_map<std::int32_t, std::int32_t> album_artist;
  for (std::size_t i = 0; i < songs_.size(); ++i) {
    const Song& s = songs_[i];
    if (!index_.emplace(s.id, i).second) {
      throw DataError("duplicate song id " + std::to_string(s.id));
    }
    auto [it, inserted] = album_artist.emplace(s.album_id, s.artist_id);
    if (!inserted && it->second != s.artist_id) {
      throw DataError("album " + std::to_string(s.album_id) +
                      " maps to more than one artist");
    }
    if (s.genre_id < 0) throw DataError("negative genre id");
    num_genres_ = std::max(num_genres_, s.genre_id + 1);
  }
}

const Song* Catalog::Find(SongId id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &songs_[it->second];
}

const Song& Catalog::Get(SongId id) const {
  const Song* s = Find(id);
  if (s == nullptr) {
    throw std::invalid_argument("unknown song id " + std::to_string(id));
  }
  return *s;
}

Catalog GenerateCatalog(int num_songs, int num_artists, int num_genres,
                        std::uint64_t seed) {
  if (num_songs < 1 || num_artists < 1 || num_genres < 1) {
    throw std::invalid_argument("catalog sizes must be positive");
  }
  if (num_songs < num_artists || num_artists < num_genres) {
    throw std::invalid_argument(
        "need num_songs >= num_artists >= num_genres");
  }
  Rng rng(seed);

  // Every genre gets an artist and every artist gets a song.
  std::vector<std::int32_t> artist_genre(num_artists);
  std::uniform_int_distribution<std::int32_t> any_genre(0, num_genres - 1);
  for (int a = 0; a < num_artists; ++a) {
    artist_genre[a] = a < num_genres ? a : any_genre(rng);
  }
  std::vector<std::int32_t> song_artist(num_songs);
  std::uniform_int_distribution<std::int32_t> any_artist(0, num_artists - 1);
  for (int i = 0; i < num_songs; ++i) {
    song_artist[i] = i < num_artists ? i : any_artist(rng);
  }
  std::shuffle(song_artist.begin(), song_artist.end(), rng);

  std::vector<std::int32_t> ranks(num_songs);
  std::iota(ranks.begin(), ranks.end(), 1);
  std::shuffle(ranks.begin(), ranks.end(), rng);

  // Albums: consecutive songs of an artist (in id order) grouped in runs.
  std::vector<std::vector<int>> by_artist(num_artists);
  for (int i = 0; i < num_songs; ++i) by_artist[song_artist[i]].push_back(i);
  std::vector<std::int32_t> song_album(num_songs);
  std::uniform_int_distribution<int> album_size(1, 12);
  std::int32_t next_album = 0;
  for (const auto& songs : by_artist) {
    std::size_t pos = 0;
    while (pos < songs.size()) {
      const std::size_t len = static_cast<std::size_t>(album_size(rng));
      for (std::size_t k = pos; k < std::min(songs.size(), pos + len); ++k) {
        song_album[songs[k]] = next_album;
      }
      ++next_album;
      pos += len;
    }
  }

  std::vector<Song> songs(num_songs);
  for (int i = 0; i < num_songs; ++i) {
    songs[i] = Song{i + 1, song_artist[i], song_album[i],
                    artist_genre[song_artist[i]], ranks[i]};
  }
  return Catalog(std::move(songs));
}

std::vector<Playlist> GeneratePlaylists(const Catalog& catalog,
                                        const PlaylistOptions& options,
                                        std::uint64_t seed) {
  if (catalog.empty()) throw std::invalid_argument("empty catalog");
  if (options.genre_coherence < 0.0 || options.genre_coherence > 1.0) {
    throw std::invalid_argument("genre_coherence must be in [0, 1]");
  }
  if (options.count < 0 || options.min_length < 1 ||
      options.max_length < options.min_length) {
    throw std::invalid_argument("bad playlist length range");
  }
  GenrePools pools(catalog, options.popularity_exponent);
  const auto& songs = catalog.songs();
  std::vector<Playlist> playlists(options.count);
  for (int p = 0; p < options.count; ++p) {
    Rng rng(DeriveSeed(seed, static_cast<std::uint64_t>(p)));
    std::uniform_int_distribution<int> length_dist(options.min_length,
                                                   options.max_length);
    std::bernoulli_distribution stay(options.genre_coherence);
    const int length = length_dist(rng);
    std::unordered_set<std::size_t> used;
    auto& out = playlists[p].songs;
    out.reserve(length);
    int genre = pools.DrawGenre(rng);
    for (int pos = 0; pos < length; ++pos) {
      if (pos > 0 && !stay(rng)) genre = pools.DrawGenre(rng);
      std::size_t pick = pools.DrawSong(genre, rng);
      for (int attempt = 0; attempt < 10 && used.count(pick); ++attempt) {
        pick = pools.DrawSong(genre, rng);
      }
      used.insert(pick);
      out.push_back(songs[pick].id);
    }
  }
  return playlists;
}

std::vector<ListeningHistory> GenerateHistories(const Catalog& catalog,
                                                const HistoryOptions& options,
                                                std::uint64_t seed) {
  if (catalog.empty()) throw std::invalid_argument("empty catalog");
  if (options.length < kHistoryInputLength + kTargetLength) {
    throw std::invalid_argument("history length must be at least 150");
  }
  if (options.num_users < 0 || options.fixation_mean < 1.0) {
    throw std::invalid_argument("bad history options");
  }
  GenrePools pools(catalog, options.popularity_exponent);
  const auto& songs = catalog.songs();
  const int num_genres = pools.num_genres();
  const bool single_run = options.fixation_mean >= options.length;

  // Contexts other than `clicked` and `unknown` act as the play source.
  std::discrete_distribution<int> source_dist(
      {6, 8, 10, 9, 4, 8, 5, 3, 6, 7, 2, 3});

  std::vector<ListeningHistory> histories(options.num_users);
  for (int u = 0; u < options.num_users; ++u) {
    Rng rng(DeriveSeed(seed, static_cast<std::uint64_t>(u)));
    ListeningHistory& history = histories[u];
    history.user_id = u;
    history.events.reserve(options.length);

    const int home = pools.DrawGenre(rng);
    std::vector<int> secondary;
    for (int attempt = 0;
         attempt < 100 && static_cast<int>(secondary.size()) <
                              std::min(options.num_secondary, num_genres - 1);
         ++attempt) {
      const int g = pools.DrawGenre(rng);
      if (g != home &&
          std::find(secondary.begin(), secondary.end(), g) == secondary.end()) {
        secondary.push_back(g);
      }
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto pick_genre = [&]() {
      const double x = unit(rng);
      if (x < options.home_prob) return home;
      if (x < options.home_prob + options.secondary_prob && !secondary.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0,
                                                        secondary.size() - 1);
        return secondary[pick(rng)];
      }
      return pools.DrawGenre(rng);
    };
    std::geometric_distribution<int> extra_length(
        1.0 / std::max(1.0, options.fixation_mean));
    std::bernoulli_distribution repeat(options.repeat_prob);
    std::bernoulli_distribution session_break_on_switch(0.5);
    std::bernoulli_distribution session_break(1.0 / 40.0);
    std::bernoulli_distribution clicked(0.15);
    std::bernoulli_distribution unknown(0.03);
    std::uniform_int_distribution<std::int64_t> song_gap(150, 240);
    std::uniform_int_distribution<std::int64_t> session_gap(2 * 3600,
                                                            20 * 3600);
    std::uniform_int_distribution<std::int64_t> start_offset(0, 86400);

    std::deque<std::int32_t> recent_artists;
    std::unordered_map<std::int32_t, int> artist_count;
    std::int64_t now = options.start_time + start_offset(rng);
    int genre = pick_genre();
    int run_left = single_run ? options.length : 1 + extra_length(rng);
    int source = source_dist(rng);

    for (int pos = 0; pos < options.length; ++pos) {
      bool switched = false;
      if (run_left == 0) {
        if (num_genres > 1) {
          int next = pick_genre();
          for (int attempt = 0; attempt < 20 && next == genre; ++attempt) {
            next = pick_genre();
          }
          if (next == genre) next = (genre + 1) % num_genres;
          genre = next;
        }
        run_left = 1 + extra_length(rng);
        source = source_dist(rng);
        switched = true;
      }
      --run_left;

      std::size_t pick;
      if (!history.events.empty() && repeat(rng)) {
        const std::size_t window = std::min<std::size_t>(
            history.events.size(),
            static_cast<std::size_t>(std::max(1, options.artist_memory)));
        std::uniform_int_distribution<std::size_t> back(1, window);
        const SongId id =
            history.events[history.events.size() - back(rng)].song_id;
        pick = static_cast<std::size_t>(&catalog.Get(id) - songs.data());
      } else {
        pick = pools.DrawSong(genre, rng);
        for (int attempt = 0;
             attempt < 50 && artist_count.count(songs[pick].artist_id);
             ++attempt) {
          pick = pools.DrawSong(genre, rng);
        }
      }

      if (pos > 0) {
        const bool new_session = (switched && session_break_on_switch(rng)) ||
                                 session_break(rng);
        now += new_session ? session_gap(rng) : song_gap(rng);
      }
      ListeningEvent event{songs[pick].id, now, {}};
      if (unknown(rng)) {
        event.contexts.set(static_cast<std::size_t>(PlayContext::kUnknown));
      } else {
        event.contexts.set(static_cast<std::size_t>(source));
        if (clicked(rng)) {
          event.contexts.set(static_cast<std::size_t>(PlayContext::kClicked));
        }
      }
      history.events.push_back(event);

      const std::int32_t artist = songs[pick].artist_id;
      recent_artists.push_back(artist);
      ++artist_count[artist];
      if (static_cast<int>(recent_artists.size()) > options.artist_memory) {
        const std::int32_t old = recent_artists.front();
        recent_artists.pop_front();
        if (--artist_count[old] == 0) artist_count.erase(old);
      }
    }
  }
  return histories;
}

std::vector<Playlist> FilterPlaylists(const std::vector<Playlist>& playlists,
                                      const Catalog& catalog, int top_n) {
  if (top_n < 1) throw std::invalid_argument("top_n must be positive");
  std::vector<Playlist> kept;
  for (const auto& playlist : playlists) {
    Playlist filtered;
    std::unordered_set<std::int32_t> artists;
    std::unordered_set<std::int32_t> albums;
    for (SongId id : playlist.songs) {
      const Song* song = catalog.Find(id);
      if (song == nullptr || song->popularity_rank > top_n) continue;
      filtered.songs.push_back(id);
      artists.insert(song->artist_id);
      albums.insert(song->album_id);
    }
    const std::size_t n = filtered.songs.size();
    if (n > 10 && n < 5000 && artists.size() >= 3 && albums.size() >= 3) {
      kept.push_back(std::move(filtered));
    }
  }
  return kept;
}

std::vector<TrainSequence> ExtractPlaylistChunks(const Playlist& playlist,
                                                 std::int64_t source_id,
                                                 int input_length,
                                                 int target_length) {
  if (input_length < 1 || target_length < 1) {
    throw std::invalid_argument("chunk lengths must be positive");
  }
  const std::size_t window = input_length + target_length;
  std::vector<TrainSequence> chunks;
  for (std::size_t start = 0; start + window <= playlist.songs.size();
       start += window) {
    const auto first = playlist.songs.begin() + start;
    TrainSequence seq;
    seq.source_id = source_id;
    seq.input.assign(first, first + input_length);
    seq.targets.assign(first + input_length, first + window);
    chunks.push_back(std::move(seq));
  }
  return chunks;
}

std::vector<TrainSequence> ExtractHistoryChunks(
    const ListeningHistory& history, const Catalog& catalog, int input_length,
    int target_length) {
  if (input_length < 1 || target_length < 1) {
    throw std::invalid_argument("chunk lengths must be positive");
  }
  const std::size_t window = input_length + target_length;
  const auto& events = history.events;
  std::vector<TrainSequence> chunks;
  for (std::size_t start = 0; start + window <= events.size();
       start += window) {
    std::unordered_set<SongId> input_songs;
    std::unordered_set<std::int32_t> input_artists;
    for (std::size_t i = start; i < start + input_length; ++i) {
      input_songs.insert(events[i].song_id);
      input_artists.insert(catalog.Get(events[i].song_id).artist_id);
    }
    std::unordered_set<SongId> target_songs;
    std::unordered_set<std::int32_t> target_artists;
    bool ok = true;
    for (std::size_t i = start + input_length; ok && i < start + window; ++i) {
      const SongId id = events[i].song_id;
      const std::int32_t artist = catalog.Get(id).artist_id;
      ok = target_songs.insert(id).second && !input_songs.count(id) &&
           target_artists.insert(artist).second &&
           !input_artists.count(artist);
    }
    if (!ok) continue;
    TrainSequence seq;
    seq.source_id = history.user_id;
    for (std::size_t i = start; i < start + window; ++i) {
      auto& dest = i < start + input_length ? seq.input : seq.targets;
      dest.push_back(events[i].song_id);
    }
    seq.context_inputs.assign(events.begin() + start,
                              events.begin() + start + input_length);
    chunks.push_back(std::move(seq));
  }
  return chunks;
}

Split SplitOf(std::int64_t key) {
  const std::int64_t bucket = ((key % 10) + 10) % 10;
  if (bucket == 0) return Split::kTest;
  if (bucket == 1) return Split::kValidation;
  return Split::kTrain;
}

void WriteCatalog(std::ostream& out, const Catalog& catalog) {
  for (const Song& s : catalog.songs()) {
    out << s.id << '\t' << s.artist_id << '\t' << s.album_id << '\t'
        << s.genre_id << '\t' << s.popularity_rank << '\n';
  }
}

Catalog ReadCatalog(std::istream& in) {
  std::vector<Song> songs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = SplitFields(line, '\t');
    if (f.size() != 5) {
      throw DataError("catalog line " + std::to_string(line_no) +
                      ": expected 5 fields");
    }
    Song s;
    s.id = ParseInt(f[0], line_no);
    s.artist_id = static_cast<std::int32_t>(ParseInt(f[1], line_no));
    s.album_id = static_cast<std::int32_t>(ParseInt(f[2], line_no));
    s.genre_id = static_cast<std::int32_t>(ParseInt(f[3], line_no));
    s.popularity_rank = static_cast<std::int32_t>(ParseInt(f[4], line_no));
    songs.push_back(s);
  }
  return Catalog(std::move(songs));
}

void WritePlaylists(std::ostream& out, const std::vector<Playlist>& playlists) {
  for (std::size_t p = 0; p < playlists.size(); ++p) {
    out << p << '\t';
    const auto& songs = playlists[p].songs;
    for (std::size_t i = 0; i < songs.size(); ++i) {
      if (i > 0) out << ',';
      out << songs[i];
    }
    out << '\n';
  }
}

std::vector<Playlist> ReadPlaylists(std::istream& in) {
  std::vector<Playlist> playlists;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = SplitFields(line, '\t');
    if (f.size() != 2) {
      throw DataError("playlist line " + std::to_string(line_no) +
                      ": expected 2 fields");
    }
    Playlist p;
    if (!f[1].empty()) {
      for (auto id : SplitFields(f[1], ',')) p.songs.push_back(ParseInt(id, line_no));
    }
    playlists.push_back(std::move(p));
  }
  return playlists;
}

void WriteHistories(std::ostream& out,
                    const std::vector<ListeningHistory>& histories) {
  for (const auto& h : histories) {
    for (const auto& e : h.events) {
      out << h.user_id << '\t' << e.timestamp << '\t' << e.song_id << '\t';
      bool first = true;
      for (int c = 0; c < kNumPlayContexts; ++c) {
        if (!e.contexts.test(c)) continue;
        if (!first) out << ',';
        out << ContextName(static_cast<PlayContext>(c));
        first = false;
      }
      out << '\n';
    }
  }
}

std::vector<ListeningHistory> ReadHistories(std::istream& in) {
  std::vector<ListeningHistory> histories;
  std::unordered_map<std::int64_t, std::size_t> by_user;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = SplitFields(line, '\t');
    if (f.size() != 4) {
      throw DataError("history line " + std::to_string(line_no) +
                      ": expected 4 fields");
    }
    const std::int64_t user = ParseInt(f[0], line_no);
    ListeningEvent e;
    e.timestamp = ParseInt(f[1], line_no);
    e.song_id = ParseInt(f[2], line_no);
    if (!f[3].empty()) {
      for (auto name : SplitFields(f[3], ',')) {
        auto ctx = ParseContext(name);
        if (!ctx) {
          throw DataError("history line " + std::to_string(line_no) +
                          ": unknown context '" + std::string(name) + "'");
        }
        e.contexts.set(static_cast<std::size_t>(*ctx));
      }
    }
    auto [it, inserted] = by_user.emplace(user, histories.size());
    if (inserted) histories.push_back(ListeningHistory{user, {}});
    auto& events = histories[it->second].events;
    if (!events.empty() && events.back().timestamp > e.timestamp) {
      throw DataError("history line " + std::to_string(line_no) +
                      ": timestamps decrease");
    }
    events.push_back(e);
  }
  return histories;
}

}  // namespace tasteseq::corpus
