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

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace tasteseq::corpus {
namespace {

// Applies the four target rules literally, position by position.
bool BruteForceKeep(const std::vector<SongId>& window, const Catalog& catalog,
                    int n) {
  const int len = static_cast<int>(window.size());
  for (int a = n; a < len; ++a) {
    for (int b = 0; b < len; ++b) {
      if (a == b) continue;
      const bool same_song = window[a] == window[b];
      const bool same_artist =
          catalog.Get(window[a]).artist_id == catalog.Get(window[b]).artist_id;
      if (same_song || same_artist) return false;
    }
  }
  return true;
}

Catalog SmallCatalog() {
  // 6 artists, 2 albums each, 2 songs per album.
  std::vector<Song> songs;
  SongId id = 1;
  for (int artist = 0; artist < 6; ++artist) {
    for (int album = 0; album < 2; ++album) {
      for (int k = 0; k < 2; ++k) {
        songs.push_back({id, artist, artist * 2 + album, artist % 2,
                         static_cast<int>(id)});
        ++id;
      }
    }
  }
  return Catalog(songs);
}

TEST(GenerateCatalogTest, SingleSong) {
  Catalog c = GenerateCatalog(1, 1, 1, 7);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.songs()[0].popularity_rank, 1);
}

TEST(GenerateCatalogTest, UniqueIdsAndAlbumArtistConsistency) {
  Catalog c = GenerateCatalog(10'000, 500, 20, 1);
  ASSERT_EQ(c.size(), 10'000u);
  std::set<SongId> ids;
  std::map<int, int> album_artist;
  std::vector<int> ranks;
  for (const Song& s : c.songs()) {
    EXPECT_TRUE(ids.insert(s.id).second);
    auto [it, inserted] = album_artist.emplace(s.album_id, s.artist_id);
    if (!inserted) EXPECT_EQ(it->second, s.artist_id);
    ranks.push_back(s.popularity_rank);
  }
  std::sort(ranks.begin(), ranks.end());
  for (int i = 0; i < 10'000; ++i) ASSERT_EQ(ranks[i], i + 1);
}

TEST(GenerateCatalogTest, Deterministic) {
  std::ostringstream a, b;
  WriteCatalog(a, GenerateCatalog(500, 50, 5, 3));
  WriteCatalog(b, GenerateCatalog(500, 50, 5, 3));
  EXPECT_EQ(a.str(), b.str());
}

TEST(GenerateCatalogTest, RejectsZeroCounts) {
  EXPECT_THROW(GenerateCatalog(0, 1, 1, 1), std::invalid_argument);
  EXPECT_THROW(GenerateCatalog(10, 0, 1, 1), std::invalid_argument);
  EXPECT_THROW(GenerateCatalog(10, 5, 0, 1), std::invalid_argument);
  EXPECT_THROW(GenerateCatalog(10, 20, 5, 1), std::invalid_argument);
}

double AdjacentSameGenre(const std::vector<Playlist>& playlists,
                         const Catalog& c) {
  long same = 0, pairs = 0;
  for (const auto& p : playlists) {
    for (std::size_t i = 1; i < p.songs.size(); ++i) {
      same += c.Get(p.songs[i]).genre_id == c.Get(p.songs[i - 1]).genre_id;
      ++pairs;
    }
  }
  return static_cast<double>(same) / pairs;
}

TEST(GeneratePlaylistsTest, FullCoherenceIsSingleGenre) {
  Catalog c = GenerateCatalog(2000, 200, 10, 2);
  PlaylistOptions opt;
  opt.count = 200;
  opt.genre_coherence = 1.0;
  for (const auto& p : GeneratePlaylists(c, opt, 5)) {
    std::set<int> genres;
    for (SongId id : p.songs) genres.insert(c.Get(id).genre_id);
    EXPECT_EQ(genres.size(), 1u);
  }
}

TEST(GeneratePlaylistsTest, CoherenceFraction) {
  Catalog c = GenerateCatalog(10'000, 500, 20, 1);
  PlaylistOptions opt;
  opt.count = 1000;
  opt.min_length = opt.max_length = 50;
  opt.genre_coherence = 0.9;
  const auto playlists = GeneratePlaylists(c, opt, 11);
  EXPECT_NEAR(AdjacentSameGenre(playlists, c), 0.9, 0.03);
}

TEST(GeneratePlaylistsTest, ZeroCoherenceMixesGenres) {
  // Two genres of equal size and popularity weight: a redraw keeps the genre
  // about half of the time, so the adjacent same-genre rate sits near the
  // sampler's own mixing rate, far from 1.
  std::vector<Song> songs;
  for (int i = 0; i < 200; ++i) {
    songs.push_back({i + 1, i / 2, i / 2, i % 2, i + 1});
  }
  Catalog c(songs);
  PlaylistOptions opt;
  opt.count = 2041;
  opt.min_length = opt.max_length = 50;
  opt.genre_coherence = 0.0;
  opt.popularity_exponent = 0.0;
  const auto playlists = GeneratePlaylists(c, opt, 3);
  EXPECT_NEAR(AdjacentSameGenre(playlists, c), 0.5, 0.02);
}

TEST(GeneratePlaylistsTest, Errors) {
  PlaylistOptions opt;
  EXPECT_THROW(GeneratePlaylists(Catalog(), opt, 1), std::invalid_argument);
  opt.genre_coherence = 1.5;
  EXPECT_THROW(GeneratePlaylists(SmallCatalog(), opt, 1),
               std::invalid_argument);
}

TEST(GenerateHistoriesTest, SingleRunWhenFixationCoversHistory) {
  Catalog c = GenerateCatalog(5000, 1000, 10, 4);
  HistoryOptions opt;
  opt.num_users = 20;
  opt.length = 300;
  opt.fixation_mean = 300;
  for (const auto& h : GenerateHistories(c, opt, 9)) {
    std::set<int> genres;
    for (const auto& e : h.events) genres.insert(c.Get(e.song_id).genre_id);
    EXPECT_EQ(genres.size(), 1u);
  }
}

TEST(GenerateHistoriesTest, DeterministicAndOrdered) {
  Catalog c = GenerateCatalog(3000, 600, 10, 4);
  HistoryOptions opt;
  opt.num_users = 50;
  const auto a = GenerateHistories(c, opt, 12);
  const auto b = GenerateHistories(c, opt, 12);
  EXPECT_EQ(a, b);
  for (const auto& h : a) {
    ASSERT_EQ(h.events.size(), 450u);
    for (std::size_t i = 1; i < h.events.size(); ++i) {
      EXPECT_LE(h.events[i - 1].timestamp, h.events[i].timestamp);
    }
    for (const auto& e : h.events) {
      if (e.contexts.test(static_cast<int>(PlayContext::kUnknown))) {
        EXPECT_EQ(e.contexts.count(), 1u);
      }
      EXPECT_GE(e.contexts.count(), 1u);
    }
  }
}

TEST(GenerateHistoriesTest, RejectsShortHistories) {
  HistoryOptions opt;
  opt.length = 149;
  EXPECT_THROW(GenerateHistories(SmallCatalog(), opt, 1),
               std::invalid_argument);
}

Playlist MakePlaylist(const std::vector<SongId>& ids) { return {ids}; }

TEST(FilterPlaylistsTest, LengthBoundary) {
  Catalog c = SmallCatalog();
  // 10 songs over 3 artists and albums: too short.
  Playlist ten = MakePlaylist({1, 2, 5, 6, 9, 10, 13, 14, 17, 18});
  Playlist eleven = MakePlaylist({1, 2, 5, 6, 9, 10, 13, 14, 17, 18, 21});
  EXPECT_TRUE(FilterPlaylists({ten}, c, 100).empty());
  EXPECT_EQ(FilterPlaylists({eleven}, c, 100).size(), 1u);
}

TEST(FilterPlaylistsTest, ElevenSongsThreeArtistsThreeAlbumsKept) {
  Catalog c = SmallCatalog();
  // Artists 0, 1, 2 only; one album each.
  Playlist p = MakePlaylist({1, 2, 1, 2, 5, 6, 5, 6, 9, 10, 9});
  EXPECT_EQ(FilterPlaylists({p}, c, 100).size(), 1u);
}

TEST(FilterPlaylistsTest, SingleArtistDropped) {
  Catalog c = SmallCatalog();
  std::vector<SongId> ids;
  for (int i = 0; i < 50; ++i) ids.push_back(1 + i % 4);
  EXPECT_TRUE(FilterPlaylists({MakePlaylist(ids)}, c, 100).empty());
}

TEST(FilterPlaylistsTest, TruncatesByRankFirst) {
  Catalog c = SmallCatalog();
  Playlist p = MakePlaylist({1, 5, 9, 13, 17, 21, 2, 6, 10, 14, 18, 22});
  // Songs ranked above 11 are removed, leaving six songs.
  EXPECT_TRUE(FilterPlaylists({p}, c, 11).empty());
  const auto kept = FilterPlaylists({p}, c, 100);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0], p);
}

TEST(FilterPlaylistsTest, Idempotent) {
  Catalog c = GenerateCatalog(2000, 100, 5, 8);
  PlaylistOptions opt;
  opt.count = 300;
  opt.min_length = 5;
  opt.max_length = 40;
  const auto once = FilterPlaylists(GeneratePlaylists(c, opt, 1), c, 1500);
  EXPECT_EQ(FilterPlaylists(once, c, 1500), once);
}

TEST(ExtractPlaylistChunksTest, Counts) {
  std::vector<SongId> ids(330);
  for (int i = 0; i < 330; ++i) ids[i] = i + 1;
  EXPECT_TRUE(
      ExtractPlaylistChunks({{ids.begin(), ids.begin() + 109}}, 0).empty());
  const auto one = ExtractPlaylistChunks({{ids.begin(), ids.begin() + 110}}, 0);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].input.size(), 60u);
  EXPECT_EQ(one[0].targets.size(), 50u);
  EXPECT_EQ(one[0].input[0], ids[0]);
  EXPECT_EQ(one[0].targets[49], ids[109]);
  std::size_t windows = 0;
  for (std::size_t start = 0; start + 110 <= ids.size(); start += 110) {
    ++windows;
  }
  EXPECT_EQ(ExtractPlaylistChunks({ids}, 0).size(), windows);
}

// A catalog where every song has its own artist, so only song repeats and
// explicit artist sharing matter.
Catalog DistinctArtistCatalog(int n) {
  std::vector<Song> songs;
  for (int i = 1; i <= n; ++i) songs.push_back({i, i, i, 0, i});
  return Catalog(songs);
}

ListeningHistory HistoryOf(const std::vector<SongId>& ids) {
  ListeningHistory h{1, {}};
  for (std::size_t i = 0; i < ids.size(); ++i) {
    h.events.push_back({ids[i], static_cast<std::int64_t>(i * 180), {}});
  }
  return h;
}

TEST(ExtractHistoryChunksTest, TargetRepeatingInputRejected) {
  Catalog c = DistinctArtistCatalog(200);
  std::vector<SongId> ids(150);
  for (int i = 0; i < 150; ++i) ids[i] = i + 1;
  EXPECT_EQ(ExtractHistoryChunks(HistoryOf(ids), c).size(), 1u);
  ids[100] = ids[2];
  EXPECT_TRUE(ExtractHistoryChunks(HistoryOf(ids), c).empty());
}

TEST(ExtractHistoryChunksTest, InputRepeatsAllowed) {
  Catalog c = DistinctArtistCatalog(200);
  std::vector<SongId> ids(150);
  for (int i = 0; i < 150; ++i) ids[i] = i < 100 ? 1 + i % 7 : i + 1;
  const auto chunks = ExtractHistoryChunks(HistoryOf(ids), c);
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0].context_inputs.size(), 100u);
}

TEST(ExtractHistoryChunksTest, MatchesBruteForceOnInjectedViolations) {
  // Two songs per artist so artist collisions happen too.
  std::vector<Song> songs;
  for (int i = 1; i <= 40'000; ++i) songs.push_back({i, i / 2, i / 2, 0, i});
  Catalog c(songs);
  Rng rng(17);
  std::uniform_int_distribution<int> fresh(1, 40'000);
  std::bernoulli_distribution inject(0.004);
  std::size_t kept = 0, windows = 0;
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<SongId> ids(150 * 4);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      ids[i] = fresh(rng);
      if (i > 0 && inject(rng)) {
        std::uniform_int_distribution<std::size_t> back(0, i - 1);
        ids[i] = ids[back(rng)];
      }
    }
    std::vector<std::vector<SongId>> expected;
    for (std::size_t s = 0; s + 150 <= ids.size(); s += 150) {
      std::vector<SongId> w(ids.begin() + s, ids.begin() + s + 150);
      if (BruteForceKeep(w, c, 100)) expected.push_back(w);
    }
    std::vector<std::vector<SongId>> got;
    for (const auto& seq : ExtractHistoryChunks(HistoryOf(ids), c)) {
      std::vector<SongId> w = seq.input;
      w.insert(w.end(), seq.targets.begin(), seq.targets.end());
      EXPECT_TRUE(BruteForceKeep(w, c, 100));
      got.push_back(w);
    }
    EXPECT_EQ(got, expected);
    kept += expected.size();
    windows += ids.size() / 150;
  }
  // Both outcomes must be exercised.
  EXPECT_GT(kept, 0u);
  EXPECT_LT(kept, windows);
}

TEST(ExtractHistoryChunksTest, GeneratedHistoriesPassRecheck) {
  Catalog c = GenerateCatalog(10'000, 4000, 20, 1);
  HistoryOptions opt;
  opt.num_users = 40;
  std::size_t total = 0;
  for (const auto& h : GenerateHistories(c, opt, 2)) {
    std::set<SongId> source;
    for (const auto& e : h.events) source.insert(e.song_id);
    for (const auto& seq : ExtractHistoryChunks(h, c)) {
      std::vector<SongId> w = seq.input;
      w.insert(w.end(), seq.targets.begin(), seq.targets.end());
      EXPECT_TRUE(BruteForceKeep(w, c, 100));
      for (SongId id : w) EXPECT_TRUE(source.count(id));
      ++total;
    }
  }
  // Most windows of the generator should survive the rules.
  EXPECT_GT(total, 40u);
}

TEST(SplitTest, Buckets) {
  EXPECT_EQ(SplitOf(10), Split::kTest);
  EXPECT_EQ(SplitOf(21), Split::kValidation);
  EXPECT_EQ(SplitOf(7), Split::kTrain);
}

TEST(CorpusIoTest, RoundTrips) {
  Catalog c = GenerateCatalog(300, 40, 4, 5);
  std::stringstream cs;
  WriteCatalog(cs, c);
  EXPECT_EQ(ReadCatalog(cs).songs(), c.songs());

  PlaylistOptions popt;
  popt.count = 20;
  const auto playlists = GeneratePlaylists(c, popt, 1);
  std::stringstream ps;
  WritePlaylists(ps, playlists);
  EXPECT_EQ(ReadPlaylists(ps), playlists);

  HistoryOptions hopt;
  hopt.num_users = 3;
  hopt.length = 150;
  const auto histories = GenerateHistories(c, hopt, 1);
  std::stringstream hs;
  WriteHistories(hs, histories);
  EXPECT_EQ(ReadHistories(hs), histories);
}

TEST(CorpusIoTest, MalformedInputIsDataError) {
  std::istringstream bad_catalog("1\t2\tthree\t0\t1\n");
  EXPECT_THROW(ReadCatalog(bad_catalog), DataError);
  std::istringstream bad_context("1\t100\t5\tnope\n");
  EXPECT_THROW(ReadHistories(bad_context), DataError);
  std::istringstream backwards("1\t100\t5\tradio\n1\t50\t6\tradio\n");
  EXPECT_THROW(ReadHistories(backwards), DataError);
}

TEST(ContextTest, NamesRoundTrip) {
  for (int i = 0; i < kNumPlayContexts; ++i) {
    const auto ctx = static_cast<PlayContext>(i);
    EXPECT_EQ(ParseContext(ContextName(ctx)), ctx);
  }
  EXPECT_FALSE(ParseContext("podcast").has_value());
}

}  // namespace
}  // namespace tasteseq::corpus
