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

#include "pipeline.h"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "tasteseq/ann_index.h"
#include "tasteseq/baselines.h"
#include "tasteseq/common.h"
#include "tasteseq/corpus.h"
#include "tasteseq/dataset.h"
#include "tasteseq/embeddings.h"
#include "tasteseq/eval.h"
#include "tasteseq/taste_model.h"

namespace tasteseq::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Seed streams under the global seed.
constexpr std::uint64_t kCatalogStream = 1;
constexpr std::uint64_t kPlaylistStream = 2;
constexpr std::uint64_t kCbowStream = 3;
constexpr std::uint64_t kHistoryStream = 4;
constexpr std::uint64_t kIndexStream = 5;
constexpr std::uint64_t kPopularityStream = 6;
constexpr std::uint64_t kWeightStream = 7;  // + 1 for the long-term model
constexpr std::uint64_t kModelStream = 10;  // + variant
constexpr std::uint64_t kClassifierStream = 20;  // + loss

fs::path CatalogPath(const fs::path& dir) { return dir / "data/catalog.tsv"; }
fs::path PlaylistsPath(const fs::path& dir) { return dir / "data/playlists.tsv"; }
fs::path HistoriesPath(const fs::path& dir) { return dir / "data/histories.tsv"; }
fs::path FilteredPath(const fs::path& dir) {
  return dir / "data/playlists.filtered.tsv";
}
fs::path EmbeddingsPath(const fs::path& dir) { return dir / "embeddings.txt"; }
fs::path IndexPath(const fs::path& dir) { return dir / "index.tidx"; }
fs::path ManifestPath(const fs::path& dir) { return dir / "manifest.json"; }
fs::path ModelPath(const fs::path& dir, const std::string& name,
                   const std::string& ext) {
  return dir / "models" / (name + ext);
}
fs::path ReportPath(const fs::path& dir, const std::string& name) {
  return dir / "reports" / name;
}

template <typename Reader>
auto ReadFile(const fs::path& path, Reader read,
              std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return read(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

template <typename Writer>
void WriteFile(const fs::path& path, Writer write,
               std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  write(out);
  out.close();
  if (out.fail()) throw DataError("write failed: " + path.string());
}

json LoadManifest(const fs::path& dir) {
  const fs::path path = ManifestPath(dir);
  if (!fs::exists(path)) return json::object();
  return ReadFile(path, [&](std::istream& in) {
    try {
      return json::parse(in);
    } catch (const json::exception& e) {
      throw DataError(e.what());
    }
  });
}

void SaveManifest(const fs::path& dir, const json& manifest) {
  WriteFile(ManifestPath(dir),
            [&](std::ostream& out) { out << manifest.dump(2) << '\n'; });
}

corpus::Catalog LoadCatalog(const fs::path& dir) {
  return ReadFile(CatalogPath(dir),
                  [](std::istream& in) { return corpus::ReadCatalog(in); });
}

std::vector<corpus::Playlist> LoadPlaylists(const fs::path& path) {
  return ReadFile(path,
                  [](std::istream& in) { return corpus::ReadPlaylists(in); });
}

std::vector<corpus::ListeningHistory> LoadHistories(const fs::path& path) {
  return ReadFile(path,
                  [](std::istream& in) { return corpus::ReadHistories(in); });
}

embed::EmbeddingMatrix LoadEmbeddings(const fs::path& dir) {
  return ReadFile(EmbeddingsPath(dir),
                  [](std::istream& in) { return embed::ReadEmbeddings(in); });
}

std::string EmbeddingTag(const embed::EmbeddingMatrix& embeddings) {
  return FingerprintHex(embed::Fingerprint(embeddings));
}

void CheckTag(const std::string& what, const std::string& tag,
              const embed::EmbeddingMatrix& embeddings) {
  if (tag != EmbeddingTag(embeddings)) {
    throw DataError(what + " was built from other embeddings; run refresh");
  }
}

ann::IndexForest LoadIndex(const fs::path& dir,
                           const embed::EmbeddingMatrix& embeddings) {
  try {
    return ReadFile(
        IndexPath(dir),
        [&](std::istream& in) { return ann::ReadIndex(in, embeddings); },
        std::ios::in | std::ios::binary);
  } catch (const DataError& e) {
    throw DataError(std::string(e.what()) + " (run build-index or refresh)");
  }
}

taste::OffsetRange Offsets(const PipelineConfig& config,
                           taste::OffsetRange fallback) {
  taste::OffsetRange range = fallback;
  if (config.l_min > 0) range.min = config.l_min;
  if (config.l_max > 0) range.max = config.l_max;
  if (range.min < 1 || range.max < range.min) {
    throw UsageError("need 1 <= l-min <= l-max");
  }
  return range;
}

taste::OffsetRange TermRange(const std::string& term) {
  if (term == "short") return taste::kShortTerm;
  if (term == "long") return taste::kLongTerm;
  throw UsageError("term must be short or long: " + term);
}

std::vector<nn::DenseSpec> DenseHidden(int dense) {
  if (dense <= 0) return {};
  return {{dense, nn::Activation::kLeakyRelu}};
}

// ---------------------------------------------------------------------------
// Training from manifest entries, shared by the train commands and refresh.

std::string RunEmbeddings(const fs::path& dir, const json& e, std::ostream& out) {
  const auto catalog = LoadCatalog(dir);
  const auto playlists = LoadPlaylists(FilteredPath(dir));
  const auto vocab =
      embed::BuildVocabulary(playlists, catalog, e.at("top_n").get<int>());
  if (vocab.empty()) throw DataError("no songs in the filtered playlists");
  embed::CbowOptions options;
  options.dims = e.at("dims");
  options.window = e.at("window");
  options.negatives = e.at("negatives");
  options.epochs = e.at("epochs");
  const auto embeddings = embed::TrainCbow(
      playlists, vocab, options,
      DeriveSeed(e.at("seed").get<std::uint64_t>(), kCbowStream));
  WriteFile(EmbeddingsPath(dir), [&](std::ostream& o) {
    embed::WriteEmbeddings(o, embeddings);
  });
  const std::string tag = EmbeddingTag(embeddings);
  out << "embeddings: " << embeddings.rows() << " songs x " << embeddings.dims()
      << " dims, fingerprint " << tag << '\n';
  return tag;
}

Dataset HistoryData(const fs::path& dir,
                    const embed::EmbeddingMatrix& embeddings) {
  return HistoryDataset(LoadHistories(HistoriesPath(dir)), LoadCatalog(dir),
                        embeddings);
}

void RunTasteModel(const fs::path& dir, const std::string& name, const json& e,
                   const embed::EmbeddingMatrix& embeddings, std::ostream& out) {
  const auto variant = taste::ParseVariant(e.at("variant").get<std::string>());
  if (!variant) throw UsageError("unknown variant in " + name);
  taste::TrainConfig c = taste::DefaultConfig(*variant);
  c.offsets = {e.at("l_min").get<int>(), e.at("l_max").get<int>()};
  c.recurrent_dims.assign(e.at("layers").get<int>(), e.at("d_hid").get<int>());
  c.dense_hidden = DenseHidden(e.at("dense"));
  const std::string cell = e.at("cell");
  if (cell != "gru" && cell != "lstm") {
    throw UsageError("cell must be gru or lstm: " + cell);
  }
  c.recurrent_kind = cell == "gru" ? nn::RecurrentKind::kGru : nn::RecurrentKind::kLstm;
  const std::string loss = e.at("loss");
  if (loss != "l2" && loss != "cos") {
    throw UsageError("loss must be l2 or cos: " + loss);
  }
  c.loss = loss == "l2" ? taste::LossKind::kL2 : taste::LossKind::kCosine;
  c.context_enabled = e.at("context");
  c.epochs = e.at("epochs");
  c.learning_rate = e.at("learning_rate");
  c.batch_size = e.at("batch_size");
  if (c.context_enabled && !taste::IsHistoryVariant(*variant)) {
    throw UsageError("play context needs a history variant");
  }

  const Dataset data =
      taste::IsHistoryVariant(*variant)
          ? HistoryData(dir, embeddings)
          : PlaylistDataset(LoadPlaylists(FilteredPath(dir)), embeddings);
  if (data.train.empty()) throw DataError("no training sequences for " + name);

  const auto seed = DeriveSeed(e.at("seed").get<std::uint64_t>(),
                               kModelStream + static_cast<int>(*variant));
  auto result = taste::TrainTasteModel(
      data.train, data.valid, embeddings, c, seed,
      [&](const taste::EpochLoss& l) {
        out << name << " epoch " << l.epoch << " train " << l.train_loss
            << " valid " << l.valid_loss << '\n'
            << std::flush;
      });
  result.model.set_tag(EmbeddingTag(embeddings));
  WriteFile(ModelPath(dir, name, ".model"), [&](std::ostream& o) {
    taste::WriteTasteModel(o, result.model);
  });
  WriteFile(ModelPath(dir, name, ".loss.tsv"), [&](std::ostream& o) {
    taste::WriteLossHistory(o, result.history);
  });
  out << name << ": best epoch " << result.best_epoch << '\n';
}

void RunWeights(const fs::path& dir, const std::string& name, const json& e,
                const embed::EmbeddingMatrix& embeddings, std::ostream& out) {
  baselines::WeightTrainConfig c;
  c.offsets = {e.at("l_min").get<int>(), e.at("l_max").get<int>()};
  c.lambda = e.at("lambda");
  c.epochs = e.at("epochs");
  c.learning_rate = e.at("learning_rate");
  c.batch_size = e.at("batch_size");
  const Dataset data = HistoryData(dir, embeddings);
  if (data.train.empty()) throw DataError("no training sequences for " + name);
  const std::uint64_t stream = kWeightStream + (c.offsets.min >= 25 ? 1 : 0);
  const auto result = baselines::TrainWeightModel(
      data.train, embeddings, c,
      DeriveSeed(e.at("seed").get<std::uint64_t>(), stream));
  WriteFile(ModelPath(dir, name, ".weights"), [&](std::ostream& o) {
    baselines::WriteWeights(o, result.model);
  });
  out << name << ": loss " << result.train_loss.front() << " -> "
      << result.train_loss.back() << '\n';
}

void RunClassifier(const fs::path& dir, const std::string& name, const json& e,
                   const embed::EmbeddingMatrix& embeddings, std::ostream& out) {
  baselines::ClassifierConfig c;
  const std::string loss = e.at("loss");
  c.loss = loss == "bpr" ? baselines::ClassifierLoss::kBpr
                         : baselines::ClassifierLoss::kCrossEntropy;
  c.offsets = {e.at("l_min").get<int>(), e.at("l_max").get<int>()};
  c.recurrent_dims.assign(e.at("layers").get<int>(), e.at("d_hid").get<int>());
  c.dense_hidden = DenseHidden(e.at("dense"));
  c.epochs = e.at("epochs");
  c.learning_rate = e.at("learning_rate");
  c.batch_size = e.at("batch_size");
  c.bpr_negatives = e.at("bpr_negatives");
  const Dataset data = HistoryData(dir, embeddings);
  if (data.train.empty()) throw DataError("no training sequences for " + name);
  const auto result = baselines::TrainClassifier(
      data.train, embeddings, c,
      DeriveSeed(e.at("seed").get<std::uint64_t>(),
                 kClassifierStream + static_cast<int>(c.loss)));
  WriteFile(ModelPath(dir, name, ".classifier"), [&](std::ostream& o) {
    baselines::WriteClassifier(o, result.model, EmbeddingTag(embeddings));
  });
  out << name << ": loss " << result.train_loss.front() << " -> "
      << result.train_loss.back() << '\n';
}

void RunModelEntry(const fs::path& dir, const std::string& name, json& e,
                   const embed::EmbeddingMatrix& embeddings, std::ostream& out) {
  const std::string kind = e.at("kind");
  if (kind == "taste") {
    RunTasteModel(dir, name, e, embeddings, out);
  } else if (kind == "weights") {
    RunWeights(dir, name, e, embeddings, out);
  } else if (kind == "classifier") {
    RunClassifier(dir, name, e, embeddings, out);
  } else {
    throw DataError("manifest: unknown model kind " + kind);
  }
  e["fingerprint"] = EmbeddingTag(embeddings);
}

void RunIndex(const fs::path& dir, json& e,
              const embed::EmbeddingMatrix& embeddings, std::ostream& out) {
  ann::IndexOptions options;
  options.num_trees = e.at("trees");
  options.max_leaf_size = e.at("max_leaf");
  const auto forest = ann::IndexForest::Build(
      embeddings, options,
      DeriveSeed(e.at("seed").get<std::uint64_t>(), kIndexStream));
  WriteFile(
      IndexPath(dir), [&](std::ostream& o) { ann::WriteIndex(o, forest); },
      std::ios::out | std::ios::binary);
  e["fingerprint"] = EmbeddingTag(embeddings);
  out << "index: " << options.num_trees << " trees over "
      << embeddings.rows() << " songs\n";
}

// ---------------------------------------------------------------------------
// Loading trained models.

struct LoadedModel {
  std::string name;
  std::string kind;
  taste::TasteModel taste;
  baselines::WeightModel weights;
  baselines::Classifier classifier;
};

LoadedModel LoadModel(const fs::path& dir, const std::string& name,
                      const json& e, const embed::EmbeddingMatrix& embeddings) {
  LoadedModel m;
  m.name = name;
  m.kind = e.at("kind");
  if (m.kind == "taste") {
    m.taste = ReadFile(ModelPath(dir, name, ".model"), [](std::istream& in) {
      return taste::ReadTasteModel(in);
    });
    CheckTag(name, m.taste.tag(), embeddings);
  } else if (m.kind == "weights") {
    CheckTag(name, e.value("fingerprint", ""), embeddings);
    m.weights = ReadFile(ModelPath(dir, name, ".weights"), [&](std::istream& in) {
      return baselines::ReadWeights(in, e.at("lambda").get<double>());
    });
  } else if (m.kind == "classifier") {
    CheckTag(name, e.value("fingerprint", ""), embeddings);
    std::string tag;
    m.classifier = ReadFile(ModelPath(dir, name, ".classifier"),
                            [&](std::istream& in) {
                              return baselines::ReadClassifier(in, embeddings, &tag);
                            });
    CheckTag(name, tag, embeddings);
  } else {
    throw DataError("manifest: unknown model kind " + m.kind);
  }
  return m;
}

std::string GammaName(double gamma) {
  std::ostringstream s;
  s << "gamma=" << gamma;
  return s.str();
}

json BaseEntry(const PipelineConfig& config) {
  return {{"seed", config.seed},
          {"epochs", config.epochs},
          {"learning_rate", config.learning_rate},
          {"batch_size", config.batch_size}};
}

json& ModelsOf(json& manifest) {
  if (!manifest.contains("models")) manifest["models"] = json::object();
  return manifest["models"];
}

}  // namespace

// ---------------------------------------------------------------------------

void GenData(const PipelineConfig& config, std::ostream& out) {
  const auto catalog = corpus::GenerateCatalog(
      config.songs, config.artists, config.genres,
      DeriveSeed(config.seed, kCatalogStream));
  corpus::PlaylistOptions popt;
  popt.count = config.playlists;
  const auto playlists = corpus::GeneratePlaylists(
      catalog, popt, DeriveSeed(config.seed, kPlaylistStream));
  corpus::HistoryOptions hopt;
  hopt.num_users = config.users;
  hopt.length = config.history_length;
  hopt.fixation_mean = config.fixation_mean;
  const auto histories = corpus::GenerateHistories(
      catalog, hopt, DeriveSeed(config.seed, kHistoryStream));
  WriteFile(CatalogPath(config.dir),
            [&](std::ostream& o) { corpus::WriteCatalog(o, catalog); });
  WriteFile(PlaylistsPath(config.dir),
            [&](std::ostream& o) { corpus::WritePlaylists(o, playlists); });
  WriteFile(HistoriesPath(config.dir),
            [&](std::ostream& o) { corpus::WriteHistories(o, histories); });
  out << "gen-data: " << catalog.songs().size() << " songs, "
      << playlists.size() << " playlists, " << histories.size()
      << " histories\n";
}

void Filter(const PipelineConfig& config, std::ostream& out) {
  const auto catalog = LoadCatalog(config.dir);
  const auto playlists = LoadPlaylists(PlaylistsPath(config.dir));
  const int top_n = config.top_n > 0 ? config.top_n
                                     : static_cast<int>(catalog.songs().size());
  const auto kept = corpus::FilterPlaylists(playlists, catalog, top_n);
  WriteFile(FilteredPath(config.dir),
            [&](std::ostream& o) { corpus::WritePlaylists(o, kept); });
  out << "filter: kept " << kept.size() << " of " << playlists.size()
      << " playlists\n";
}

void TrainEmbeddings(const PipelineConfig& config, std::ostream& out) {
  json manifest = LoadManifest(config.dir);
  json e = {{"top_n", config.top_n > 0 ? config.top_n
                                       : static_cast<int>(LoadCatalog(config.dir)
                                                              .songs()
                                                              .size())},
            {"dims", config.dims},
            {"window", config.window},
            {"negatives", config.negatives},
            {"epochs", config.cbow_epochs},
            {"seed", config.seed}};
  e["fingerprint"] = RunEmbeddings(config.dir, e, out);
  manifest["embeddings"] = e;
  SaveManifest(config.dir, manifest);
}

void TrainModel(const PipelineConfig& config, std::ostream& out) {
  const auto variant = taste::ParseVariant(config.variant);
  if (!variant) {
    throw UsageError("variant must be rPST, rPLT, rHST or rHLT: " +
                                config.variant);
  }
  const auto embeddings = LoadEmbeddings(config.dir);
  const auto range = Offsets(config, taste::DefaultConfig(*variant).offsets);
  json e = BaseEntry(config);
  e.update({{"kind", "taste"},
            {"variant", config.variant},
            {"l_min", range.min},
            {"l_max", range.max},
            {"d_hid", config.d_hid},
            {"layers", config.layers},
            {"dense", config.dense},
            {"cell", config.cell},
            {"loss", config.loss},
            {"context", config.context}});
  const std::string name = config.variant + (config.context ? "+ctx" : "");
  RunModelEntry(config.dir, name, e, embeddings, out);
  json manifest = LoadManifest(config.dir);
  ModelsOf(manifest)[name] = e;
  SaveManifest(config.dir, manifest);
}

void TrainBaseline(const PipelineConfig& config, std::ostream& out) {
  const auto embeddings = LoadEmbeddings(config.dir);
  json e = BaseEntry(config);
  std::string name;
  if (config.baseline == "weights") {
    const auto range = Offsets(config, TermRange(config.term));
    name = range.min >= 25 ? "bWLT" : "bWST";
    e.update({{"kind", "weights"},
              {"l_min", range.min},
              {"l_max", range.max},
              {"lambda", config.lambda}});
  } else if (config.baseline == "ce" || config.baseline == "bpr") {
    const auto range = Offsets(config, TermRange(config.term));
    name = config.baseline == "ce" ? "cCE" : "cBPR";
    e.update({{"kind", "classifier"},
              {"loss", config.baseline},
              {"l_min", range.min},
              {"l_max", range.max},
              {"d_hid", config.d_hid},
              {"layers", config.layers},
              {"dense", config.dense},
              {"bpr_negatives", config.bpr_negatives}});
  } else {
    throw UsageError("baseline must be weights, ce or bpr: " +
                                config.baseline);
  }
  RunModelEntry(config.dir, name, e, embeddings, out);
  json manifest = LoadManifest(config.dir);
  ModelsOf(manifest)[name] = e;
  SaveManifest(config.dir, manifest);
}

void BuildIndex(const PipelineConfig& config, std::ostream& out) {
  const auto embeddings = LoadEmbeddings(config.dir);
  json e = {{"trees", config.trees},
            {"max_leaf", config.max_leaf},
            {"seed", config.seed}};
  RunIndex(config.dir, e, embeddings, out);
  json manifest = LoadManifest(config.dir);
  manifest["index"] = e;
  SaveManifest(config.dir, manifest);
}

void Recommend(const PipelineConfig& config, std::ostream& out) {
  if (config.history.empty()) throw UsageError("--history is required");
  if (config.k < 1) throw UsageError("k must be positive");
  const auto embeddings = LoadEmbeddings(config.dir);
  const auto histories = LoadHistories(config.history);
  const corpus::ListeningHistory* picked = nullptr;
  for (const auto& h : histories) {
    if (config.user < 0 || h.user_id == config.user) {
      picked = &h;
      break;
    }
  }
  if (picked == nullptr) throw DataError("user not found in " + config.history.string());
  const auto kept = corpus::DropEvents(
      *picked, [&](SongId id) { return embeddings.Contains(id); });
  if (kept.events.empty()) throw DataError("no song of the history has a vector");
  std::vector<SongId> songs;
  for (const auto& ev : kept.events) songs.push_back(ev.song_id);
  std::unordered_set<SongId> heard;
  if (config.exclude_heard) heard.insert(songs.begin(), songs.end());
  const std::span<const SongId> all(songs);
  const auto last = [&](std::size_t n) { return all.last(std::min(n, all.size())); };

  out << std::setprecision(6);
  nn::Vector taste;
  if (config.model == "discount") {
    taste = baselines::DiscountTaste(baselines::SongMatrix(embeddings, all),
                                     config.gammas.empty() ? 1.0 : config.gammas[0]);
  } else {
    const json manifest = LoadManifest(config.dir);
    if (!manifest.contains("models") || !manifest.at("models").contains(config.model)) {
      throw DataError("no trained model named " + config.model);
    }
    const auto m = LoadModel(config.dir, config.model,
                             manifest.at("models").at(config.model), embeddings);
    if (m.kind == "taste") {
      const std::size_t n = m.taste.config().input_length;
      const std::span<const corpus::ListeningEvent> events(kept.events);
      taste = m.taste.TasteVector(
          embeddings, last(n),
          m.taste.config().context_enabled
              ? events.last(std::min(n, events.size()))
              : std::span<const corpus::ListeningEvent>());
    } else if (m.kind == "weights") {
      const std::size_t n = m.weights.weights.size();
      if (songs.size() < n) {
        throw DataError(config.model + " needs the last " + std::to_string(n) +
                        " songs of the history");
      }
      taste = baselines::WeightTaste(baselines::SongMatrix(embeddings, last(n)),
                                     m.weights);
    } else {
      const std::size_t n = m.classifier.config().input_length;
      const nn::Vector scores = m.classifier.Scores(embeddings, last(n));
      std::vector<std::int64_t> order(scores.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
        return scores[a] > scores[b];
      });
      int written = 0;
      for (auto i : order) {
        if (written == config.k) break;
        const SongId id = m.classifier.items()[i];
        if (heard.count(id)) continue;
        out << id << '\t' << scores[i] << '\n';
        ++written;
      }
      return;
    }
  }
  const auto forest = LoadIndex(config.dir, embeddings);
  for (const auto& nb : forest.Query(std::span<const double>(taste.data(), taste.size()), config.k,
                                      config.search_k, heard)) {
    out << nb.id << '\t' << nb.distance << '\n';
  }
}

void Evaluate(const PipelineConfig& config, std::ostream& out) {
  const auto embeddings = LoadEmbeddings(config.dir);
  const Dataset data = HistoryData(config.dir, embeddings);
  if (data.test.empty()) throw DataError("the history test split is empty");
  eval::CheckTestSet(data.test);
  const auto forest = LoadIndex(config.dir, embeddings);
  const json manifest = LoadManifest(config.dir);

  std::vector<LoadedModel> models;
  if (manifest.contains("models")) {
    for (const auto& [name, e] : manifest.at("models").items()) {
      models.push_back(LoadModel(config.dir, name, e, embeddings));
    }
  }
  std::vector<std::pair<std::string, eval::TasteFn>> tastes;
  for (const auto& m : models) {
    if (m.kind == "taste") {
      tastes.emplace_back(m.name, eval::ModelTasteFn(m.taste, embeddings));
    } else if (m.kind == "weights") {
      tastes.emplace_back(m.name, eval::WeightTasteFn(m.weights, embeddings));
    }
  }
  for (double g : config.gammas) {
    tastes.emplace_back(GammaName(g), eval::DiscountTasteFn(g, embeddings));
  }

  std::vector<eval::Curve> forward, backward;
  std::vector<eval::PrecisionRow> rows;
  for (const auto& [name, fn] : tastes) {
    out << "evaluate: " << name << '\n' << std::flush;
    forward.push_back(eval::ForwardAnalysis(name, fn, data.test, embeddings));
    backward.push_back(eval::BackwardAnalysis(name, fn, data.test, embeddings));
    rows.push_back(eval::PrecisionReport(
        name, eval::ForestRecommender(forest, embeddings, fn, config.search_k),
        data.test));
  }
  for (const auto& m : models) {
    if (m.kind != "classifier") continue;
    out << "evaluate: " << m.name << '\n' << std::flush;
    rows.push_back(eval::PrecisionReport(
        m.name, eval::ClassifierRecommender(m.classifier, embeddings), data.test));
  }
  rows.push_back(eval::PrecisionReport(
      "popularity",
      eval::PopularityRecommender(eval::PlayCounts(data.train),
                                  DeriveSeed(config.seed, kPopularityStream)),
      data.test));

  WriteFile(ReportPath(config.dir, "forward.tsv"),
            [&](std::ostream& o) { eval::WriteCurves(o, forward); });
  WriteFile(ReportPath(config.dir, "backward.tsv"),
            [&](std::ostream& o) { eval::WriteCurves(o, backward); });
  WriteFile(ReportPath(config.dir, "precision.tsv"),
            [&](std::ostream& o) { eval::WritePrecision(o, rows); });
  WriteFile(ReportPath(config.dir, "summary.txt"),
            [&](std::ostream& o) { eval::WriteSummary(o, rows, -1); });

  // Timing varies run to run, so it only goes to the console.
  double millis = -1;
  if (!tastes.empty()) {
    std::vector<nn::Vector> queries;
    const auto& fn = tastes.front().second;
    for (std::size_t i = 0; i < data.test.size() && i < 200; ++i) {
      queries.push_back(fn(data.test[i]));
    }
    const int k = static_cast<int>(std::min<std::size_t>(1000, embeddings.rows()));
    millis = eval::MeanQueryMillis(forest, queries, k, config.search_k);
  }
  eval::WriteSummary(out, rows, millis);
}

void Stats(const PipelineConfig& config, std::ostream& out) {
  const auto embeddings = LoadEmbeddings(config.dir);
  const Dataset data = HistoryData(config.dir, embeddings);
  if (data.test.empty()) throw DataError("the history test split is empty");
  const auto stats = eval::ComputeListeningStats(data.test, embeddings);
  WriteFile(ReportPath(config.dir, "stats.tsv"),
            [&](std::ostream& o) { eval::WriteListeningStats(o, stats); });
  out << "median cosine distance: all pairs " << stats.all_pairs.median
      << ", subsequent pairs " << stats.subsequent_pairs.median
      << "; median transitions > 1 per user " << stats.median_transitions
      << '\n';
}

void Refresh(const PipelineConfig& config, std::ostream& out) {
  json manifest = LoadManifest(config.dir);
  if (!manifest.contains("embeddings")) {
    throw DataError("nothing to refresh: no embeddings in " +
                    ManifestPath(config.dir).string());
  }
  manifest["embeddings"]["fingerprint"] =
      RunEmbeddings(config.dir, manifest["embeddings"], out);
  SaveManifest(config.dir, manifest);
  const auto embeddings = LoadEmbeddings(config.dir);
  for (auto& [name, e] : ModelsOf(manifest).items()) {
    RunModelEntry(config.dir, name, e, embeddings, out);
    SaveManifest(config.dir, manifest);
  }
  if (manifest.contains("index")) {
    RunIndex(config.dir, manifest["index"], embeddings, out);
    SaveManifest(config.dir, manifest);
  }
}

}  // namespace tasteseq::cli
