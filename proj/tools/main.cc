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

// tasteseq: command-line driver for the recommendation pipeline.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 training divergence.

#include <filesystem>
#include <iostream>
#include <map>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "pipeline.h"
#include "tasteseq/common.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDiverged = 3;

using Step = void (*)(const tasteseq::cli::PipelineConfig&, std::ostream&);

void AddOptions(CLI::App& app, tasteseq::cli::PipelineConfig& c) {
  app.add_option("--dir", c.dir, "Working directory for artifacts");
  app.add_option("--seed", c.seed, "Global seed");

  auto* gen = app.add_option_group("gen-data");
  gen->add_option("--songs", c.songs)->check(CLI::PositiveNumber);
  gen->add_option("--artists", c.artists)->check(CLI::PositiveNumber);
  gen->add_option("--genres", c.genres)->check(CLI::PositiveNumber);
  gen->add_option("--playlists", c.playlists)->check(CLI::NonNegativeNumber);
  gen->add_option("--users", c.users)->check(CLI::NonNegativeNumber);
  gen->add_option("--history-length", c.history_length)
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--fixation-mean", c.fixation_mean)->check(CLI::PositiveNumber);

  auto* emb = app.add_option_group("embeddings");
  emb->add_option("--top-n", c.top_n, "Keep the top-n songs (0: all)")
      ->check(CLI::NonNegativeNumber);
  emb->add_option("--dims", c.dims)->check(CLI::PositiveNumber);
  emb->add_option("--window", c.window)->check(CLI::PositiveNumber);
  emb->add_option("--negatives", c.negatives)->check(CLI::PositiveNumber);
  emb->add_option("--cbow-epochs", c.cbow_epochs)->check(CLI::PositiveNumber);

  auto* model = app.add_option_group("models");
  model->add_option("--variant", c.variant)
      ->check(CLI::IsMember({"rPST", "rPLT", "rHST", "rHLT"}));
  model->add_option("--l-min", c.l_min, "Smallest prediction offset");
  model->add_option("--l-max", c.l_max, "Largest prediction offset");
  model->add_option("--d-hid", c.d_hid, "Recurrent state size")
      ->check(CLI::PositiveNumber);
  model->add_option("--layers", c.layers)->check(CLI::PositiveNumber);
  model->add_option("--dense", c.dense, "Hidden dense width (0: none)")
      ->check(CLI::NonNegativeNumber);
  model->add_option("--cell", c.cell)->check(CLI::IsMember({"gru", "lstm"}));
  model->add_option("--loss", c.loss)->check(CLI::IsMember({"l2", "cos"}));
  model->add_flag("--context", c.context, "Feed play context and time deltas");
  model->add_option("--epochs", c.epochs)->check(CLI::NonNegativeNumber);
  model->add_option("--learning-rate", c.learning_rate)
      ->check(CLI::PositiveNumber);
  model->add_option("--batch-size", c.batch_size)->check(CLI::PositiveNumber);
  model->add_option("--baseline", c.baseline)
      ->check(CLI::IsMember({"weights", "ce", "bpr"}));
  model->add_option("--term", c.term)->check(CLI::IsMember({"short", "long"}));
  model->add_option("--lambda", c.lambda)->check(CLI::NonNegativeNumber);
  model->add_option("--bpr-negatives", c.bpr_negatives)
      ->check(CLI::PositiveNumber);

  auto* index = app.add_option_group("index");
  index->add_option("--trees", c.trees)->check(CLI::PositiveNumber);
  index->add_option("--max-leaf", c.max_leaf)->check(CLI::PositiveNumber);
  index->add_option("--search-k", c.search_k)->check(CLI::PositiveNumber);

  auto* rec = app.add_option_group("recommend");
  rec->add_option("--model", c.model, "Trained model name, or 'discount'");
  rec->add_option("--history", c.history, "History TSV");
  rec->add_option("--user", c.user, "User id (default: first in the file)");
  rec->add_option("-k", c.k)->check(CLI::PositiveNumber);
  rec->add_flag("--exclude-heard,!--include-heard", c.exclude_heard,
                "Never recommend songs from the history");
  rec->add_option("--gamma", c.gammas, "Discount factor(s)")
      ->check(CLI::Range(0.0, 1.0));
}

}  // namespace

int main(int argc, char** argv) {
  tasteseq::cli::PipelineConfig config;
  CLI::App app{"Sequence-based song recommendation pipeline"};
  app.set_config("--config", "", "TOML or INI file with option values");
  app.require_subcommand(1, 1);
  app.fallthrough();
  AddOptions(app, config);

  namespace cli = tasteseq::cli;
  const std::map<std::string, std::pair<Step, const char*>> steps = {
      {"gen-data", {cli::GenData, "Generate a synthetic catalog, playlists and histories"}},
      {"filter", {cli::Filter, "Filter playlists"}},
      {"train-embeddings", {cli::TrainEmbeddings, "Train CBoW song vectors"}},
      {"train-model", {cli::TrainModel, "Train a recurrent taste model"}},
      {"train-baseline", {cli::TrainBaseline, "Train a weight or classifier baseline"}},
      {"build-index", {cli::BuildIndex, "Build the nearest-neighbour forest"}},
      {"recommend", {cli::Recommend, "Recommend songs for one listening history"}},
      {"evaluate", {cli::Evaluate, "Write curves and precision reports"}},
      {"stats", {cli::Stats, "Write listening statistics"}},
      {"refresh", {cli::Refresh, "Retrain embeddings, models and index"}},
  };
  for (const auto& [name, step] : steps) app.add_subcommand(name, step.second);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    steps.at(name).first(config, std::cout);
  } catch (const tasteseq::TrainingDiverged& e) {
    std::cerr << name << ": training diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const cli::UsageError& e) {
    std::cerr << name << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const tasteseq::DataError& e) {
    std::cerr << name << ": " << e.what() << '\n';
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << name << ": manifest: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << name << ": " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
