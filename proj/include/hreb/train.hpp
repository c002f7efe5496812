// Copyright 2026 The HREB-CRF Authors
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

#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hreb/config.hpp"
#include "hreb/data.hpp"
#include "hreb/model.hpp"

namespace hreb {

// Corpus splits described by the config: synthetic, explicit paths, or a
// seeded re-split of train_path.
data::Splits load_splits(const RunConfig& cfg);

// Decodes every sentence and scores spans against the gold tags.
data::EvalReport evaluate(const Tagger& model, const data::Corpus& corpus);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  data::Prf valid;
  std::optional<double> train_f1;
};

struct TrainOptions {
  std::string out_dir;  // empty: nothing written
  std::function<void(const EpochRecord&)> on_epoch;
  // Returning true ends training after the epoch is recorded.
  std::function<bool(const EpochRecord&)> stop_when;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 when no epoch improved on the initial model
  double best_f1 = -1.0;
  bool early_stopped = false;
  double embedding_coverage = -1.0;  // only with embeddings=file
  Tagger best;
  Tagger final_model;
};

// Epoch loop: batches → loss → backward → Adam → gate cache update, then a
// validation pass. Keeps the best-validation-F1 model. Non-finite losses or
// gradients abort with a divergence error after the best checkpoint was kept.
TrainResult train(const RunConfig& cfg, const data::Splits& splits, const TrainOptions& opts = {});

// "epoch P R F1 loss" line as written to the metric log.
std::string format_epoch(const EpochRecord& r);

struct AblationRow {
  std::string label;
  std::map<std::string, std::string> overrides;
};

struct AblationResult {
  AblationRow row;
  std::vector<std::string> changed_keys;  // relative to the base config
  std::vector<std::string> param_names;
  data::EvalReport test;
  std::size_t best_epoch = 0;
};

// {naive, hema} × {off, dynamic}.
std::vector<AblationRow> default_ablation_matrix();
// Rows may only override attention, reduced_bias_mode, embeddings and
// embedding_file.
std::vector<AblationResult> ablate(const RunConfig& base, const data::Splits& splits,
                                   const std::vector<AblationRow>& rows);
std::string format_ablation_table(const std::vector<AblationResult>& results);

}  // namespace hreb
