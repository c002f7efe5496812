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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hreb/rhema.hpp"

namespace hreb {

// Flat key=value run settings. Field names match the file keys.
struct RunConfig {
  // corpus
  std::string train_path;
  std::string valid_path;
  std::string test_path;
  std::string valid_alias = "none";  // none|test
  bool resplit = false;              // split train_path 7:1.5:1.5
  std::uint64_t split_seed = 1;
  std::size_t synth_sentences = 0;  // > 0 replaces the corpus paths
  std::size_t synth_types = 3;
  std::uint64_t synth_seed = 1;
  std::size_t synth_test_sentences = 64;
  std::uint64_t synth_test_seed = 2;
  std::string embeddings = "scratch";  // scratch|file
  std::string embedding_file;

  // model
  std::size_t d_model = 64;
  std::size_t z_dim = 0;  // 0 follows d_model
  std::size_t v_dim = 128;
  std::size_t n_ema_head = 64;  // 0: one head per model dimension
  std::size_t chunk_size = 8;
  double daleth = 0.0;
  std::size_t rel_bias_window = 16;
  std::size_t h_lstm = 32;
  std::string attention = "hema";  // hema|naive
  std::string attn_fn = "reduced_laplace";
  std::string silu_variant = "paper";
  std::string norm = "layer";  // layer|batch
  std::string reduced_bias_mode = "dynamic";
  double static_alpha = 1.0;
  double static_beta = 1.0;
  double gate_momentum = 0.9;
  std::string loss = "crf";  // crf|token
  bool strict_transitions = false;
  std::string span_mode = "lenient";

  // optimization
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 0.0;  // 0 disables
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;  // 0 disables early stopping
  bool eval_train = false;    // also score the training split every epoch

  // Sets one key from its text form; unknown keys and bad values throw
  // config errors naming the key.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  // Validates and fills derived defaults (z_dim, n_ema_head).
  RunConfig effective() const;
  rhema::RhemaConfig rhema() const;
  // One "key=value" line per key in keys() order.
  std::string to_text() const;
};

RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

}  // namespace hreb
