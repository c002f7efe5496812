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

#include <span>
#include <string>
#include <vector>

#include "hreb/config.hpp"
#include "hreb/crf.hpp"
#include "hreb/data.hpp"
#include "hreb/encoders.hpp"
#include "hreb/rhema.hpp"

namespace hreb {

// embed → (hierarchical | naive) attention → BiLSTM → affine 2h→C → CRF or
// token-level softmax.
class Tagger {
 public:
  Tagger() = default;
  // Seeded random initialization from cfg.seed.
  Tagger(const RunConfig& cfg, data::Vocab vocab);

  // [seq×C] scores for one (possibly padded) sentence whose first `length`
  // ids are real.
  Var emissions(Tape& tape, std::span<const int> ids, std::size_t length, std::vector<rb::GateProbe>* probes = nullptr,
                std::vector<rhema::AttentionTrace>* traces = nullptr) const;
  // Mean sentence loss over a batch; probes[k] collects residual k's probes.
  Var batch_loss(Tape& tape, const data::Batch& batch, std::vector<std::vector<rb::GateProbe>>* probes = nullptr) const;
  Var sentence_loss(Tape& tape, const data::Encoded& sentence) const;

  std::vector<int> predict_ids(std::span<const int> ids) const;
  std::vector<std::string> predict(std::span<const std::string> tokens) const;

  // Residual names in gate order.
  std::vector<std::string> residual_names() const;

  const RunConfig& config() const noexcept { return cfg_; }
  const data::Vocab& vocab() const noexcept { return vocab_; }
  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }
  std::vector<rb::GateState>& gates() noexcept { return gates_; }
  const std::vector<rb::GateState>& gates() const noexcept { return gates_; }
  const crf::Transitions& transitions() const noexcept { return open_; }
  bool uses_crf() const noexcept { return cfg_.loss == "crf"; }

 private:
  RunConfig cfg_;
  data::Vocab vocab_;
  ParamStore params_;
  std::vector<rb::GateState> gates_;
  crf::Transitions open_;
  rhema::HierarchicalEncoder hier_;
  rhema::NaiveAttentionBlock naive_;
  enc::BiLstm lstm_;
};

}  // namespace hreb
