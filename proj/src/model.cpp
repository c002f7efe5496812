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

#include "hreb/model.hpp"

#include "hreb/error.hpp"
#include "hreb/ops.hpp"

namespace hreb {

Tagger::Tagger(const RunConfig& cfg, data::Vocab vocab) : cfg_(cfg.effective()), vocab_(std::move(vocab)) {
  require(vocab_.tag_count() >= 1, ErrorKind::kData, "tagger: empty tag set");
  const rhema::RhemaConfig rc = cfg_.rhema();
  const std::size_t d = cfg_.d_model, c = vocab_.tag_count();
  Rng rng(cfg_.seed);

  params_.add("embed.table", enc::init_embedding(vocab_.token_count(), d, rng));
  if (cfg_.attention == "naive") {
    naive_ = rhema::NaiveAttentionBlock("naive", rc);
    naive_.init(params_, rng);
  } else {
    hier_ = rhema::HierarchicalEncoder("encoder", rc);
    hier_.init(params_, rng);
  }
  lstm_ = enc::BiLstm("lstm", d, cfg_.h_lstm);
  lstm_.init(params_, rng);
  params_.add("proj.w", glorot(2 * cfg_.h_lstm, c, rng));
  params_.add("proj.b", Tensor({1, c}));

  open_ = cfg_.strict_transitions ? crf::Transitions::strict_bio(vocab_.tags()) : crf::Transitions(c);
  if (uses_crf()) params_.add("crf.trans", crf::init_transitions(open_));

  for (std::size_t k = 0; k < residual_names().size(); ++k) {
    rb::GateState g(rc.residual, d);
    g.static_alpha = rc.static_alpha;
    g.static_beta = rc.static_beta;
    gates_.push_back(std::move(g));
  }
}

std::vector<std::string> Tagger::residual_names() const {
  return cfg_.attention == "naive" ? naive_.residual_names() : hier_.residual_names();
}

Var Tagger::emissions(Tape& tape, std::span<const int> ids, std::size_t length, std::vector<rb::GateProbe>* probes,
                      std::vector<rhema::AttentionTrace>* traces) const {
  require(length >= 1 && length <= ids.size(), ErrorKind::kContract, "tagger: bad sentence length");
  Var x = enc::embed_tokens(params_.bind(tape, "embed.table"), ids);
  Var h = cfg_.attention == "naive" ? naive_.forward(tape, params_, gates_, x, length, probes, traces)
                                    : hier_.forward(tape, params_, gates_, x, length, probes, traces);
  Var l = lstm_.forward(tape, params_, h, length);
  return add_row(matmul(l, params_.bind(tape, "proj.w")), params_.bind(tape, "proj.b"));
}

Var Tagger::sentence_loss(Tape& tape, const data::Encoded& s) const {
  Var em = emissions(tape, s.ids, s.ids.size());
  if (uses_crf()) return crf::crf_nll(em, params_.bind(tape, "crf.trans"), s.tags, open_);
  return crf::token_nll_logits(em, s.tags);
}

Var Tagger::batch_loss(Tape& tape, const data::Batch& batch,
                       std::vector<std::vector<rb::GateProbe>>* probes) const {
  require(!batch.ids.empty(), ErrorKind::kContract, "tagger: empty batch");
  if (probes) probes->assign(gates_.size(), {});
  Var total;
  for (std::size_t b = 0; b < batch.ids.size(); ++b) {
    std::vector<rb::GateProbe> local;
    const std::size_t len = batch.lengths[b];
    Var em = slice_rows(emissions(tape, batch.ids[b], len, probes ? &local : nullptr), 0, len);
    std::span<const int> gold(batch.tags[b].data(), len);
    Var l = uses_crf() ? crf::crf_nll(em, params_.bind(tape, "crf.trans"), gold, open_)
                       : crf::token_nll_logits(em, gold);
    total = total.valid() ? add(total, l) : l;
    if (probes)
      for (std::size_t k = 0; k < local.size(); ++k) (*probes)[k].push_back(local[k]);
  }
  return scale(total, 1.0 / static_cast<double>(batch.ids.size()));
}

std::vector<int> Tagger::predict_ids(std::span<const int> ids) const {
  if (ids.empty()) return {};
  Tape tape(false);
  const Tensor& em = emissions(tape, ids, ids.size()).value();
  if (uses_crf()) return crf::viterbi(em, params_.at("crf.trans"), open_).path;
  std::vector<int> out(em.rows());
  for (std::size_t t = 0; t < em.rows(); ++t) {
    int best = 0;
    for (std::size_t j = 1; j < em.cols(); ++j)
      if (em.at(t, j) > em.at(t, best)) best = static_cast<int>(j);
    out[t] = best;
  }
  return out;
}

std::vector<std::string> Tagger::predict(std::span<const std::string> tokens) const {
  std::vector<int> ids;
  for (const auto& t : tokens) ids.push_back(vocab_.token_id(t));
  std::vector<std::string> out;
  for (int y : predict_ids(ids)) out.push_back(vocab_.tags()[y]);
  return out;
}

}  // namespace hreb
