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

#include "hreb/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hreb/checkpoint.hpp"
#include "hreb/error.hpp"

namespace hreb {

namespace fs = std::filesystem;

data::Splits load_splits(const RunConfig& raw) {
  const RunConfig cfg = raw.effective();
  data::Splits s;
  if (cfg.synth_sentences > 0) {
    if (cfg.synth_test_sentences == 0)
      fail(ErrorKind::kConfig, "config key 'synth_test_sentences': must be positive for a synthetic run");
    s.train = data::synth_corpus(cfg.synth_seed, cfg.synth_sentences, cfg.synth_types);
    s.test = data::synth_corpus(cfg.synth_test_seed, cfg.synth_test_sentences, cfg.synth_types);
    s.valid = s.test;
    s.valid_is_test = true;
    return s;
  }
  if (cfg.train_path.empty())
    fail(ErrorKind::kConfig, "config key 'train_path': missing corpus path (or set synth_sentences)");
  if (cfg.resplit) {
    s = data::split_corpus(data::parse_conll_file(cfg.train_path), cfg.split_seed);
    return s;
  }
  s.train = data::parse_conll_file(cfg.train_path);
  if (!cfg.test_path.empty()) s.test = data::parse_conll_file(cfg.test_path);
  if (cfg.valid_alias == "test") {
    if (cfg.test_path.empty()) fail(ErrorKind::kConfig, "config key 'test_path': required when valid_alias=test");
    s.valid = s.test;
    s.valid_is_test = true;
  } else if (!cfg.valid_path.empty()) {
    s.valid = data::parse_conll_file(cfg.valid_path);
  } else {
    fail(ErrorKind::kConfig, "config key 'valid_path': missing corpus path (or set valid_alias=test)");
  }
  return s;
}

data::EvalReport evaluate(const Tagger& model, const data::Corpus& corpus) {
  const data::SpanMode gold_mode = data::parse_span_mode(model.config().span_mode);
  std::vector<std::vector<data::Span>> gold, pred;
  gold.reserve(corpus.size());
  pred.reserve(corpus.size());
  for (const auto& s : corpus) {
    gold.push_back(data::decode_spans(s.tags, gold_mode));
    const auto tags = model.predict(s.tokens);
    pred.push_back(data::decode_spans(tags, data::SpanMode::kLenient));
  }
  return data::span_prf(gold, pred);
}

std::string format_epoch(const EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu %.6f %.6f %.6f %.9f", r.epoch, r.valid.precision, r.valid.recall, r.valid.f1,
                r.loss);
  return buf;
}

namespace {

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  return seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(epoch) * 0xBF58476D1CE4E5B9ull;
}

void update_gates(Tagger& model, const Tape& tape, const std::vector<std::vector<rb::GateProbe>>& probes) {
  const double momentum = model.config().gate_momentum;
  for (std::size_t k = 0; k < model.gates().size(); ++k) {
    rb::GateState& g = model.gates()[k];
    if (g.mode != rb::ResidualMode::kDynamic) continue;
    std::vector<Tensor> gf, gx;
    for (const rb::GateProbe& p : probes[k]) {
      auto rows = [&](int id) {
        const Tensor& full = tape.grad(id);
        if (full.size() == 0) return Tensor({p.rows, full.cols() ? full.cols() : g.cache_f.size()});
        return Tensor({p.rows, full.cols()},
                      std::vector<double>(full.data().begin(), full.data().begin() + p.rows * full.cols()));
      };
      gf.push_back(rows(p.f_id));
      gx.push_back(rows(p.x_id));
    }
    rb::update_gate_cache(g, gf, gx, momentum);
  }
}

nlohmann::json prf_json(const data::Prf& p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1},
          {"gold", p.gold},           {"predicted", p.predicted}, {"correct", p.correct}};
}

}  // namespace

TrainResult train(const RunConfig& raw, const data::Splits& splits, const TrainOptions& opts) {
  const RunConfig cfg = raw.effective();
  if (splits.train.empty()) fail(ErrorKind::kData, "train: empty training split");
  if (splits.valid.empty()) fail(ErrorKind::kData, "train: empty validation split");

  data::Vocab vocab = data::Vocab::build(splits.train);
  for (const data::Corpus* c : {&splits.valid, &splits.test})
    for (const auto& s : *c)
      for (const auto& t : s.tags) vocab.add_tag(t);

  TrainResult res;
  Tagger model(cfg, vocab);
  if (cfg.embeddings == "file") {
    Rng rng(cfg.seed ^ 0x5DEECE66Dull);
    auto loaded = enc::load_embedding_file(cfg.embedding_file, model.vocab().tokens(), cfg.d_model, rng);
    model.params().at("embed.table") = std::move(loaded.table);
    res.embedding_coverage = loaded.coverage;
  }

  std::ofstream log;
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    log.open(fs::path(opts.out_dir) / "metrics.log", std::ios::binary | std::ios::trunc);
    if (!log) fail(ErrorKind::kData, "cannot write metric log in '" + opts.out_dir + "'");
    if (cfg.resplit) {
      std::ofstream split_file(fs::path(opts.out_dir) / "splits.txt", std::ios::binary | std::ios::trunc);
      data::write_split_indices(split_file, data::split_indices(splits.train.size() + splits.valid.size() + splits.test.size(),
                                                          cfg.split_seed));
    }
    std::istringstream echo(cfg.to_text());
    for (std::string line; std::getline(echo, line);) log << "# " << line << '\n';
    log << "# epoch P R F1 loss\n";
  }
  auto save = [&](const char* name, const Tagger& m) {
    if (!opts.out_dir.empty()) save_checkpoint((fs::path(opts.out_dir) / name).string(), m);
  };

  const std::vector<data::Encoded> enc_train = data::encode(splits.train, model.vocab());
  AdamState adam;
  adam.config = AdamConfig{cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps};

  res.best = model;
  res.best_f1 = evaluate(model, splits.valid).micro.f1;
  save("best.ckpt", model);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    try {
      for (const data::Batch& batch : data::make_batches(enc_train, cfg.batch_size, epoch_seed(cfg.seed, epoch))) {
        Tape tape;
        std::vector<std::vector<rb::GateProbe>> probes;
        Var loss = model.batch_loss(tape, batch, &probes);
        const double lv = loss.value().item();
        if (!std::isfinite(lv)) fail(ErrorKind::kDivergence, "non-finite loss");
        tape.backward(loss);
        GradMap grads = collect_grads(tape, model.params());
        if (cfg.grad_clip > 0.0) clip_grad_norm(grads, cfg.grad_clip);
        adam_step(model.params(), grads, adam);
        update_gates(model, tape, probes);
        loss_sum += lv * static_cast<double>(batch.ids.size());
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNumeric && e.kind() != ErrorKind::kDivergence) throw;
      if (log) log.flush();
      fail(ErrorKind::kDivergence, "training diverged at epoch " + std::to_string(epoch) + ": " + e.what() +
                                       (opts.out_dir.empty() ? "" : " (best checkpoint kept)"));
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(enc_train.size());
    rec.valid = evaluate(model, splits.valid).micro;
    if (cfg.eval_train) rec.train_f1 = evaluate(model, splits.train).micro.f1;
    res.history.push_back(rec);
    if (log) log << format_epoch(rec) << '\n';
    if (opts.on_epoch) opts.on_epoch(rec);

    if (rec.valid.f1 > res.best_f1) {
      res.best_f1 = rec.valid.f1;
      res.best_epoch = epoch;
      res.best = model;
      save("best.ckpt", model);
    } else if (cfg.patience > 0 && epoch - res.best_epoch >= cfg.patience) {
      res.early_stopped = true;
      break;
    }
    if (opts.stop_when && opts.stop_when(rec)) break;
  }
  res.final_model = model;
  save("final.ckpt", model);

  if (!opts.out_dir.empty()) {
    nlohmann::json j;
    j["best_epoch"] = res.best_epoch;
    j["best_valid_f1"] = res.best_f1;
    j["epochs_run"] = res.history.size();
    j["early_stopped"] = res.early_stopped;
    if (res.embedding_coverage >= 0) j["embedding_coverage"] = res.embedding_coverage;
    if (!res.history.empty()) {
      j["final_loss"] = res.history.back().loss;
      j["final_valid"] = prf_json(res.history.back().valid);
    }
    if (!splits.test.empty()) j["best_test"] = prf_json(evaluate(res.best, splits.test).micro);
    nlohmann::json c;
    for (const auto& k : RunConfig::keys()) c[k] = cfg.get(k);
    j["config"] = c;
    std::ofstream out(fs::path(opts.out_dir) / "summary.json", std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
  }
  return res;
}

// ---- Ablation --------------------------------------------------------------

std::vector<AblationRow> default_ablation_matrix() {
  return {
      {"naive attention, no reduced-bias", {{"attention", "naive"}, {"reduced_bias_mode", "off"}}},
      {"naive attention, dynamic reduced-bias", {{"attention", "naive"}, {"reduced_bias_mode", "dynamic"}}},
      {"hierarchical EMA attention, no reduced-bias", {{"attention", "hema"}, {"reduced_bias_mode", "off"}}},
      {"hierarchical EMA attention, dynamic reduced-bias", {{"attention", "hema"}, {"reduced_bias_mode", "dynamic"}}},
  };
}

std::vector<AblationResult> ablate(const RunConfig& base, const data::Splits& splits,
                                   const std::vector<AblationRow>& rows) {
  static const std::set<std::string> switches = {"attention", "reduced_bias_mode", "embeddings", "embedding_file"};
  const RunConfig eff = base.effective();
  std::vector<AblationResult> out;
  for (const AblationRow& row : rows) {
    RunConfig cfg = eff;
    for (const auto& [k, v] : row.overrides) {
      if (!switches.count(k))
        fail(ErrorKind::kConfig, "ablation row '" + row.label + "': key '" + k + "' is not an ablation switch");
      cfg.set(k, v);
    }
    AblationResult r;
    r.row = row;
    for (const auto& k : RunConfig::keys())
      if (cfg.get(k) != eff.get(k)) r.changed_keys.push_back(k);
    TrainResult tr = train(cfg, splits);
    r.param_names = tr.best.params().names();
    r.best_epoch = tr.best_epoch;
    r.test = evaluate(tr.best, splits.test.empty() ? splits.valid : splits.test);
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_ablation_table(const std::vector<AblationResult>& results) {
  std::ostringstream os;
  os << std::left << std::setw(6) << "S.N." << std::setw(52) << "Model" << std::right << std::setw(9) << "P"
     << std::setw(9) << "R" << std::setw(9) << "F1" << '\n';
  os << std::fixed << std::setprecision(2);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& m = results[i].test.micro;
    os << std::left << std::setw(6) << (i + 1) << std::setw(52) << results[i].row.label << std::right << std::setw(9)
       << 100.0 * m.precision << std::setw(9) << 100.0 * m.recall << std::setw(9) << 100.0 * m.f1 << '\n';
  }
  return os.str();
}

}  // namespace hreb
