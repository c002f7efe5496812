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

// Runs the nine acceptance criteria and prints one PASS/FAIL/SKIP line each.
// Exit status is 0 unless some criterion failed.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "hreb/checkpoint.hpp"
#include "hreb/error.hpp"
#include "hreb/reduced_bias.hpp"
#include "hreb/rhema.hpp"
#include "hreb/train.hpp"
#include "hreb/verify.hpp"

namespace {

using namespace hreb;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

enum class Outcome { kPass, kFail, kSkip };

struct Verdict {
  Outcome outcome;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string first_failure(const verify::SuiteReport& r) {
  for (const auto& c : r.cases)
    if (!c.passed) return c.name + " err=" + fmt("%.3g", c.error) + " tol=" + fmt("%.3g", c.tolerance);
  return "";
}

Verdict crf_oracle() {
  const auto r = verify::run_crf_suite(200);
  std::size_t instances = 0;
  for (const auto& c : r.cases) instances += c.name.find(".viterbi") != std::string::npos;
  const bool ok = r.passed() && instances >= 200 && r.seconds < 5.0;
  return {ok ? Outcome::kPass : Outcome::kFail,
          std::to_string(instances) + " instances, " + fmt("%.2f s", r.seconds) +
              (r.passed() ? "" : ", first failure: " + first_failure(r))};
}

Verdict gradient_suite() {
  const auto r = verify::run_grad_suite();
  double worst = 0.0;
  std::size_t models = 0;
  for (const auto& c : r.cases) {
    worst = std::max(worst, c.error);
    models += c.name.rfind("model.", 0) == 0;
  }
  const bool ok = r.passed() && r.seconds < 60.0;
  return {ok ? Outcome::kPass : Outcome::kFail,
          std::to_string(r.cases.size()) + " cases (" + std::to_string(models) + " full-model), max rel err " +
              fmt("%.2e", worst) + ", " + fmt("%.1f s", r.seconds) +
              (r.passed() ? "" : ", first failure: " + first_failure(r))};
}

Verdict ema_algebra() {
  const auto r = verify::run_ema_suite();
  double worst = 0.0;
  for (const auto& c : r.cases) worst = std::max(worst, c.error);
  return {r.passed() ? Outcome::kPass : Outcome::kFail,
          std::to_string(r.cases.size()) + " checks, max err " + fmt("%.2e", worst) +
              (r.passed() ? "" : ", first failure: " + first_failure(r))};
}

Tensor seeded(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  for (double& v : t.data()) v = rng.uniform(-1.5, 1.5);
  return t;
}

Verdict gate_identities() {
  std::vector<std::string> broken;
  Rng rng(41);
  {
    rhema::RhemaConfig cfg;
    cfg.d_model = 6;
    cfg.z_dim = 6;
    cfg.v_dim = 10;
    cfg.n_ema_head = 2;
    rhema::RhemaBlock block("blk", cfg);
    ParamStore ps;
    block.init(ps, rng);
    for (auto& [name, p] : ps)
      for (double& v : p.data()) v += rng.uniform(-0.2, 0.2);
    ps.at("blk.w_phi").fill(0.0);
    const Tensor x = seeded(7, 6, rng), z = seeded(7, 6, rng), o = seeded(7, 10, rng);
    auto gated = [&](double phi_bias) {
      ps.at("blk.b_phi").fill(phi_bias);
      Tape t(false);
      return block.gated_output(t, ps, t.input(x), t.input(z), t.input(o)).value();
    };
    // Candidate output rebuilt from the same primitive ops.
    Tape t(false);
    Var gamma = sigmoid(add_row(matmul(t.input(z), t.input(ps.at("blk.w_gamma"))), t.input(ps.at("blk.b_gamma"))));
    Var pre = add(matmul(t.input(z), t.input(ps.at("blk.w_h"))),
                  matmul(mul(gamma, t.input(o)), t.input(ps.at("blk.u_h"))));
    const Tensor y_hat = silu_paper(add_row(pre, t.input(ps.at("blk.b_h")))).value();
    if (gated(1000.0).vec() != y_hat.vec()) broken.push_back("update gate 1 != candidate");
    if (gated(-1000.0).vec() != x.vec()) broken.push_back("update gate 0 != input");
  }
  {
    const Tensor w = seeded(5, 5, rng), x = seeded(8, 5, rng);
    auto run = [&](rb::ResidualMode mode, double a, double b) {
      rb::ReducedBiasResidual res("res", 5, mode);
      ParamStore ps;
      res.init(ps);
      rb::GateState st(mode, 5);
      st.static_alpha = a;
      st.static_beta = b;
      Tape t(false);
      return res.apply(t, ps, st, t.input(x), [&](Var in) { return tanh(matmul(in, t.constant(w))); }).value();
    };
    Tape t(false);
    Var in = t.input(x);
    const Tensor direct = add(tanh(matmul(in, t.constant(w))), in).value();
    const Tensor classic = run(rb::ResidualMode::kClassic, 1.0, 1.0);
    if (classic.vec() != direct.vec()) broken.push_back("classic != F(x) + x");
    if (run(rb::ResidualMode::kStatic, 1.0, 1.0).vec() != classic.vec()) broken.push_back("static(1,1) != classic");
  }
  return {broken.empty() ? Outcome::kPass : Outcome::kFail,
          broken.empty() ? "gate 1/0, classic sum and static unit gates all bitwise exact" : broken.front()};
}

Verdict nll_invariance() {
  const auto r = verify::run_crf_suite(0);
  double rows = -1, shift = -1;
  for (const auto& c : r.cases) {
    if (c.name == "crf.gradient_rows_sum_to_zero") rows = c.error;
    if (c.name == "crf.nll_shift_invariance") shift = c.error;
  }
  const bool ok = rows >= 0 && shift >= 0 && rows <= 1e-9 && shift <= 1e-9;
  return {ok ? Outcome::kPass : Outcome::kFail,
          "shift change " + fmt("%.2e", shift) + ", gradient row sum " + fmt("%.2e", rows)};
}

RunConfig synth_config() {
  RunConfig c;
  c.synth_sentences = 64;
  c.synth_types = 3;
  c.synth_seed = 1;
  c.synth_test_sentences = 64;
  c.synth_test_seed = 2;
  c.d_model = 32;
  c.n_ema_head = 32;
  c.seed = 1;
  return c;
}

Verdict overfit() {
  RunConfig cfg = synth_config();
  cfg.max_epochs = 300;
  cfg.eval_train = true;
  cfg.patience = 0;
  const auto t0 = Clock::now();
  const data::Splits s = load_splits(cfg);
  TrainOptions opts;
  opts.stop_when = [](const EpochRecord& r) { return r.train_f1 && *r.train_f1 >= 0.99; };
  const TrainResult r = train(cfg, s, opts);
  const double secs = seconds_since(t0);
  const double train_f1 = r.history.empty() ? 0.0 : r.history.back().train_f1.value_or(0.0);
  const double held_out = evaluate(r.final_model, s.test).micro.f1;
  const bool ok = train_f1 >= 0.99 && held_out >= 0.80 && secs < 300.0;
  return {ok ? Outcome::kPass : Outcome::kFail,
          "train F1 " + fmt("%.4f", train_f1) + " after " + std::to_string(r.history.size()) + " epochs, held-out F1 " +
              fmt("%.4f", held_out) + ", " + fmt("%.1f s", secs)};
}

Verdict ablation(std::string& table) {
  RunConfig cfg = synth_config();
  cfg.max_epochs = 30;
  const data::Splits s = load_splits(cfg);
  const auto rows = default_ablation_matrix();
  const auto results = ablate(cfg, s, rows);
  table = format_ablation_table(results);
  bool ok = results.size() == 4;
  for (const auto& r : results)
    for (const auto& k : r.changed_keys) ok &= k == "attention" || k == "reduced_bias_mode";
  return {ok ? Outcome::kPass : Outcome::kFail,
          std::to_string(results.size()) + " rows trained from seed " + std::to_string(cfg.seed) +
              ", only the attention and reduced-bias switches differ"};
}

struct Reference {
  const char* name;
  const char* env;
  data::CorpusStats want;
};

Verdict corpus_statistics() {
  // Expected class count, split sizes, average/max/min sentence length.
  const std::vector<Reference> refs = {
      {"weibo", "HREB_WEIBO_DIR", {8, 1350, 269, 270, 54.61, 175, 7}},
      {"msra", "HREB_MSRA_DIR", {3, 46364, 4365, 4365, 46.80, 581, 5}},
      {"resume", "HREB_RESUME_DIR", {8, 3821, 463, 477, 32.47, 178, 3}},
  };
  std::vector<std::string> missing, mismatches, checked;
  for (const auto& ref : refs) {
    const char* dir = std::getenv(ref.env);
    if (!dir || !*dir) {
      missing.push_back(ref.env);
      continue;
    }
    data::CorpusStats got;
    try {
      got = data::corpus_stats(data::load_corpus_splits(dir));
    } catch (const std::exception& e) {
      mismatches.push_back(std::string(ref.name) + ": " + e.what());
      continue;
    }
    const auto& w = ref.want;
    std::ostringstream bad;
    auto count = [&](const char* what, std::size_t g, std::size_t e) {
      if (g != e) bad << ' ' << what << ' ' << g << "!=" << e;
    };
    count("class", got.classes, w.classes);
    count("train", got.train, w.train);
    count("valid", got.valid, w.valid);
    count("test", got.test, w.test);
    count("max", got.max_length, w.max_length);
    count("min", got.min_length, w.min_length);
    if (std::abs(got.avg_length - w.avg_length) > 0.01 + 1e-9)
      bad << " avg " << fmt("%.4f", got.avg_length) << "!=" << fmt("%.2f", w.avg_length);
    if (bad.str().empty()) checked.push_back(ref.name);
    else mismatches.push_back(std::string(ref.name) + ":" + bad.str());
  }
  if (!mismatches.empty()) return {Outcome::kFail, mismatches.front()};
  if (checked.empty()) return {Outcome::kSkip, "no corpus supplied (set HREB_WEIBO_DIR, HREB_MSRA_DIR, HREB_RESUME_DIR)"};
  std::string names;
  for (const auto& n : checked) names += (names.empty() ? "" : ", ") + n;
  return {Outcome::kPass, "matched " + names + (missing.empty() ? "" : "; " + std::to_string(missing.size()) + " not supplied")};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Verdict determinism() {
  RunConfig cfg = synth_config();
  cfg.max_epochs = 5;
  const data::Splits s = load_splits(cfg);
  const fs::path root = fs::temp_directory_path() / ("hreb_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  TrainOptions a, b;
  a.out_dir = (root / "a").string();
  b.out_dir = (root / "b").string();
  const TrainResult ra = train(cfg, s, a);
  train(cfg, s, b);
  const bool logs_equal = slurp(root / "a" / "metrics.log") == slurp(root / "b" / "metrics.log") &&
                          !slurp(root / "a" / "metrics.log").empty();

  const Tagger loaded = load_checkpoint((root / "a" / "final.ckpt").string());
  bool preds_equal = true, scores_equal = true;
  for (const auto& sent : s.test) {
    preds_equal &= loaded.predict(sent.tokens) == ra.final_model.predict(sent.tokens);
    const auto ids = data::encode({sent}, ra.final_model.vocab())[0].ids;
    Tape t(false);
    scores_equal &= loaded.emissions(t, ids, ids.size()).value().vec() ==
                    ra.final_model.emissions(t, ids, ids.size()).value().vec();
  }
  fs::remove_all(root);
  const bool ok = logs_equal && preds_equal && scores_equal;
  return {ok ? Outcome::kPass : Outcome::kFail,
          std::string("metric logs ") + (logs_equal ? "identical" : "differ") + ", reloaded predictions " +
              (preds_equal && scores_equal ? "bit-identical" : "differ")};
}

}  // namespace

int main() {
  std::string ablation_table;
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"CRF oracle equivalence", crf_oracle},
      {"gradient suite", gradient_suite},
      {"EMA algebra", ema_algebra},
      {"gate identities", gate_identities},
      {"CRF NLL invariance", nll_invariance},
      {"overfit capacity", overfit},
      {"ablation harness", [&] { return ablation(ablation_table); }},
      {"corpus statistics", corpus_statistics},
      {"determinism and round-trip", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {Outcome::kFail, std::string("error: ") + e.what()};
    }
    const char* tag = v.outcome == Outcome::kPass ? "PASS" : v.outcome == Outcome::kFail ? "FAIL" : "SKIP";
    failed += v.outcome == Outcome::kFail;
    std::cout << tag << "  " << (i + 1) << ". " << criteria[i].first << ": " << v.detail << std::endl;
    if (i == 6 && !ablation_table.empty()) std::cout << ablation_table;
  }
  return failed == 0 ? 0 : 1;
}
