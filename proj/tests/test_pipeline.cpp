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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <unistd.h>

#include "hreb/checkpoint.hpp"
#include "hreb/error.hpp"
#include "hreb/train.hpp"

namespace hreb {
namespace {

namespace fs = std::filesystem;

ErrorKind kind_of(const std::function<void()>& f, std::string* what = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (what) *what = e.what();
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kContract;
}

// Small enough that a handful of epochs runs in well under a second.
RunConfig tiny(const std::string& mode = "dynamic") {
  RunConfig c;
  c.synth_sentences = 16;
  c.synth_test_sentences = 8;
  c.d_model = 8;
  c.v_dim = 8;
  c.n_ema_head = 2;
  c.h_lstm = 4;
  c.batch_size = 4;
  c.max_epochs = 3;
  c.lr = 0.01;
  c.reduced_bias_mode = mode;
  return c;
}

std::string history_text(const TrainResult& r) {
  std::string s;
  for (const auto& e : r.history) s += format_epoch(e) + "\n";
  return s;
}

bool same_params(const Tagger& a, const Tagger& b) {
  if (a.params().names() != b.params().names()) return false;
  for (const auto& n : a.params().names())
    if (a.params().at(n).vec() != b.params().at(n).vec()) return false;
  return true;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("hreb_pipe_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TEST(Config, SetGetAndTextRoundTrip) {
  RunConfig c;
  c.set("d_model", "16");
  c.set("attn_fn", "softmax");
  c.set("eval_train", "true");
  c.set("lr", "0.25");
  EXPECT_EQ(c.d_model, 16u);
  EXPECT_EQ(c.get("attn_fn"), "softmax");
  EXPECT_TRUE(c.eval_train);
  const RunConfig back = parse_config(c.to_text());
  for (const auto& k : RunConfig::keys()) EXPECT_EQ(back.get(k), c.get(k)) << k;
  EXPECT_EQ(back.lr, 0.25);
}

TEST(Config, ParsesCommentsAndBlankLines) {
  const RunConfig c = parse_config("# a comment\n\n  seed = 7 \nnorm=batch\n");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.norm, "batch");
}

TEST(Config, ErrorsNameTheKey) {
  RunConfig c;
  std::string what;
  EXPECT_EQ(kind_of([&] { c.set("d_modle", "3"); }, &what), ErrorKind::kConfig);
  EXPECT_NE(what.find("d_modle"), std::string::npos);
  EXPECT_EQ(kind_of([&] { c.set("d_model", "three"); }, &what), ErrorKind::kConfig);
  EXPECT_NE(what.find("d_model"), std::string::npos);
  EXPECT_EQ(kind_of([&] { c.set("attention", "sparse"); }), ErrorKind::kConfig);
  EXPECT_EQ(kind_of([&] { parse_config("seed\n", "run.cfg"); }, &what), ErrorKind::kConfig);
  EXPECT_NE(what.find("run.cfg:1"), std::string::npos);
  EXPECT_EQ(kind_of([] { load_config("/nonexistent/run.cfg"); }), ErrorKind::kConfig);
}

TEST(Config, EffectiveDefaultsAndValidation) {
  RunConfig c;
  c.d_model = 12;
  c.n_ema_head = 4;
  EXPECT_EQ(c.effective().z_dim, 12u);
  c.z_dim = 6;
  std::string what;
  EXPECT_EQ(kind_of([&] { c.effective(); }, &what), ErrorKind::kConfig);
  EXPECT_NE(what.find("z_dim"), std::string::npos);
  c.z_dim = 0;
  c.n_ema_head = 5;
  EXPECT_EQ(kind_of([&] { c.effective(); }, &what), ErrorKind::kConfig);
  EXPECT_NE(what.find("n_ema_head"), std::string::npos);
  c.n_ema_head = 4;
  c.gate_momentum = 1.0;
  EXPECT_EQ(kind_of([&] { c.effective(); }), ErrorKind::kConfig);
}

TEST(LoadSplits, MissingTrainPathNamesTheKey) {
  RunConfig c;
  std::string what;
  EXPECT_EQ(kind_of([&] { load_splits(c); }, &what), ErrorKind::kConfig);
  EXPECT_NE(what.find("train_path"), std::string::npos);
  c.train_path = "/nonexistent/train.txt";
  EXPECT_EQ(kind_of([&] { load_splits(c); }), ErrorKind::kData);
}

TEST(LoadSplits, SyntheticRunAliasesValidToTest) {
  const data::Splits s = load_splits(tiny());
  EXPECT_EQ(s.train.size(), 16u);
  EXPECT_EQ(s.test.size(), 8u);
  EXPECT_TRUE(s.valid_is_test);
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  const RunConfig cfg = tiny();
  const TrainResult r = train(cfg, load_splits(cfg));
  std::stringstream ss;
  save_checkpoint(ss, r.final_model);
  const Tagger back = load_checkpoint(ss);
  EXPECT_TRUE(same_params(back, r.final_model));
  ASSERT_EQ(back.gates().size(), r.final_model.gates().size());
  for (std::size_t k = 0; k < back.gates().size(); ++k)
    EXPECT_EQ(back.gates()[k].cache_f.vec(), r.final_model.gates()[k].cache_f.vec());
  for (const auto& s : load_splits(cfg).test) EXPECT_EQ(back.predict(s.tokens), r.final_model.predict(s.tokens));
  EXPECT_EQ(back.config().to_text(), r.final_model.config().to_text());
}

TEST(Checkpoint, CorruptInputsAreCheckpointErrors) {
  const RunConfig cfg = tiny();
  std::stringstream ss;
  save_checkpoint(ss, Tagger(cfg.effective(), data::Vocab::build(load_splits(cfg).train)));
  const std::string good = ss.str();

  std::string bumped = good;
  bumped[4] = static_cast<char>(kCheckpointVersion + 1);
  std::string what;
  std::istringstream v(bumped);
  EXPECT_EQ(kind_of([&] { load_checkpoint(v); }, &what), ErrorKind::kCheckpoint);
  EXPECT_NE(what.find("version"), std::string::npos);

  std::istringstream magic("XXXX" + good.substr(4));
  EXPECT_EQ(kind_of([&] { load_checkpoint(magic); }), ErrorKind::kCheckpoint);
  std::istringstream cut(good.substr(0, good.size() / 2));
  EXPECT_EQ(kind_of([&] { load_checkpoint(cut); }), ErrorKind::kCheckpoint);
  EXPECT_EQ(kind_of([] { load_checkpoint("/nonexistent/x.ckpt"); }), ErrorKind::kCheckpoint);
}

TEST(Training, ZeroLearningRateKeepsLossAndParameters) {
  RunConfig cfg = tiny("off");
  cfg.lr = 0.0;
  cfg.patience = 0;
  const data::Splits s = load_splits(cfg);
  const Tagger init(cfg.effective(), [&] {
    data::Vocab v = data::Vocab::build(s.train);
    for (const auto& x : s.test)
      for (const auto& t : x.tags) v.add_tag(t);
    return v;
  }());
  const TrainResult r = train(cfg, s);
  ASSERT_EQ(r.history.size(), 3u);
  for (const auto& e : r.history) EXPECT_NEAR(e.loss, r.history[0].loss, 1e-12);
  EXPECT_TRUE(same_params(r.final_model, init));
  EXPECT_EQ(r.best_epoch, 0u);
}

TEST(Training, SeededRunsWriteIdenticalMetricLogs) {
  const RunConfig cfg = tiny();
  TempDir a("a"), b("b");
  TrainOptions oa, ob;
  oa.out_dir = a.path.string();
  ob.out_dir = b.path.string();
  const data::Splits s = load_splits(cfg);
  const TrainResult ra = train(cfg, s, oa), rb = train(cfg, s, ob);
  EXPECT_EQ(history_text(ra), history_text(rb));
  EXPECT_EQ(slurp(a.path / "metrics.log"), slurp(b.path / "metrics.log"));
  EXPECT_TRUE(same_params(ra.final_model, rb.final_model));
  for (const char* f : {"best.ckpt", "final.ckpt", "summary.json"}) EXPECT_TRUE(fs::exists(a.path / f)) << f;

  RunConfig other = cfg;
  other.seed = 2;
  EXPECT_NE(history_text(train(other, s)), history_text(ra));
}

TEST(Training, BestCheckpointMatchesBestValidationScore) {
  RunConfig cfg = tiny();
  cfg.max_epochs = 6;
  cfg.lr = 0.02;
  TempDir dir("best");
  TrainOptions o;
  o.out_dir = dir.path.string();
  const data::Splits s = load_splits(cfg);
  const TrainResult r = train(cfg, s, o);
  EXPECT_DOUBLE_EQ(evaluate(r.best, s.valid).micro.f1, r.best_f1);
  for (const auto& e : r.history) EXPECT_LE(e.valid.f1, r.best_f1);
  EXPECT_TRUE(same_params(load_checkpoint((dir.path / "best.ckpt").string()), r.best));
  EXPECT_TRUE(same_params(load_checkpoint((dir.path / "final.ckpt").string()), r.final_model));
}

TEST(Training, ResplitWritesSplitIndices) {
  TempDir dir("resplit");
  fs::create_directories(dir.path);
  {
    std::ofstream out(dir.path / "all.txt");
    data::write_conll(out, data::synth_corpus(3, 20, 2));
  }
  RunConfig cfg = tiny();
  cfg.synth_sentences = 0;
  cfg.train_path = (dir.path / "all.txt").string();
  cfg.resplit = true;
  cfg.max_epochs = 1;
  const data::Splits s = load_splits(cfg);
  EXPECT_EQ(s.train.size() + s.valid.size() + s.test.size(), 20u);
  TrainOptions o;
  o.out_dir = (dir.path / "run").string();
  train(cfg, s, o);
  std::ostringstream want;
  data::write_split_indices(want, data::split_indices(20, cfg.split_seed));
  EXPECT_EQ(slurp(dir.path / "run" / "splits.txt"), want.str());
}

TEST(Training, PatienceStopsEarly) {
  RunConfig cfg = tiny("off");
  cfg.lr = 0.0;
  cfg.patience = 2;
  cfg.max_epochs = 10;
  const TrainResult r = train(cfg, load_splits(cfg));
  EXPECT_TRUE(r.early_stopped);
  EXPECT_EQ(r.history.size(), 2u);
}

TEST(Training, EvalTrainRecordsTrainF1) {
  RunConfig cfg = tiny();
  cfg.max_epochs = 1;
  cfg.eval_train = true;
  const TrainResult r = train(cfg, load_splits(cfg));
  ASSERT_TRUE(r.history[0].train_f1.has_value());
  EXPECT_GE(*r.history[0].train_f1, 0.0);
}

TEST(Model, PaddingDoesNotChangeRealPositions) {
  for (const char* attention : {"hema", "naive"})
    for (const char* norm : {"layer", "batch"}) {
      RunConfig cfg = tiny();
      cfg.attention = attention;
      cfg.norm = norm;
      cfg.chunk_size = 3;
      const data::Splits s = load_splits(cfg);
      const Tagger m(cfg.effective(), data::Vocab::build(s.train));
      const auto enc = data::encode({s.train[0]}, m.vocab())[0];
      std::vector<int> padded = enc.ids;
      for (int k = 0; k < 7; ++k) padded.push_back(k % 2 ? 0 : 3);
      Tape t(false);
      const Tensor a = m.emissions(t, enc.ids, enc.ids.size()).value();
      const Tensor b = m.emissions(t, padded, enc.ids.size()).value();
      for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t c = 0; c < a.cols(); ++c) EXPECT_NEAR(a.at(i, c), b.at(i, c), 1e-9) << attention << norm;
    }
}

TEST(Model, TokenLossAndStrictTransitionsTrain) {
  RunConfig cfg = tiny();
  cfg.loss = "token";
  cfg.max_epochs = 1;
  EXPECT_NO_THROW(train(cfg, load_splits(cfg)));
  cfg.loss = "crf";
  cfg.strict_transitions = true;
  const TrainResult r = train(cfg, load_splits(cfg));
  for (const auto& s : load_splits(cfg).test)
    EXPECT_NO_THROW(data::decode_spans(r.final_model.predict(s.tokens), data::SpanMode::kStrict));
}

TEST(Ablation, MatrixShapeAndConfigAudit) {
  const auto rows = default_ablation_matrix();
  ASSERT_EQ(rows.size(), 4u);
  RunConfig cfg = tiny();
  cfg.max_epochs = 1;
  const data::Splits s = load_splits(cfg);
  const auto results = ablate(cfg, s, rows);
  ASSERT_EQ(results.size(), 4u);
  EXPECT_EQ(results[0].changed_keys, (std::vector<std::string>{"attention", "reduced_bias_mode"}));
  EXPECT_EQ(results[1].changed_keys, (std::vector<std::string>{"attention"}));
  EXPECT_EQ(results[2].changed_keys, (std::vector<std::string>{"reduced_bias_mode"}));
  EXPECT_TRUE(results[3].changed_keys.empty());
  // The naive rows carry no EMA or hierarchical parameters.
  for (int k : {0, 1}) {
    std::set<std::string> hema(results[3].param_names.begin(), results[3].param_names.end());
    for (const auto& n : results[k].param_names) {
      EXPECT_EQ(n.find("encoder."), std::string::npos) << n;
      EXPECT_EQ(n.find("ema"), std::string::npos) << n;
    }
    EXPECT_NE(results[k].param_names, results[3].param_names);
  }
  const std::string table = format_ablation_table(results);
  EXPECT_NE(table.find("S.N."), std::string::npos);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 5);
}

TEST(Ablation, SingleRowReducesToPlainTraining) {
  RunConfig cfg = tiny();
  cfg.max_epochs = 2;
  const data::Splits s = load_splits(cfg);
  const auto one = ablate(cfg, s, {{"base", {}}});
  const TrainResult r = train(cfg, s);
  EXPECT_EQ(one[0].test.micro.f1, evaluate(r.best, s.test).micro.f1);
  EXPECT_EQ(one[0].best_epoch, r.best_epoch);
  EXPECT_EQ(kind_of([&] { ablate(cfg, s, {{"bad", {{"lr", "1"}}}}); }), ErrorKind::kConfig);
}

}  // namespace
}  // namespace hreb
