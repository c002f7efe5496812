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

// Exercises the shared library through its C header only.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <unistd.h>
#include <vector>

#include <json.hpp>

#include "hreb/hreb.h"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct CString {
  char* p = nullptr;
  ~CString() { hreb_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct Model {
  hreb_model* p = nullptr;
  ~Model() { hreb_model_free(p); }
};

const char* const kTiny[] = {"synth_sentences=24", "synth_test_sentences=8", "d_model=8",  "v_dim=8",
                             "n_ema_head=2",       "h_lstm=4",               "max_epochs=3", "lr=0.02"};
constexpr std::size_t kTinyN = sizeof kTiny / sizeof kTiny[0];

class CApi : public ::testing::Test {
 protected:
  static fs::path dir() { return fs::temp_directory_path() / ("hreb_capi_" + std::to_string(::getpid())); }

  static void SetUpTestSuite() {
    fs::remove_all(dir());
    CString summary;
    ASSERT_EQ(hreb_train(nullptr, kTiny, kTinyN, dir().string().c_str(), nullptr, nullptr, &summary.p), HREB_OK)
        << hreb_last_error();
    std::ofstream(dir() / "corpus.txt") << "记 O\n者 O\n张 B-PER\n伟 I-PER\n\n来 O\n到 O\n江 B-LOC\n市 I-LOC\n";
  }
  static void TearDownTestSuite() { fs::remove_all(dir()); }

  static std::string ckpt() { return (dir() / "best.ckpt").string(); }
};

TEST_F(CApi, VersionAndStringFree) {
  EXPECT_STRNE(hreb_version(), "");
  hreb_string_free(nullptr);
}

TEST_F(CApi, NullArgumentsAreConfigErrors) {
  hreb_model* m = nullptr;
  EXPECT_EQ(hreb_model_load(nullptr, &m), HREB_CONFIG_ERROR);
  EXPECT_NE(std::string(hreb_last_error()).find("NULL"), std::string::npos);
  EXPECT_EQ(hreb_model_load("x", nullptr), HREB_CONFIG_ERROR);
  EXPECT_EQ(hreb_model_save(nullptr, "x"), HREB_CONFIG_ERROR);
  EXPECT_EQ(hreb_eval(nullptr, "x", nullptr, nullptr), HREB_CONFIG_ERROR);
  char* s = nullptr;
  EXPECT_EQ(hreb_predict_tokens(nullptr, nullptr, 0, &s), HREB_CONFIG_ERROR);
  EXPECT_EQ(hreb_inspect(nullptr, "a", &s), HREB_CONFIG_ERROR);
  EXPECT_EQ(hreb_stats(nullptr, 1, &s), HREB_CONFIG_ERROR);
  EXPECT_EQ(hreb_train(nullptr, nullptr, 2, nullptr, nullptr, nullptr, nullptr), HREB_CONFIG_ERROR);
  EXPECT_EQ(s, nullptr);
  hreb_model_free(nullptr);
}

TEST_F(CApi, ErrorCodesFollowErrorKinds) {
  hreb_model* m = nullptr;
  EXPECT_EQ(hreb_model_load("/nonexistent/x.ckpt", &m), HREB_CHECKPOINT_ERROR);
  EXPECT_EQ(m, nullptr);
  EXPECT_NE(std::string(hreb_last_error()).find("checkpoint"), std::string::npos);

  const char* bad_key[] = {"d_modle=3"};
  EXPECT_EQ(hreb_train(nullptr, bad_key, 1, nullptr, nullptr, nullptr, nullptr), HREB_CONFIG_ERROR);
  EXPECT_NE(std::string(hreb_last_error()).find("d_modle"), std::string::npos);
  const char* malformed[] = {"seed"};
  EXPECT_EQ(hreb_train(nullptr, malformed, 1, nullptr, nullptr, nullptr, nullptr), HREB_CONFIG_ERROR);
  EXPECT_EQ(hreb_train(nullptr, nullptr, 0, nullptr, nullptr, nullptr, nullptr), HREB_CONFIG_ERROR);
  EXPECT_NE(std::string(hreb_last_error()).find("train_path"), std::string::npos);
  EXPECT_EQ(hreb_train("/nonexistent/run.cfg", nullptr, 0, nullptr, nullptr, nullptr, nullptr), HREB_CONFIG_ERROR);

  CString s;
  EXPECT_EQ(hreb_verify("everything", 0, &s.p), HREB_CONFIG_ERROR);
}

TEST_F(CApi, TrainWritesArtifactsAndReportsProgress) {
  for (const char* f : {"best.ckpt", "final.ckpt", "metrics.log", "summary.json"})
    EXPECT_TRUE(fs::exists(dir() / f)) << f;
  std::vector<std::size_t> epochs;
  auto cb = [](std::size_t e, double loss, double f1, void* user) {
    EXPECT_TRUE(std::isfinite(loss));
    EXPECT_GE(f1, 0.0);
    static_cast<std::vector<std::size_t>*>(user)->push_back(e);
  };
  CString summary;
  ASSERT_EQ(hreb_train(nullptr, kTiny, kTinyN, nullptr, cb, &epochs, &summary.p), HREB_OK);
  EXPECT_EQ(epochs, (std::vector<std::size_t>{1, 2, 3}));
  const json j = json::parse(summary.str());
  EXPECT_EQ(j.at("epochs").get<int>(), 3);
  EXPECT_TRUE(j.contains("best_valid_f1"));
}

TEST_F(CApi, LoadSavePredictRoundTrip) {
  Model m, back;
  ASSERT_EQ(hreb_model_load(ckpt().c_str(), &m.p), HREB_OK) << hreb_last_error();
  const std::string copy = (dir() / "copy.ckpt").string();
  ASSERT_EQ(hreb_model_save(m.p, copy.c_str()), HREB_OK);
  ASSERT_EQ(hreb_model_load(copy.c_str(), &back.p), HREB_OK);
  const char* tokens[] = {"记", "者", "张", "伟", "表", "示"};
  CString a, b;
  ASSERT_EQ(hreb_predict_tokens(m.p, tokens, 6, &a.p), HREB_OK);
  ASSERT_EQ(hreb_predict_tokens(back.p, tokens, 6, &b.p), HREB_OK);
  EXPECT_EQ(a.str(), b.str());
  const std::string tags = a.str();
  EXPECT_EQ(std::count(tags.begin(), tags.end(), ' '), 5);
  CString none;
  EXPECT_EQ(hreb_predict_tokens(m.p, tokens, 0, &none.p), HREB_CONFIG_ERROR);
}

TEST_F(CApi, PredictFileCountsSkippedLines) {
  Model m;
  ASSERT_EQ(hreb_model_load(ckpt().c_str(), &m.p), HREB_OK);
  const fs::path in = dir() / "in.txt", out = dir() / "out.txt";
  std::ofstream(in) << "记者张伟表示\n\n来 到 江 市\n";
  std::size_t skipped = 99;
  ASSERT_EQ(hreb_predict_file(m.p, in.c_str(), out.c_str(), &skipped), HREB_OK) << hreb_last_error();
  EXPECT_EQ(skipped, 1u);
  std::ifstream res(out);
  std::size_t tagged = 0, blank = 0;
  for (std::string line; std::getline(res, line);) (line.empty() ? blank : tagged)++;
  EXPECT_EQ(tagged, 10u);
  EXPECT_EQ(blank, 2u);
  EXPECT_EQ(hreb_predict_file(m.p, "/nonexistent/in.txt", out.c_str(), &skipped), HREB_CONFIG_ERROR);
}

TEST_F(CApi, EvalReportsPrf) {
  Model m;
  ASSERT_EQ(hreb_model_load(ckpt().c_str(), &m.p), HREB_OK);
  hreb_prf prf{};
  CString report;
  ASSERT_EQ(hreb_eval(m.p, (dir() / "corpus.txt").c_str(), &prf, &report.p), HREB_OK) << hreb_last_error();
  EXPECT_EQ(prf.gold, 2u);
  EXPECT_GE(prf.f1, 0.0);
  EXPECT_LE(prf.f1, 1.0);
  EXPECT_LE(prf.correct, prf.predicted);
  EXPECT_NE(report.str().find("micro"), std::string::npos);
  EXPECT_EQ(hreb_eval(m.p, "/nonexistent/c.txt", &prf, nullptr), HREB_CONFIG_ERROR);
}

TEST_F(CApi, InspectJsonShape) {
  Model m;
  ASSERT_EQ(hreb_model_load(ckpt().c_str(), &m.p), HREB_OK);
  CString out;
  ASSERT_EQ(hreb_inspect(m.p, "记者张伟", &out.p), HREB_OK) << hreb_last_error();
  const json j = json::parse(out.str());
  EXPECT_EQ(j.at("tokens").size(), 4u);
  EXPECT_EQ(j.at("tags").size(), 4u);
  EXPECT_TRUE(j.at("spans").is_array());
  ASSERT_FALSE(j.at("stages").empty());
  for (const auto& st : j.at("stages")) {
    EXPECT_EQ(st.at("weights").size(), 4u);
    for (const auto& row : st.at("weights")) {
      EXPECT_EQ(row.size(), 4u);
      double total = 0.0;
      for (const auto& w : row)
        if (w.is_number()) total += w.get<double>();
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
    for (const auto& row : st.at("phi"))
      for (const auto& v : row) {
        EXPECT_GT(v.get<double>(), 0.0);
        EXPECT_LT(v.get<double>(), 1.0);
      }
  }
  ASSERT_FALSE(j.at("residual_gates").empty());
  for (const auto& g : j.at("residual_gates")) EXPECT_EQ(g.at("mode").get<std::string>(), "dynamic");
}

TEST_F(CApi, StatsAndVerify) {
  const std::string corpus = (dir() / "corpus.txt").string();
  const char* paths[] = {corpus.c_str()};
  CString table;
  ASSERT_EQ(hreb_stats(paths, 1, &table.p), HREB_OK) << hreb_last_error();
  EXPECT_NE(table.str().find("corpus.txt"), std::string::npos);
  EXPECT_NE(table.str().find("avg length"), std::string::npos);

  CString ok, bad;
  EXPECT_EQ(hreb_verify("ema", 0, &ok.p), HREB_OK) << ok.str();
  EXPECT_EQ(hreb_verify("grad", 1, &bad.p), HREB_VERIFY_FAILED);
  EXPECT_NE(bad.str().find("FAIL"), std::string::npos);
  // The fault is scoped to the call.
  CString again;
  EXPECT_EQ(hreb_verify("ema", 0, &again.p), HREB_OK);
}

}  // namespace
