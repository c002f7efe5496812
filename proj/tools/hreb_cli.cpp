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

// Command-line front end. Talks to the library only through hreb.h; the
// process exit code is the returned hreb_status.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "hreb/hreb.h"

namespace {

struct StringDeleter {
  void operator()(char* s) const { hreb_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

struct ModelDeleter {
  void operator()(hreb_model* m) const { hreb_model_free(m); }
};
using OwnedModel = std::unique_ptr<hreb_model, ModelDeleter>;

int report(hreb_status st) {
  if (st != HREB_OK && *hreb_last_error()) std::cerr << "error: " << hreb_last_error() << '\n';
  return static_cast<int>(st);
}

std::vector<const char*> c_strings(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

int load(const std::string& path, OwnedModel& out) {
  hreb_model* m = nullptr;
  const hreb_status st = hreb_model_load(path.c_str(), &m);
  out.reset(m);
  return report(st);
}

void print_epoch(size_t epoch, double loss, double f1, void* user) {
  if (*static_cast<bool*>(user)) return;
  std::fprintf(stderr, "epoch %zu  loss %.6f  valid F1 %.4f\n", epoch, loss, f1);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HREB-CRF named-entity tagger"};
  app.require_subcommand(1);
  app.set_version_flag("--version", hreb_version());

  std::string config, out_dir, model_path, corpus, input, output, sentence, suite = "all";
  std::vector<std::string> sets, stats_paths;
  bool quiet = false, inject_fault = false;

  auto* train = app.add_subcommand("train", "train a tagger and write checkpoints and metrics");
  train->add_option("-c,--config", config, "key=value config file")->check(CLI::ExistingFile);
  train->add_option("-o,--out", out_dir, "output directory")->required();
  train->add_option("-s,--set", sets, "override a config key (key=value), repeatable");
  train->add_flag("-q,--quiet", quiet, "no per-epoch progress");

  auto* eval = app.add_subcommand("eval", "span-level P/R/F1 of a checkpoint on a CoNLL corpus");
  eval->add_option("--ckpt,-m,--model", model_path, "checkpoint")->required();
  eval->add_option("--corpus", corpus, "CoNLL file")->required();

  auto* predict = app.add_subcommand("predict", "tag one sentence per input line");
  predict->add_option("--ckpt,-m,--model", model_path, "checkpoint")->required();
  predict->add_option("--in,-i,--input", input, "input text, one sentence per line")->required();
  predict->add_option("--out,-o,--output", output, "CoNLL output")->required();

  auto* inspect = app.add_subcommand("inspect", "dump attention scores, weights and gates as JSON");
  inspect->add_option("--ckpt,-m,--model", model_path, "checkpoint")->required();
  inspect->add_option("--sentence", sentence, "sentence (space-separated tokens, or unsegmented text)")->required();

  auto* verify = app.add_subcommand("verify", "run the gradient, CRF and EMA oracle suites");
  verify->add_option("--suite", suite, "all|grad|crf|ema")->check(CLI::IsMember({"all", "grad", "crf", "ema"}));
  verify->add_flag("--inject-grad-fault", inject_fault)->group("");

  auto* stats = app.add_subcommand("stats", "corpus statistics table");
  stats->add_option("--corpus", stats_paths, "CoNLL file or directory with train/dev/test files")->required();

  auto* ablate = app.add_subcommand("ablate", "train the attention x reduced-bias ablation matrix");
  ablate->add_option("-c,--config", config, "key=value config file")->check(CLI::ExistingFile);
  ablate->add_option("-s,--set", sets, "override a config key (key=value), repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return HREB_CONFIG_ERROR;
  }

  if (train->parsed()) {
    const auto kv = c_strings(sets);
    char* summary = nullptr;
    const hreb_status st = hreb_train(config.empty() ? nullptr : config.c_str(), kv.data(), kv.size(),
                                      out_dir.c_str(), print_epoch, &quiet, &summary);
    OwnedString owned(summary);
    if (summary) std::cout << summary << '\n';
    return report(st);
  }
  if (ablate->parsed()) {
    const auto kv = c_strings(sets);
    char* table = nullptr;
    const hreb_status st = hreb_ablate(config.empty() ? nullptr : config.c_str(), kv.data(), kv.size(), &table);
    OwnedString owned(table);
    if (table) std::cout << table;
    return report(st);
  }
  if (verify->parsed()) {
    char* text = nullptr;
    const hreb_status st = hreb_verify(suite.c_str(), inject_fault ? 1 : 0, &text);
    OwnedString owned(text);
    if (text) std::cout << text;
    return report(st);
  }
  if (stats->parsed()) {
    const auto paths = c_strings(stats_paths);
    char* table = nullptr;
    const hreb_status st = hreb_stats(paths.data(), paths.size(), &table);
    OwnedString owned(table);
    if (table) std::cout << table;
    return report(st);
  }

  OwnedModel model;
  if (const int rc = load(model_path, model); rc != 0) return rc;
  if (eval->parsed()) {
    char* text = nullptr;
    const hreb_status st = hreb_eval(model.get(), corpus.c_str(), nullptr, &text);
    OwnedString owned(text);
    if (text) std::cout << text;
    return report(st);
  }
  if (predict->parsed()) {
    size_t skipped = 0;
    const hreb_status st = hreb_predict_file(model.get(), input.c_str(), output.c_str(), &skipped);
    if (st == HREB_OK && skipped) std::cerr << "warning: skipped " << skipped << " empty line(s)\n";
    return report(st);
  }
  if (inspect->parsed()) {
    char* json = nullptr;
    const hreb_status st = hreb_inspect(model.get(), sentence.c_str(), &json);
    OwnedString owned(json);
    if (json) std::cout << json << '\n';
    return report(st);
  }
  return HREB_INTERNAL_ERROR;
}
