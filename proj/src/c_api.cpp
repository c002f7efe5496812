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

#include "hreb/hreb.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "hreb/autograd.hpp"
#include "hreb/checkpoint.hpp"
#include "hreb/config.hpp"
#include "hreb/data.hpp"
#include "hreb/error.hpp"
#include "hreb/model.hpp"
#include "hreb/train.hpp"
#include "hreb/verify.hpp"

struct hreb_model {
  hreb::Tagger tagger;
};

namespace {

using hreb::ErrorKind;
using json = nlohmann::ordered_json;

thread_local std::string g_last_error;

hreb_status status_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::kConfig:
    case ErrorKind::kData:
      return HREB_CONFIG_ERROR;
    case ErrorKind::kCheckpoint:
      return HREB_CHECKPOINT_ERROR;
    case ErrorKind::kDivergence:
    case ErrorKind::kNumeric:
      return HREB_DIVERGENCE;
    case ErrorKind::kOracle:
      return HREB_VERIFY_FAILED;
    default:
      return HREB_INTERNAL_ERROR;
  }
}

// Runs fn, translating exceptions into a status and the thread's last error.
template <class F>
hreb_status guarded(F&& fn) {
  g_last_error.clear();
  try {
    return fn();
  } catch (const hreb::Error& e) {
    g_last_error = e.what();
    return status_for(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return HREB_INTERNAL_ERROR;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return HREB_INTERNAL_ERROR;
  } catch (...) {
    g_last_error = "unknown error";
    return HREB_INTERNAL_ERROR;
  }
}

hreb_status arg_error(const std::string& what) {
  g_last_error = what;
  return HREB_CONFIG_ERROR;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put_string(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

hreb::RunConfig build_config(const char* path, const char* const* overrides, std::size_t n) {
  hreb::RunConfig cfg = path && *path ? hreb::load_config(path) : hreb::RunConfig{};
  for (std::size_t i = 0; i < n; ++i) {
    const std::string kv = overrides[i] ? overrides[i] : "";
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      hreb::fail(ErrorKind::kConfig, "override '" + kv + "': expected key=value");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

// Whitespace split; a single chunk containing multibyte text is split into
// UTF-8 characters instead.
std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> words;
  std::istringstream in(line);
  for (std::string w; in >> w;) words.push_back(w);
  if (words.size() != 1) return words;
  const std::string& w = words[0];
  bool multibyte = false;
  for (unsigned char c : w) multibyte |= c >= 0x80;
  if (!multibyte) return words;
  std::vector<std::string> chars;
  for (std::size_t i = 0; i < w.size();) {
    const unsigned char c = static_cast<unsigned char>(w[i]);
    std::size_t n = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
    n = std::min(n, w.size() - i);
    chars.push_back(w.substr(i, n));
    i += n;
  }
  return chars;
}

json matrix_json(const hreb::Tensor& t, std::size_t rows, std::size_t cols) {
  json m = json::array();
  for (std::size_t r = 0; r < rows; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = t.at(r, c);
      row.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    }
    m.push_back(std::move(row));
  }
  return m;
}

json row_json(const hreb::Tensor& t) {
  json row = json::array();
  for (double v : t.vec()) row.push_back(v);
  return row;
}

}  // namespace

extern "C" {

const char* hreb_version(void) { return "1.0.0"; }

const char* hreb_last_error(void) { return g_last_error.c_str(); }

void hreb_string_free(char* s) { std::free(s); }

hreb_status hreb_train(const char* config_path, const char* const* overrides, size_t n_overrides, const char* out_dir,
                       hreb_epoch_callback progress, void* user, char** summary) {
  if (n_overrides && !overrides) return arg_error("hreb_train: overrides is NULL");
  return guarded([&] {
    const hreb::RunConfig cfg = build_config(config_path, overrides, n_overrides);
    const hreb::data::Splits splits = hreb::load_splits(cfg);
    hreb::TrainOptions opts;
    if (out_dir) opts.out_dir = out_dir;
    if (progress)
      opts.on_epoch = [&](const hreb::EpochRecord& r) { progress(r.epoch, r.loss, r.valid.f1, user); };
    const hreb::TrainResult res = hreb::train(cfg, splits, opts);
    json j;
    j["epochs"] = res.history.size();
    j["best_epoch"] = res.best_epoch;
    j["best_valid_f1"] = res.best_f1;
    j["early_stopped"] = res.early_stopped;
    if (res.embedding_coverage >= 0) j["embedding_coverage"] = res.embedding_coverage;
    if (!splits.test.empty()) j["best_test_f1"] = hreb::evaluate(res.best, splits.test).micro.f1;
    put_string(summary, j.dump(2));
    return HREB_OK;
  });
}

hreb_status hreb_ablate(const char* config_path, const char* const* overrides, size_t n_overrides, char** table) {
  if (n_overrides && !overrides) return arg_error("hreb_ablate: overrides is NULL");
  return guarded([&] {
    const hreb::RunConfig cfg = build_config(config_path, overrides, n_overrides);
    const auto results = hreb::ablate(cfg, hreb::load_splits(cfg), hreb::default_ablation_matrix());
    put_string(table, hreb::format_ablation_table(results));
    return HREB_OK;
  });
}

hreb_status hreb_model_load(const char* path, hreb_model** out) {
  if (!path || !out) return arg_error("hreb_model_load: NULL argument");
  *out = nullptr;
  return guarded([&] {
    auto m = std::make_unique<hreb_model>();
    m->tagger = hreb::load_checkpoint(std::string(path));
    *out = m.release();
    return HREB_OK;
  });
}

hreb_status hreb_model_save(const hreb_model* model, const char* path) {
  if (!model || !path) return arg_error("hreb_model_save: NULL argument");
  return guarded([&] {
    hreb::save_checkpoint(std::string(path), model->tagger);
    return HREB_OK;
  });
}

void hreb_model_free(hreb_model* model) { delete model; }

hreb_status hreb_eval(const hreb_model* model, const char* corpus_path, hreb_prf* micro, char** report) {
  if (!model || !corpus_path) return arg_error("hreb_eval: NULL argument");
  return guarded([&] {
    const auto r = hreb::evaluate(model->tagger, hreb::data::parse_conll_file(corpus_path));
    if (micro) *micro = {r.micro.precision, r.micro.recall, r.micro.f1, r.micro.gold, r.micro.predicted,
                         r.micro.correct};
    put_string(report, hreb::data::format_report(r));
    return HREB_OK;
  });
}

hreb_status hreb_predict_tokens(const hreb_model* model, const char* const* tokens, size_t n, char** tags) {
  if (!model || !tags || (n && !tokens)) return arg_error("hreb_predict_tokens: NULL argument");
  if (n == 0) return arg_error("hreb_predict_tokens: empty sentence");
  return guarded([&] {
    std::vector<std::string> words(tokens, tokens + n);
    std::string out;
    for (const auto& t : model->tagger.predict(words)) out += (out.empty() ? "" : " ") + t;
    *tags = dup_string(out);
    return HREB_OK;
  });
}

hreb_status hreb_predict_file(const hreb_model* model, const char* in_path, const char* out_path, size_t* skipped) {
  if (!model || !in_path || !out_path) return arg_error("hreb_predict_file: NULL argument");
  return guarded([&] {
    std::ifstream in(in_path, std::ios::binary);
    if (!in) hreb::fail(ErrorKind::kData, std::string(in_path) + ": cannot open");
    std::ostringstream buf;
    std::size_t empty = 0;
    for (std::string line; std::getline(in, line);) {
      const auto words = tokenize(line);
      if (words.empty()) {
        ++empty;
        continue;
      }
      const auto tags = model->tagger.predict(words);
      for (std::size_t i = 0; i < words.size(); ++i) buf << words[i] << ' ' << tags[i] << '\n';
      buf << '\n';
    }
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) hreb::fail(ErrorKind::kData, std::string(out_path) + ": cannot write");
    out << buf.str();
    if (skipped) *skipped = empty;
    return HREB_OK;
  });
}

hreb_status hreb_inspect(const hreb_model* model, const char* sentence, char** out) {
  if (!model || !sentence || !out) return arg_error("hreb_inspect: NULL argument");
  return guarded([&] {
    const hreb::Tagger& m = model->tagger;
    const auto words = tokenize(sentence);
    if (words.empty()) hreb::fail(ErrorKind::kData, "inspect: empty sentence");
    std::vector<int> ids;
    for (const auto& w : words) ids.push_back(m.vocab().token_id(w));

    hreb::Tape tape(false);
    std::vector<hreb::rhema::AttentionTrace> traces;
    m.emissions(tape, ids, ids.size(), nullptr, &traces);
    const auto tags = m.predict(words);

    json j;
    j["tokens"] = words;
    j["tags"] = tags;
    json spans = json::array();
    for (const auto& s : hreb::data::decode_spans(tags, hreb::data::SpanMode::kLenient))
      spans.push_back({{"start", s.start}, {"end", s.end}, {"type", s.type}});
    j["spans"] = spans;
    const std::size_t n = ids.size();
    json stages = json::array();
    for (const auto& t : traces) {
      json s;
      s["stage"] = t.stage;
      s["scores"] = matrix_json(t.scores, n, n);
      s["weights"] = matrix_json(t.weights, n, n);
      if (t.gamma.size()) s["gamma"] = matrix_json(t.gamma, n, t.gamma.cols());
      if (t.phi.size()) s["phi"] = matrix_json(t.phi, n, t.phi.cols());
      stages.push_back(std::move(s));
    }
    j["stages"] = stages;
    json gates = json::array();
    const auto names = m.residual_names();
    for (std::size_t k = 0; k < names.size(); ++k) {
      const auto& g = m.gates()[k];
      const hreb::rb::ReducedBiasResidual res(names[k], m.config().d_model, g.mode);
      const auto [a, b] = res.gates(m.params(), g);
      gates.push_back({{"residual", names[k]}, {"mode", hreb::rb::mode_name(g.mode)}, {"branch", row_json(a)},
                       {"skip", row_json(b)}});
    }
    j["residual_gates"] = gates;
    *out = dup_string(j.dump());
    return HREB_OK;
  });
}

hreb_status hreb_verify(const char* suite, int inject_grad_fault, char** report) {
  const std::string name = suite ? suite : "all";
  if (name != "all" && name != "grad" && name != "crf" && name != "ema")
    return arg_error("verify: unknown suite '" + name + "' (all|grad|crf|ema)");
  return guarded([&] {
    struct Restore {
      double prev = hreb::testing::matmul_grad_fault();
      ~Restore() { hreb::testing::set_matmul_grad_fault(prev); }
    } restore;
    if (inject_grad_fault) hreb::testing::set_matmul_grad_fault(0.9);
    const auto r = hreb::verify::run_suite(name);
    put_string(report, hreb::verify::format_table(r));
    if (!r.passed()) {
      g_last_error = "verify: oracle mismatch in suite '" + name + "'";
      return HREB_VERIFY_FAILED;
    }
    return HREB_OK;
  });
}

hreb_status hreb_stats(const char* const* paths, size_t n, char** table) {
  if (!table || (n && !paths)) return arg_error("hreb_stats: NULL argument");
  if (n == 0) return arg_error("stats: no corpus given");
  return guarded([&] {
    std::vector<std::pair<std::string, hreb::data::CorpusStats>> rows;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string path = paths[i] ? paths[i] : "";
      rows.emplace_back(hreb::data::corpus_name(path), hreb::data::corpus_stats(hreb::data::load_corpus_splits(path)));
    }
    *table = dup_string(hreb::data::format_stats_table(rows));
    return HREB_OK;
  });
}

}  // extern "C"
