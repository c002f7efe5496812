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

#include "hreb/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "hreb/error.hpp"

namespace hreb {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  fail(ErrorKind::kConfig, "config key '" + key + "': invalid value '" + value + "' (" + what + ")");
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "expected a non-negative integer");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v, "expected a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "expected true|false");
}

void check_choice(const std::string& key, const std::string& v, std::initializer_list<const char*> options) {
  std::string list;
  for (const char* o : options) {
    if (v == o) return;
    list += (list.empty() ? "" : "|") + std::string(o);
  }
  bad_value(key, v, ("expected " + list).c_str());
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

#define HREB_STR(name)                                                                    \
  {                                                                                       \
    #name, {[](const RunConfig& c) { return c.name; },                                    \
            [](RunConfig& c, const std::string&, const std::string& v) { c.name = v; } } \
  }
#define HREB_CHOICE(name, ...)                                                                                   \
  {                                                                                                              \
    #name, {[](const RunConfig& c) { return c.name; }, [](RunConfig& c, const std::string& k, const std::string& v) { \
              check_choice(k, v, {__VA_ARGS__});                                                                 \
              c.name = v;                                                                                        \
            } }                                                                                                  \
  }
#define HREB_UINT(name)                                                                                \
  {                                                                                                    \
    #name, {[](const RunConfig& c) { return std::to_string(c.name); },                                 \
            [](RunConfig& c, const std::string& k, const std::string& v) {                             \
              c.name = static_cast<decltype(c.name)>(parse_uint(k, v));                                \
            } }                                                                                        \
  }
#define HREB_DOUBLE(name)                                                                                     \
  {                                                                                                           \
    #name, {[](const RunConfig& c) { return fmt_double(c.name); },                                            \
            [](RunConfig& c, const std::string& k, const std::string& v) { c.name = parse_double(k, v); } } \
  }
#define HREB_BOOL(name)                                                                                     \
  {                                                                                                         \
    #name, {[](const RunConfig& c) { return std::string(c.name ? "true" : "false"); },                      \
            [](RunConfig& c, const std::string& k, const std::string& v) { c.name = parse_bool(k, v); } } \
  }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      HREB_STR(train_path),
      HREB_STR(valid_path),
      HREB_STR(test_path),
      HREB_CHOICE(valid_alias, "none", "test"),
      HREB_BOOL(resplit),
      HREB_UINT(split_seed),
      HREB_UINT(synth_sentences),
      HREB_UINT(synth_types),
      HREB_UINT(synth_seed),
      HREB_UINT(synth_test_sentences),
      HREB_UINT(synth_test_seed),
      HREB_CHOICE(embeddings, "scratch", "file"),
      HREB_STR(embedding_file),
      HREB_UINT(d_model),
      HREB_UINT(z_dim),
      HREB_UINT(v_dim),
      HREB_UINT(n_ema_head),
      HREB_UINT(chunk_size),
      HREB_DOUBLE(daleth),
      HREB_UINT(rel_bias_window),
      HREB_UINT(h_lstm),
      HREB_CHOICE(attention, "hema", "naive"),
      HREB_CHOICE(attn_fn, "softmax", "laplace", "reduced_laplace"),
      HREB_CHOICE(silu_variant, "paper", "standard"),
      HREB_CHOICE(norm, "layer", "batch"),
      HREB_CHOICE(reduced_bias_mode, "off", "classic", "static", "dynamic"),
      HREB_DOUBLE(static_alpha),
      HREB_DOUBLE(static_beta),
      HREB_DOUBLE(gate_momentum),
      HREB_CHOICE(loss, "crf", "token"),
      HREB_BOOL(strict_transitions),
      HREB_CHOICE(span_mode, "strict", "lenient"),
      HREB_DOUBLE(lr),
      HREB_DOUBLE(beta1),
      HREB_DOUBLE(beta2),
      HREB_DOUBLE(adam_eps),
      HREB_DOUBLE(grad_clip),
      HREB_UINT(batch_size),
      HREB_UINT(seed),
      HREB_UINT(max_epochs),
      HREB_UINT(patience),
      HREB_BOOL(eval_train),
  };
  return table;
}

#undef HREB_STR
#undef HREB_CHOICE
#undef HREB_UINT
#undef HREB_DOUBLE
#undef HREB_BOOL

const Field& field(const std::string& key) {
  for (const auto& [k, f] : fields())
    if (k == key) return f;
  fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, key, value); }

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> out = [] {
    std::vector<std::string> k;
    for (const auto& [name, f] : fields()) k.push_back(name);
    return k;
  }();
  return out;
}

RunConfig RunConfig::effective() const {
  RunConfig c = *this;
  if (c.z_dim == 0) c.z_dim = c.d_model;
  if (c.n_ema_head == 0) c.n_ema_head = c.d_model;
  auto need = [](bool ok, const std::string& key, const std::string& why) {
    if (!ok) fail(ErrorKind::kConfig, "config key '" + key + "': " + why);
  };
  need(c.d_model >= 1, "d_model", "must be positive");
  need(c.z_dim == c.d_model, "z_dim", "must equal d_model (" + std::to_string(c.d_model) + ")");
  need(c.v_dim >= 1, "v_dim", "must be positive");
  need(c.n_ema_head >= 1 && c.d_model % c.n_ema_head == 0, "n_ema_head",
       "must divide d_model (" + std::to_string(c.d_model) + ")");
  need(c.h_lstm >= 1, "h_lstm", "must be positive");
  need(c.daleth >= 0.0, "daleth", "must be non-negative (0 selects sqrt(z_dim))");
  need(c.gate_momentum >= 0.0 && c.gate_momentum < 1.0, "gate_momentum", "must be in [0, 1)");
  need(c.lr >= 0.0, "lr", "must be non-negative");
  need(c.beta1 >= 0.0 && c.beta1 < 1.0, "beta1", "must be in [0, 1)");
  need(c.beta2 >= 0.0 && c.beta2 < 1.0, "beta2", "must be in [0, 1)");
  need(c.adam_eps > 0.0, "adam_eps", "must be positive");
  need(c.grad_clip >= 0.0, "grad_clip", "must be non-negative");
  need(c.batch_size >= 1, "batch_size", "must be at least 1");
  need(c.synth_types >= 1 && c.synth_types <= 6, "synth_types", "must be in [1, 6]");
  need(c.embeddings != "file" || !c.embedding_file.empty(), "embedding_file", "required when embeddings=file");
  return c;
}

rhema::RhemaConfig RunConfig::rhema() const {
  const RunConfig c = effective();
  rhema::RhemaConfig r;
  r.d_model = c.d_model;
  r.z_dim = c.z_dim;
  r.v_dim = c.v_dim;
  r.n_ema_head = c.n_ema_head;
  r.chunk_size = c.chunk_size;
  r.attn_fn = rhema::parse_attn_fn(c.attn_fn);
  r.daleth = c.daleth;
  r.rel_bias_window = c.rel_bias_window;
  r.silu = rhema::parse_silu(c.silu_variant);
  r.norm = c.norm == "batch" ? rhema::NormKind::kBatch : rhema::NormKind::kLayer;
  r.residual = rb::parse_mode(c.reduced_bias_mode);
  r.static_alpha = c.static_alpha;
  r.static_beta = c.static_beta;
  return r;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + "=" + f.get(*this) + "\n";
  return out;
}

RunConfig parse_config(const std::string& text, const std::string& source) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::kConfig, source + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    try {
      c.set(key, trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(ErrorKind::kConfig, source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kConfig, "cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace hreb
