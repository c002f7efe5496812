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

#include "hreb/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "hreb/error.hpp"
#include "hreb/params.hpp"

namespace hreb::data {

// ---- CoNLL ------------------------------------------------------------------

Corpus parse_conll(std::istream& in, const std::string& source) {
  Corpus out;
  Sentence cur;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const bool blank = line.find_first_not_of(" \t") == std::string::npos;
    if (blank) {
      if (!cur.tokens.empty()) out.push_back(std::move(cur));
      cur = Sentence{};
      continue;
    }
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (pos < line.size()) {
      const std::size_t b = line.find_first_not_of(" \t", pos);
      if (b == std::string::npos) break;
      const std::size_t e = line.find_first_of(" \t", b);
      fields.push_back(line.substr(b, e == std::string::npos ? std::string::npos : e - b));
      pos = e == std::string::npos ? line.size() : e;
    }
    if (fields.size() != 2)
      fail(ErrorKind::kData, source + ":" + std::to_string(lineno) + ": expected 'token tag', found " +
                                 std::to_string(fields.size()) + " field(s)");
    cur.tokens.push_back(std::move(fields[0]));
    cur.tags.push_back(std::move(fields[1]));
  }
  if (!cur.tokens.empty()) out.push_back(std::move(cur));
  if (out.empty()) fail(ErrorKind::kData, source + ": empty corpus");
  return out;
}

Corpus parse_conll_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kData, "cannot open corpus '" + path + "'");
  return parse_conll(in, path);
}

void write_conll(std::ostream& out, const Corpus& corpus) {
  for (const Sentence& s : corpus) {
    for (std::size_t i = 0; i < s.size(); ++i) out << s.tokens[i] << ' ' << s.tags[i] << '\n';
    out << '\n';
  }
}

// ---- Vocab -----------------------------------------------------------------

Vocab::Vocab() {
  add_token(kPadToken);
  add_token(kUnkToken);
}

Vocab Vocab::build(const Corpus& train) {
  Vocab v;
  for (const Sentence& s : train) {
    for (const auto& t : s.tokens) v.add_token(t);
    for (const auto& t : s.tags) v.add_tag(t);
  }
  return v;
}

void Vocab::add_token(const std::string& token) {
  if (token_index_.emplace(token, static_cast<int>(tokens_.size())).second) tokens_.push_back(token);
}

void Vocab::add_tag(const std::string& tag) {
  if (tag_index_.emplace(tag, static_cast<int>(tags_.size())).second) tags_.push_back(tag);
}

int Vocab::token_id(const std::string& token) const {
  auto it = token_index_.find(token);
  return it == token_index_.end() ? 1 : it->second;
}

int Vocab::tag_id(const std::string& tag) const {
  auto it = tag_index_.find(tag);
  if (it == tag_index_.end()) fail(ErrorKind::kData, "tag '" + tag + "' not in the training tag set");
  return it->second;
}

std::vector<Encoded> encode(const Corpus& corpus, const Vocab& vocab) {
  std::vector<Encoded> out;
  out.reserve(corpus.size());
  for (const Sentence& s : corpus) {
    Encoded e;
    for (const auto& t : s.tokens) e.ids.push_back(vocab.token_id(t));
    for (const auto& t : s.tags) e.tags.push_back(vocab.tag_id(t));
    out.push_back(std::move(e));
  }
  return out;
}

// ---- Spans -----------------------------------------------------------------

bool Span::operator<(const Span& o) const {
  return std::tie(start, end, type) < std::tie(o.start, o.end, o.type);
}

SpanMode parse_span_mode(const std::string& s) {
  if (s == "strict") return SpanMode::kStrict;
  if (s == "lenient") return SpanMode::kLenient;
  fail(ErrorKind::kConfig, "unknown span_mode '" + s + "' (expected strict|lenient)");
}

std::vector<Span> decode_spans(std::span<const std::string> tags, SpanMode mode) {
  std::vector<Span> out;
  bool open = false;
  Span cur;
  auto close = [&](std::size_t end) {
    if (open) {
      cur.end = end;
      out.push_back(cur);
    }
    open = false;
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& t = tags[i];
    if (t == "O") {
      close(i);
      continue;
    }
    if (t.size() < 3 || t[1] != '-' || (t[0] != 'B' && t[0] != 'I'))
      fail(ErrorKind::kData, "tag '" + t + "' at position " + std::to_string(i) + " is not BIO-shaped");
    const std::string type = t.substr(2);
    if (t[0] == 'I' && open && cur.type == type) continue;
    if (t[0] == 'I' && mode == SpanMode::kStrict)
      fail(ErrorKind::kData, "stray '" + t + "' at position " + std::to_string(i) + " (strict BIO)");
    close(i);
    cur = Span{i, i, type};
    open = true;
  }
  close(tags.size());
  return out;
}

// ---- Metrics ---------------------------------------------------------------

Prf make_prf(std::size_t gold, std::size_t predicted, std::size_t correct) {
  Prf p;
  p.gold = gold;
  p.predicted = predicted;
  p.correct = correct;
  p.precision = predicted ? static_cast<double>(correct) / static_cast<double>(predicted) : 0.0;
  p.recall = gold ? static_cast<double>(correct) / static_cast<double>(gold) : 0.0;
  const double s = p.precision + p.recall;
  p.f1 = s > 0.0 ? 2.0 * p.precision * p.recall / s : 0.0;
  return p;
}

EvalReport span_prf(const std::vector<std::vector<Span>>& gold, const std::vector<std::vector<Span>>& pred) {
  require(gold.size() == pred.size(), ErrorKind::kContract,
          "span_prf: " + std::to_string(gold.size()) + " gold vs " + std::to_string(pred.size()) + " predicted sentences");
  struct Counts {
    std::size_t g = 0, p = 0, c = 0;
  };
  std::map<std::string, Counts> by_type;
  Counts total;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::set<Span> gs(gold[i].begin(), gold[i].end());
    std::set<Span> ps(pred[i].begin(), pred[i].end());
    for (const Span& s : gs) ++by_type[s.type].g;
    for (const Span& s : ps) {
      ++by_type[s.type].p;
      if (gs.count(s)) ++by_type[s.type].c;
    }
  }
  EvalReport r;
  for (const auto& [type, c] : by_type) {
    r.per_type[type] = make_prf(c.g, c.p, c.c);
    total.g += c.g;
    total.p += c.p;
    total.c += c.c;
  }
  r.micro = make_prf(total.g, total.p, total.c);
  return r;
}

std::string format_report(const EvalReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << std::left << std::setw(12) << "type" << std::right << std::setw(10) << "P" << std::setw(10) << "R"
     << std::setw(10) << "F1" << std::setw(8) << "gold" << std::setw(8) << "pred" << std::setw(8) << "correct\n";
  auto line = [&](const std::string& name, const Prf& p) {
    os << std::left << std::setw(12) << name << std::right << std::setw(10) << p.precision << std::setw(10)
       << p.recall << std::setw(10) << p.f1 << std::setw(8) << p.gold << std::setw(8) << p.predicted
       << std::setw(8) << p.correct << '\n';
  };
  for (const auto& [type, p] : r.per_type) line(type, p);
  line("micro", r.micro);
  return os.str();
}

// ---- Stats -----------------------------------------------------------------

CorpusStats corpus_stats(const Splits& splits) {
  CorpusStats st;
  st.train = splits.train.size();
  st.test = splits.test.size();
  st.valid = splits.valid_is_test ? splits.test.size() : splits.valid.size();
  std::set<std::string> types;
  std::size_t sentences = 0, tokens = 0;
  st.min_length = std::numeric_limits<std::size_t>::max();
  auto visit = [&](const Corpus& c) {
    for (const Sentence& s : c) {
      for (const auto& t : s.tags)
        if (t != "O") types.insert(t.size() > 2 && t[1] == '-' ? t.substr(2) : t);
      ++sentences;
      tokens += s.size();
      st.max_length = std::max(st.max_length, s.size());
      st.min_length = std::min(st.min_length, s.size());
    }
  };
  visit(splits.train);
  if (!splits.valid_is_test) visit(splits.valid);
  visit(splits.test);
  st.classes = types.size();
  if (sentences == 0) {
    st.min_length = 0;
  } else {
    st.avg_length = static_cast<double>(tokens) / static_cast<double>(sentences);
  }
  return st;
}

std::string format_stats_table(const std::vector<std::pair<std::string, CorpusStats>>& rows) {
  std::ostringstream os;
  auto row = [&](const std::string& label, auto get) {
    os << std::left << std::setw(12) << label;
    for (const auto& [name, st] : rows) os << std::right << std::setw(12) << get(st);
    os << '\n';
  };
  os << std::left << std::setw(12) << "datasets";
  for (const auto& [name, st] : rows) os << std::right << std::setw(12) << name;
  os << '\n';
  row("class", [](const CorpusStats& s) { return std::to_string(s.classes); });
  row("train", [](const CorpusStats& s) { return std::to_string(s.train); });
  row("test", [](const CorpusStats& s) { return std::to_string(s.test); });
  row("valid", [](const CorpusStats& s) { return std::to_string(s.valid); });
  row("avg length", [](const CorpusStats& s) {
    std::ostringstream v;
    v << std::fixed << std::setprecision(2) << s.avg_length;
    return v.str();
  });
  row("max length", [](const CorpusStats& s) { return std::to_string(s.max_length); });
  row("min length", [](const CorpusStats& s) { return std::to_string(s.min_length); });
  return os.str();
}

// ---- Batching --------------------------------------------------------------

std::vector<Batch> make_batches(const std::vector<Encoded>& sentences, std::size_t batch_size, std::uint64_t seed,
                                bool shuffle) {
  require(batch_size >= 1, ErrorKind::kConfig, "batch_size must be at least 1");
  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) {
    Rng rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  }
  std::vector<Batch> out;
  for (std::size_t b = 0; b < order.size(); b += batch_size) {
    Batch batch;
    const std::size_t e = std::min(order.size(), b + batch_size);
    for (std::size_t k = b; k < e; ++k) batch.max_len = std::max(batch.max_len, sentences[order[k]].ids.size());
    for (std::size_t k = b; k < e; ++k) {
      const Encoded& s = sentences[order[k]];
      batch.indices.push_back(order[k]);
      batch.lengths.push_back(s.ids.size());
      std::vector<int> ids = s.ids, tags = s.tags;
      std::vector<bool> mask(s.ids.size(), true);
      ids.resize(batch.max_len, 0);
      tags.resize(batch.max_len, 0);
      mask.resize(batch.max_len, false);
      batch.ids.push_back(std::move(ids));
      batch.tags.push_back(std::move(tags));
      batch.mask.push_back(std::move(mask));
    }
    out.push_back(std::move(batch));
  }
  return out;
}

// ---- Synthetic corpus ------------------------------------------------------

namespace {

std::vector<std::string> utf8_chars(const std::string& s) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < s.size();) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    const std::size_t n = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : 4;
    out.push_back(s.substr(i, n));
    i += n;
  }
  return out;
}

struct EntityType {
  const char* name;
  std::vector<std::string> triggers;  // words right before the entity
  std::vector<std::string> stems;     // single characters
  std::vector<std::string> suffixes;  // closing word, may be empty
  std::size_t min_stem, max_stem;
};

const std::vector<EntityType>& entity_types() {
  static const std::vector<EntityType> types = {
      {"PER", {"记者", "教授", "老师", "医生"}, {"张", "王", "李", "赵", "明", "华", "伟", "芳", "军", "丽"}, {}, 2, 3},
      {"LOC", {"住在", "来到", "位于", "前往"}, {"江", "河", "山", "湖", "海", "北", "南", "东", "西", "平"},
       {"市", "省", "县"}, 1, 2},
      {"ORG", {"加入", "就职于", "访问", "投资"}, {"中", "华", "新", "星", "光", "科", "信", "达", "安", "盛"},
       {"公司", "银行", "大学"}, 1, 2},
      {"TIME", {"定于", "始于", "截至"}, {"一", "二", "三", "五", "八", "十"}, {"月", "日", "年"}, 1, 2},
      {"PROD", {"购买", "发布", "使用"}, {"云", "龙", "风", "雷", "电", "火"}, {"手机", "电脑"}, 1, 2},
      {"EVT", {"参加", "举办", "报道"}, {"春", "秋", "冬", "夏", "金", "银"}, {"大会", "论坛"}, 1, 2},
  };
  return types;
}

// Filler words; "明", "海", "光", "安" double as entity stems (homographs).
const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {"今天", "我们", "非常", "一个", "他们", "已经", "明天", "大海",
                                                 "光明", "平安", "的", "了", "和", "也", "很", "都"};
  return words;
}

const std::vector<std::string>& after_words() {
  static const std::vector<std::string> words = {"表示", "认为", "工作", "发展", "的", "了"};
  return words;
}

}  // namespace

Corpus synth_corpus(std::uint64_t seed, std::size_t n_sentences, std::size_t n_types) {
  const auto& types = entity_types();
  require(n_types >= 1 && n_types <= types.size(), ErrorKind::kConfig,
          "synth_corpus: entity types must be in [1, " + std::to_string(types.size()) + "]");
  Rng rng(seed);
  auto pick = [&](const std::vector<std::string>& v) -> const std::string& { return v[rng.index(v.size())]; };
  auto push_word = [](Sentence& s, const std::string& w, const std::string& tag_b, const std::string& tag_i) {
    bool first = true;
    for (auto& ch : utf8_chars(w)) {
      s.tokens.push_back(ch);
      s.tags.push_back(first ? tag_b : tag_i);
      first = false;
    }
  };

  Corpus out;
  out.reserve(n_sentences);
  for (std::size_t n = 0; n < n_sentences; ++n) {
    Sentence s;
    const std::size_t segments = 1 + rng.index(2);
    for (std::size_t k = 0; k < segments; ++k) {
      const std::size_t fillers = rng.index(3);
      for (std::size_t f = 0; f < fillers; ++f) push_word(s, pick(filler_words()), "O", "O");
      const EntityType& et = types[rng.index(n_types)];
      push_word(s, pick(et.triggers), "O", "O");
      const std::string b = std::string("B-") + et.name, i = std::string("I-") + et.name;
      const std::size_t stem = et.min_stem + rng.index(et.max_stem - et.min_stem + 1);
      std::string entity;
      for (std::size_t c = 0; c < stem; ++c) entity += pick(et.stems);
      if (!et.suffixes.empty()) entity += pick(et.suffixes);
      push_word(s, entity, b, i);
      if (rng.index(2) == 0) push_word(s, pick(after_words()), "O", "O");
    }
    if (rng.index(2) == 0) push_word(s, pick(filler_words()), "O", "O");
    out.push_back(std::move(s));
  }
  return out;
}

SplitIndices split_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  const std::size_t n_train = (n * 70 + 50) / 100;
  const std::size_t n_valid = std::min(n - n_train, (n * 15 + 50) / 100);
  SplitIndices idx;
  for (std::size_t k = 0; k < n; ++k) {
    auto& dst = k < n_train ? idx.train : k < n_train + n_valid ? idx.valid : idx.test;
    dst.push_back(order[k]);
  }
  return idx;
}

Splits split_corpus(const Corpus& corpus, std::uint64_t seed) {
  const SplitIndices idx = split_indices(corpus.size(), seed);
  Splits s;
  for (std::size_t i : idx.train) s.train.push_back(corpus[i]);
  for (std::size_t i : idx.valid) s.valid.push_back(corpus[i]);
  for (std::size_t i : idx.test) s.test.push_back(corpus[i]);
  return s;
}

void write_split_indices(std::ostream& out, const SplitIndices& idx) {
  auto line = [&](const char* name, const std::vector<std::size_t>& v) {
    out << name;
    for (std::size_t i : v) out << ' ' << i;
    out << '\n';
  };
  line("train", idx.train);
  line("valid", idx.valid);
  line("test", idx.test);
}

namespace {
bool name_has(const std::string& name, const char* a, const char* b = nullptr) {
  return name.find(a) != std::string::npos || (b && name.find(b) != std::string::npos);
}
}  // namespace

std::string corpus_name(const std::string& path) {
  const std::filesystem::path p(path);
  const std::string name = p.filename().string();
  return name.empty() ? p.parent_path().filename().string() : name;
}

Splits load_corpus_splits(const std::string& path) {
  namespace fs = std::filesystem;
  Splits s;
  const fs::path p(path);
  if (!fs::exists(p)) fail(ErrorKind::kData, path + ": no such file or directory");
  if (!fs::is_directory(p)) {
    s.train = parse_conll_file(path);
    return s;
  }
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(p))
    if (e.is_regular_file()) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());
  std::string train, valid, test;
  for (const auto& e : entries) {
    const std::string f = e.filename().string();
    if (train.empty() && name_has(f, "train")) train = e.string();
    else if (valid.empty() && name_has(f, "dev", "valid")) valid = e.string();
    else if (test.empty() && name_has(f, "test")) test = e.string();
  }
  if (train.empty()) fail(ErrorKind::kData, path + ": no file with 'train' in its name");
  s.train = parse_conll_file(train);
  if (!test.empty()) s.test = parse_conll_file(test);
  if (!valid.empty()) {
    s.valid = parse_conll_file(valid);
  } else if (!test.empty()) {
    s.valid = s.test;
    s.valid_is_test = true;
  }
  return s;
}

}  // namespace hreb::data
