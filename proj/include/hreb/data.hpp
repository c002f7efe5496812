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

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace hreb::data {

struct Sentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
  std::size_t size() const noexcept { return tokens.size(); }
};

using Corpus = std::vector<Sentence>;

// "token<TAB or space>tag" per line, blank line between sentences. CRLF is
// accepted. `source` prefixes error messages ("file:line: ...").
Corpus parse_conll(std::istream& in, const std::string& source = "<stream>");
Corpus parse_conll_file(const std::string& path);
void write_conll(std::ostream& out, const Corpus& corpus);

inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kUnkToken = "<unk>";

// Token and tag ids in first-occurrence order. Ids 0 and 1 are PAD and UNK.
class Vocab {
 public:
  Vocab();
  static Vocab build(const Corpus& train);

  int token_id(const std::string& token) const;  // UNK when unseen
  int tag_id(const std::string& tag) const;      // data error when unseen
  bool has_tag(const std::string& tag) const { return tag_index_.count(tag) != 0; }
  void add_token(const std::string& token);
  void add_tag(const std::string& tag);

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::vector<std::string>& tags() const noexcept { return tags_; }
  std::size_t token_count() const noexcept { return tokens_.size(); }
  std::size_t tag_count() const noexcept { return tags_.size(); }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::string> tags_;
  std::unordered_map<std::string, int> token_index_;
  std::unordered_map<std::string, int> tag_index_;
};

struct Encoded {
  std::vector<int> ids;
  std::vector<int> tags;
};
std::vector<Encoded> encode(const Corpus& corpus, const Vocab& vocab);

struct Span {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  std::string type;
  bool operator==(const Span&) const = default;
  bool operator<(const Span& o) const;
};

enum class SpanMode { kStrict, kLenient };
SpanMode parse_span_mode(const std::string& s);

// Maximal B-X (I-X)* runs. A stray I-X is promoted to B-X in lenient mode and
// rejected in strict mode. Tags other than O, B-*, I-* are rejected.
std::vector<Span> decode_spans(std::span<const std::string> tags, SpanMode mode);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;
};

struct EvalReport {
  Prf micro;
  std::map<std::string, Prf> per_type;
};

Prf make_prf(std::size_t gold, std::size_t predicted, std::size_t correct);
// Exact (start, end, type) matching, micro-averaged over the corpus.
EvalReport span_prf(const std::vector<std::vector<Span>>& gold, const std::vector<std::vector<Span>>& pred);
std::string format_report(const EvalReport& r);

struct Splits {
  Corpus train, valid, test;
  bool valid_is_test = false;
};

struct CorpusStats {
  std::size_t classes = 0;
  std::size_t train = 0, valid = 0, test = 0;
  double avg_length = 0.0;
  std::size_t max_length = 0;
  std::size_t min_length = 0;
};

// Entity-type count from tag suffixes; lengths over every distinct split.
CorpusStats corpus_stats(const Splits& splits);
std::string format_stats_table(const std::vector<std::pair<std::string, CorpusStats>>& rows);

struct Batch {
  std::vector<std::size_t> indices;  // into the encoded corpus
  std::vector<std::vector<int>> ids;   // padded with PAD
  std::vector<std::vector<int>> tags;  // padded with 0
  std::vector<std::vector<bool>> mask;
  std::vector<std::size_t> lengths;
  std::size_t max_len = 0;
};

// Seeded shuffle, then fixed-size batches padded to their own max length.
std::vector<Batch> make_batches(const std::vector<Encoded>& sentences, std::size_t batch_size, std::uint64_t seed,
                                bool shuffle = true);

// Template sentences with planted entities. Entity characters come from
// per-type pools; every type has trigger words, and a few homograph
// characters occur both inside entities and in filler text.
Corpus synth_corpus(std::uint64_t seed, std::size_t n_sentences, std::size_t entity_types);

// Seeded 7:1.5:1.5 split.
// Seeded 7:1.5:1.5 partition of sentence indices [0, n).
struct SplitIndices {
  std::vector<std::size_t> train, valid, test;
};
SplitIndices split_indices(std::size_t n, std::uint64_t seed);
Splits split_corpus(const Corpus& corpus, std::uint64_t seed);
// One line per split: "<name> i j k ...".
void write_split_indices(std::ostream& out, const SplitIndices& idx);

// A file is a train split on its own. A directory is split by file name:
// "train", "dev" or "valid", "test" (first match in sorted order); without a
// dev file the test split doubles as validation.
Splits load_corpus_splits(const std::string& path);
// Display name for a corpus path (last path component).
std::string corpus_name(const std::string& path);

}  // namespace hreb::data
