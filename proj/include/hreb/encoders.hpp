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

#include <span>
#include <string>
#include <vector>

#include "hreb/autograd.hpp"
#include "hreb/params.hpp"

namespace hreb::enc {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;

// Seeded uniform(−0.1, 0.1) table; the padding row is zero.
Tensor init_embedding(std::size_t vocab_size, std::size_t dim, Rng& rng);

// Row lookup; the padding row never receives gradient.
Var embed_tokens(Var table, std::span<const int> ids);

struct LoadedEmbedding {
  Tensor table;
  std::size_t hits = 0;
  double coverage = 0.0;  // hits / (vocab − reserved)
};

// Text format: header "count dim", then "token v1 ... v_dim" per line.
// Rows are aligned to `id_to_token`; the first `reserved` ids (PAD, UNK) are
// not looked up. Tokens absent from the file keep their seeded draw.
LoadedEmbedding load_embedding_file(const std::string& path, std::span<const std::string> id_to_token,
                                    std::size_t dim, Rng& rng, std::size_t reserved = 2);

// One LSTM direction over the first `length` rows of x. Gates are packed
// [i | f | g | o] along columns. Rows ≥ length are zero.
Var lstm_direction(Var x, Var w_ih, Var w_hh, Var bias, std::size_t length, bool reverse);

class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(std::string prefix, std::size_t d_in, std::size_t hidden)
      : prefix_(std::move(prefix)), d_in_(d_in), hidden_(hidden) {}

  void init(ParamStore& params, Rng& rng) const;
  // [seq×d_in] → [seq×2h]: forward channels first, then backward.
  Var forward(Tape& tape, const ParamStore& params, Var x, std::size_t length) const;

  std::size_t hidden() const noexcept { return hidden_; }

 private:
  std::string prefix_;
  std::size_t d_in_ = 0;
  std::size_t hidden_ = 0;
};

}  // namespace hreb::enc
