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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hreb/autograd.hpp"
#include "hreb/ops.hpp"

namespace hreb::crf {

// Transition layout over C classes: rows/cols 0..C-1 are classes, C is START
// and C+1 is STOP. transitions[i][j] scores moving from state i to state j.
inline std::size_t start_state(std::size_t n_classes) { return n_classes; }
inline std::size_t stop_state(std::size_t n_classes) { return n_classes + 1; }

// Admissible transitions. Into START and out of STOP are always closed, as is
// START→STOP. Closed entries behave as −∞ and are never trained.
class Transitions {
 public:
  Transitions() = default;
  explicit Transitions(std::size_t n_classes);

  // Also closes O→I-X, B-X→I-Y, I-X→I-Y (X≠Y) and START→I-X.
  static Transitions strict_bio(std::span<const std::string> tag_names);

  std::size_t classes() const noexcept { return n_; }
  std::size_t states() const noexcept { return n_ + 2; }
  bool allowed(std::size_t from, std::size_t to) const { return open_(from, to); }
  void close(std::size_t from, std::size_t to) { open_.set(from, to, false); }
  const Mask& mask() const noexcept { return open_; }

 private:
  std::size_t n_ = 0;
  Mask open_;
};

// Entry of a [(C+2)×(C+2)] transition tensor, −∞ when closed.
double transition(const Tensor& trans, const Transitions& open, std::size_t from, std::size_t to);
// Zeroes closed entries so the stored tensor stays finite.
Tensor init_transitions(const Transitions& open);

double sequence_score(const Tensor& emissions, std::span<const int> tags, const Tensor& trans,
                      const Transitions& open);
double log_partition(const Tensor& emissions, const Tensor& trans, const Transitions& open);

struct Marginals {
  double log_z = 0.0;
  Tensor unary;     // [n×C] P(y_t = c)
  Tensor pairwise;  // [(C+2)×(C+2)] expected transition counts, boundary included
};
Marginals marginals(const Tensor& emissions, const Tensor& trans, const Transitions& open);

struct Decoded {
  std::vector<int> path;
  double score = 0.0;
};
// Ties resolve to the lower class index at every backtrack step, so among
// equal-scoring paths the one smallest when read from the last position
// backwards wins.
Decoded viterbi(const Tensor& emissions, const Tensor& trans, const Transitions& open);

// log Z − score(gold) for one sentence. Gradients: marginals − one-hot gold for
// emissions, expected − gold transition counts for open transitions, zero for
// closed ones.
Var crf_nll(Var emissions, Var trans, std::span<const int> tags, const Transitions& open);

// −Σ y·log p with p clamped at 1e-12; every clamp bumps a process-wide counter.
double token_nll(const Tensor& probs, const Tensor& onehot);
// Softmax over each row of the logits, then token_nll against gold classes.
Var token_nll_logits(Var logits, std::span<const int> tags);
std::size_t token_nll_clamp_count();

// log P(y₁) + Σ log P(yₜ|yₜ₋₁) + Σ log P(xₜ|yₜ); −∞ when a factor is zero.
double hmm_joint_log_prob(const Tensor& init, const Tensor& trans, const Tensor& emit,
                          std::span<const int> observations, std::span<const int> states);

}  // namespace hreb::crf
