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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hreb/autograd.hpp"
#include "hreb/moving_average.hpp"
#include "hreb/ops.hpp"
#include "hreb/params.hpp"
#include "hreb/reduced_bias.hpp"

namespace hreb::rhema {

enum class AttnFn { kSoftmax, kLaplace, kReducedLaplace };
enum class SiluVariant { kPaper, kStandard };
enum class NormKind { kLayer, kBatch };

AttnFn parse_attn_fn(const std::string& s);
std::string attn_fn_name(AttnFn f);
SiluVariant parse_silu(const std::string& s);
std::string silu_name(SiluVariant s);

struct RhemaConfig {
  std::size_t d_model = 64;
  std::size_t z_dim = 64;  // must equal d_model
  std::size_t v_dim = 128;
  std::size_t n_ema_head = 64;
  std::size_t chunk_size = 8;  // local stage window; 0 = global
  AttnFn attn_fn = AttnFn::kReducedLaplace;
  double daleth = 0.0;  // attention scale; 0 selects sqrt(z_dim)
  std::size_t rel_bias_window = 16;
  SiluVariant silu = SiluVariant::kPaper;
  NormKind norm = NormKind::kLayer;
  rb::ResidualMode residual = rb::ResidualMode::kDynamic;
  double static_alpha = 1.0;
  double static_beta = 1.0;

  void validate() const;
  double scale() const;
};

// Optional capture of a block's intermediate matrices.
struct AttentionTrace {
  std::string stage;
  Tensor z, q, k, v, scores, weights, gamma, phi;
  Mask mask;
};

// Attention masks: real queries see real keys inside their chunk (chunk 0 =
// unrestricted); padded queries see only themselves so every row keeps one
// admissible entry without touching real rows.
Mask attention_mask(std::size_t seq, std::size_t length, std::size_t chunk_size);

Var apply_silu(Var x, SiluVariant v);

// Elementwise (1 + erf((x−μ)/(σ√2)))/2; masked entries are 0. μ and σ are
// [1×1] tape values.
Var laplace_attn(Var scores, Var mu, Var sigma, const Mask* mask = nullptr);

// Row-normalized reduced-bias Laplace weights. For each row, over admissible
// entries: r_j = laplace(s_j) + c_j − min_k c_k, w_j = r_j / Σ r. Every r_j is
// strictly positive unless laplace underflows; an all-zero row is a
// degenerate-row error.
Var reduced_laplace_attn(Var scores, Var context, Var mu, Var sigma, const Mask* mask = nullptr);

// b_rel[clip(j − i, ±window)] as a [seq×seq] matrix.
Var relative_bias(Var b_rel, std::size_t seq, std::size_t window);

// One RHEMA block with its two gated residual sublayers. Parameter names are
// rooted at `prefix`.
class RhemaBlock {
 public:
  RhemaBlock() = default;
  RhemaBlock(std::string prefix, RhemaConfig cfg);

  void init(ParamStore& params, Rng& rng) const;

  // Z = silu(EMA(X_in)·W_z + b_z) + X_in
  Var shared_rep(Tape& tape, const ParamStore& params, Var x_in, std::size_t ema_reset = 0) const;
  // Q = κ_q ⊙ Z + μ_q, K = κ_k ⊙ Z + μ_k
  std::pair<Var, Var> qk_transform(Tape& tape, const ParamStore& params, Var z) const;
  // V = silu(X_in·W_v + b_v)
  Var value_transform(Tape& tape, const ParamStore& params, Var x_in) const;
  // O = f_S(Q·Kᵀ/ℸ + b_rel)·V
  Var attention(Tape& tape, const ParamStore& params, Var q, Var k, Var v, const Mask& mask,
                AttentionTrace* trace = nullptr) const;
  // γ = σ(Z·W_γ + b_γ), Φ = σ(Z·W_φ + b_φ),
  // Ŷ = silu(Z·W_h + (γ⊙O)·U_h + b_h), Y = Φ⊙Ŷ + (1−Φ)⊙X_in
  Var gated_output(Tape& tape, const ParamStore& params, Var x_in, Var z, Var o,
                   AttentionTrace* trace = nullptr) const;

  // normalize → shared_rep → qk/value → attention → gated_output inside a
  // gated residual, then a feed-forward sublayer inside a second one.
  Var forward(Tape& tape, const ParamStore& params, std::span<const rb::GateState> gates, Var x,
              const Mask& mask, std::size_t length, std::size_t ema_reset,
              std::vector<rb::GateProbe>* probes = nullptr, AttentionTrace* trace = nullptr) const;

  std::vector<std::string> residual_names() const { return {prefix_ + ".rb_attn", prefix_ + ".rb_ff"}; }
  const RhemaConfig& config() const noexcept { return cfg_; }

 private:
  Var normalize(Tape& tape, const ParamStore& params, const std::string& which, Var x,
                std::size_t length) const;
  Var feed_forward(Tape& tape, const ParamStore& params, Var x) const;

  std::string prefix_;
  RhemaConfig cfg_;
  ma::MultiHeadEma ema_;
  rb::ReducedBiasResidual rb_attn_;
  rb::ReducedBiasResidual rb_ff_;
};

// Two-stage encoder: a chunk-local block (EMA restarted per chunk, attention
// restricted to the chunk) feeding a global block.
class HierarchicalEncoder {
 public:
  HierarchicalEncoder() = default;
  HierarchicalEncoder(std::string prefix, RhemaConfig cfg);

  void init(ParamStore& params, Rng& rng) const;
  Var forward(Tape& tape, const ParamStore& params, std::span<const rb::GateState> gates, Var x,
              std::size_t length, std::vector<rb::GateProbe>* probes = nullptr,
              std::vector<AttentionTrace>* traces = nullptr) const;
  // Residual names in the order forward() fills the gate/probe vectors.
  std::vector<std::string> residual_names() const;
  Mask local_mask(std::size_t seq, std::size_t length) const;

 private:
  RhemaConfig cfg_;
  RhemaBlock local_;
  RhemaBlock global_;
};

// Plain scaled dot-product attention block used by the "naive attention"
// ablation: Q/K/V/O projections, softmax, then the same feed-forward
// sublayer; both wrapped in gated residuals of the configured mode.
class NaiveAttentionBlock {
 public:
  NaiveAttentionBlock() = default;
  NaiveAttentionBlock(std::string prefix, RhemaConfig cfg);

  void init(ParamStore& params, Rng& rng) const;
  Var forward(Tape& tape, const ParamStore& params, std::span<const rb::GateState> gates, Var x,
              std::size_t length, std::vector<rb::GateProbe>* probes = nullptr,
              std::vector<AttentionTrace>* traces = nullptr) const;
  std::vector<std::string> residual_names() const { return {prefix_ + ".rb_attn", prefix_ + ".rb_ff"}; }

 private:
  std::string prefix_;
  RhemaConfig cfg_;
  rb::ReducedBiasResidual rb_attn_;
  rb::ReducedBiasResidual rb_ff_;
};

}  // namespace hreb::rhema
