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

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hreb/autograd.hpp"
#include "hreb/params.hpp"

namespace hreb::rb {

enum class ResidualMode { kClassic, kStatic, kDynamic };

ResidualMode parse_mode(const std::string& s);  // classic|off, static, dynamic
std::string mode_name(ResidualMode m);

// Runtime state of one gated residual. The learnable gate maps (w_alpha,
// b_alpha, w_beta, b_beta) live in the ParamStore; the gradient caches are
// running statistics written by the training loop after each backward pass.
struct GateState {
  ResidualMode mode = ResidualMode::kClassic;
  double static_alpha = 1.0;
  double static_beta = 1.0;
  Tensor cache_f;  // [1×d] running mean of dL/dF
  Tensor cache_x;  // [1×d] running mean of dL/dx

  GateState() = default;
  GateState(ResidualMode m, std::size_t d)
      : mode(m), cache_f({1, d}), cache_x({1, d}) {}
};

// Tape ids of the branch output and the skip input of one apply() call, so
// their gradients can be read after backward. `rows` is the count of real
// (unpadded) positions.
struct GateProbe {
  int f_id = -1;
  int x_id = -1;
  std::size_t rows = 0;
};

using Branch = std::function<Var(Var)>;

class ReducedBiasResidual {
 public:
  ReducedBiasResidual() = default;
  ReducedBiasResidual(std::string prefix, std::size_t d, ResidualMode mode)
      : prefix_(std::move(prefix)), d_(d), mode_(mode) {}

  void init(ParamStore& params) const;
  // classic:  F(x) + x
  // static:   α·F(x) + β·x
  // dynamic:  σ(g_F·W_α + b_α) ⊙ F(x) + σ(g_x·W_β + b_β) ⊙ x
  // Caches enter the tape as constants.
  Var apply(Tape& tape, const ParamStore& params, const GateState& state, Var x, const Branch& branch,
            GateProbe* probe = nullptr, std::size_t active_rows = 0) const;

  // Current gate vectors (σ(...) for dynamic, constants otherwise).
  std::pair<Tensor, Tensor> gates(const ParamStore& params, const GateState& state) const;

  const std::string& prefix() const noexcept { return prefix_; }
  ResidualMode mode() const noexcept { return mode_; }

 private:
  std::string prefix_;
  std::size_t d_ = 0;
  ResidualMode mode_ = ResidualMode::kClassic;
};

// g ← momentum·g + (1−momentum)·mean over all rows of the given gradients.
void update_gate_cache(GateState& state, std::span<const Tensor> grad_f, std::span<const Tensor> grad_x,
                       double momentum);
void update_gate_cache(GateState& state, const Tensor& grad_f, const Tensor& grad_x, double momentum);

}  // namespace hreb::rb
