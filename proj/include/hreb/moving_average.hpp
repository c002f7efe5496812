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

namespace hreb::ma {

// Mean of each full window of N samples; output has len(x) − N + 1 entries.
std::vector<double> sma(std::span<const double> x, std::size_t window);

// Weighted window mean. w[0] weighs the newest sample x[t], w[i] weighs x[t−i].
std::vector<double> wma(std::span<const double> x, std::span<const double> w);

// Prefix means.
std::vector<double> cma(std::span<const double> x);

// h_t = α·x_t + (1−α)·h_{t−1}, starting from h0.
std::vector<double> ema_scan(std::span<const double> x, double alpha, double h0);

// Row-wise EMA over a [seq×n] matrix with per-column decay alpha [1×n] and
// initial state h0 [1×n]. With reset_every > 0 the state restarts from h0 at
// every multiple of reset_every (chunk-local smoothing).
Tensor ema_scan(const Tensor& x, const Tensor& alpha, const Tensor& h0, std::size_t reset_every = 0);
Var ema_scan(Var x, Var alpha, Var h0, std::size_t reset_every = 0);

// Multi-head EMA layer. Parameters live in a ParamStore under `prefix`:
//   w_in, w_out   [d×d] head projections (initialized to the identity)
//   alpha_logit   [1×n_head] decay per head, α = sigmoid(alpha_logit)
//   h0            [1×d] initial state, d/n_head entries per head
class MultiHeadEma {
 public:
  MultiHeadEma() = default;
  MultiHeadEma(std::string prefix, std::size_t d_model, std::size_t n_head);

  void init(ParamStore& params) const;
  Var forward(Tape& tape, const ParamStore& params, Var x, std::size_t reset_every = 0) const;
  // Effective per-head decays.
  std::vector<double> alphas(const ParamStore& params) const;

  std::size_t d_model() const noexcept { return d_; }
  std::size_t n_head() const noexcept { return heads_; }

 private:
  std::string prefix_;
  std::size_t d_ = 0;
  std::size_t heads_ = 1;
};

// Geometric spread of initial decays over heads in [0.05, 0.95].
std::vector<double> initial_alphas(std::size_t n_head);

}  // namespace hreb::ma
