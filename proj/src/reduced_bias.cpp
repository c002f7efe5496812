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

#include "hreb/reduced_bias.hpp"

#include "hreb/error.hpp"
#include "hreb/ops.hpp"

namespace hreb::rb {

ResidualMode parse_mode(const std::string& s) {
  if (s == "classic" || s == "off") return ResidualMode::kClassic;
  if (s == "static") return ResidualMode::kStatic;
  if (s == "dynamic") return ResidualMode::kDynamic;
  fail(ErrorKind::kConfig, "unknown reduced-bias mode '" + s + "' (expected off|classic|static|dynamic)");
}

std::string mode_name(ResidualMode m) {
  switch (m) {
    case ResidualMode::kClassic: return "classic";
    case ResidualMode::kStatic: return "static";
    case ResidualMode::kDynamic: return "dynamic";
  }
  return "classic";
}

void ReducedBiasResidual::init(ParamStore& params) const {
  if (mode_ != ResidualMode::kDynamic) return;
  // Zero maps: gates start at σ(b) and ignore the caches until trained.
  params.add(prefix_ + ".w_alpha", Tensor({d_, d_}));
  params.add(prefix_ + ".b_alpha", Tensor({1, d_}));
  params.add(prefix_ + ".w_beta", Tensor({d_, d_}));
  params.add(prefix_ + ".b_beta", Tensor({1, d_}));
}

Var ReducedBiasResidual::apply(Tape& tape, const ParamStore& params, const GateState& state, Var x,
                               const Branch& branch, GateProbe* probe, std::size_t active_rows) const {
  Var f = branch(x);
  require(f.shape() == x.shape(), ErrorKind::kContract,
          "reduced-bias: branch output " + shape_str(f.shape()) + " does not match input " +
              shape_str(x.shape()));
  if (probe) *probe = GateProbe{f.id, x.id, active_rows ? active_rows : x.rows()};

  switch (mode_) {
    case ResidualMode::kClassic:
      return add(f, x);
    case ResidualMode::kStatic:
      return add(scale(f, state.static_alpha), scale(x, state.static_beta));
    case ResidualMode::kDynamic: {
      Var gf = tape.constant(state.cache_f);
      Var gx = tape.constant(state.cache_x);
      Var gate_f = sigmoid(add(matmul(gf, params.bind(tape, prefix_ + ".w_alpha")),
                               params.bind(tape, prefix_ + ".b_alpha")));
      Var gate_x = sigmoid(add(matmul(gx, params.bind(tape, prefix_ + ".w_beta")),
                               params.bind(tape, prefix_ + ".b_beta")));
      return add(mul_row(f, gate_f), mul_row(x, gate_x));
    }
  }
  return add(f, x);
}

std::pair<Tensor, Tensor> ReducedBiasResidual::gates(const ParamStore& params, const GateState& state) const {
  switch (mode_) {
    case ResidualMode::kClassic:
      return {Tensor({1, d_}, 1.0), Tensor({1, d_}, 1.0)};
    case ResidualMode::kStatic:
      return {Tensor({1, d_}, state.static_alpha), Tensor({1, d_}, state.static_beta)};
    case ResidualMode::kDynamic:
      break;
  }
  Tensor a = matmul(state.cache_f, params.at(prefix_ + ".w_alpha"));
  Tensor b = matmul(state.cache_x, params.at(prefix_ + ".w_beta"));
  for (std::size_t j = 0; j < d_; ++j) {
    a[j] = scalar::sigmoid(a[j] + params.at(prefix_ + ".b_alpha")[j]);
    b[j] = scalar::sigmoid(b[j] + params.at(prefix_ + ".b_beta")[j]);
  }
  return {a, b};
}

namespace {

Tensor row_mean(std::span<const Tensor> grads, std::size_t d) {
  Tensor mean({1, d});
  std::size_t rows = 0;
  for (const Tensor& g : grads) {
    if (g.size() == 0) continue;
    require(g.cols() == d, ErrorKind::kDimension, "gate cache: gradient width mismatch");
    if (!g.all_finite()) fail(ErrorKind::kDivergence, "gate cache: non-finite gradient");
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < d; ++j) mean[j] += g.at(i, j);
    rows += g.rows();
  }
  if (rows) {
    for (double& v : mean.data()) v /= static_cast<double>(rows);
  }
  return mean;
}

void blend(Tensor& cache, const Tensor& mean, double momentum) {
  for (std::size_t j = 0; j < cache.size(); ++j) cache[j] = momentum * cache[j] + (1.0 - momentum) * mean[j];
}

}  // namespace

void update_gate_cache(GateState& state, std::span<const Tensor> grad_f, std::span<const Tensor> grad_x,
                       double momentum) {
  require(momentum >= 0.0 && momentum < 1.0, ErrorKind::kContract, "gate cache: momentum outside [0, 1)");
  const std::size_t d = state.cache_f.size();
  const Tensor mf = row_mean(grad_f, d);
  const Tensor mx = row_mean(grad_x, d);
  blend(state.cache_f, mf, momentum);
  blend(state.cache_x, mx, momentum);
}

void update_gate_cache(GateState& state, const Tensor& grad_f, const Tensor& grad_x, double momentum) {
  update_gate_cache(state, std::span<const Tensor>(&grad_f, 1), std::span<const Tensor>(&grad_x, 1), momentum);
}

}  // namespace hreb::rb
