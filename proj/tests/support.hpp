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

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "hreb/autograd.hpp"
#include "hreb/ops.hpp"
#include "hreb/params.hpp"

namespace hreb::test {

// Seeded normal tensor; independent of the library RNG.
inline Tensor randn(std::size_t rows, std::size_t cols, unsigned seed, double scale = 1.0) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> dist(0.0, scale);
  Tensor t({rows, cols});
  for (auto& v : t.vec()) v = dist(gen);
  return t;
}

// Fixed non-uniform weights so a scalar reduction sees every entry
// differently.
inline Var weighted(Var y) {
  Tensor w(y.shape());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(1.0 + 0.7 * static_cast<double>(i));
  return sum(mul(y, y.tape->constant(std::move(w))));
}

// Max relative error between the tape gradient and a central difference
// computed here from plain forward evaluations.
inline double central_diff_error(const std::function<Var(Tape&, Var)>& f, Tensor x, double eps = 1e-6) {
  Tape tape;
  Var in = tape.input(x);
  tape.backward(f(tape, in));
  const Tensor analytic = tape.grad(in.id);
  auto eval = [&](const Tensor& at) {
    Tape t(false);
    return f(t, t.input(at)).value().item();
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = eval(x);
    x[i] = keep - eps;
    const double down = eval(x);
    x[i] = keep;
    const double numeric = (up - down) / (2 * eps);
    const double a = analytic.size() ? analytic[i] : 0.0;
    worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
  }
  return worst;
}

// Same check for one named parameter of a store; the loss builder binds
// parameters itself. Values are perturbed in place and restored.
inline double param_diff_error(const std::function<Var(Tape&)>& loss, ParamStore& params, const std::string& name,
                               double eps = 1e-6) {
  Tensor& p = params.at(name);
  Tape tape;
  tape.backward(loss(tape));
  const Tensor analytic = tape.param_grad(p);
  auto eval = [&] {
    Tape t(false);
    return loss(t).value().item();
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + eps;
    const double up = eval();
    p[i] = keep - eps;
    const double down = eval();
    p[i] = keep;
    const double numeric = (up - down) / (2 * eps);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i])));
  }
  return worst;
}

}  // namespace hreb::test
