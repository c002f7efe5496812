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

#include "hreb/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "hreb/error.hpp"

namespace hreb {

namespace {

double eval(const TapeFn& f, const Tensor& x) {
  Tape tape(false);
  return f(tape, tape.constant(x)).value().item();
}

double eval(const std::function<Var(Tape&)>& loss) {
  Tape tape(false);
  return loss(tape).value().item();
}

double component_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

}  // namespace

double finite_diff_check(const TapeFn& f, const Tensor& x, double eps) {
  require(eps > 0, ErrorKind::kContract, "finite_diff_check: eps must be positive");
  const double base1 = eval(f, x);
  const double base2 = eval(f, x);
  if (base1 != base2) fail(ErrorKind::kOracle, "finite_diff_check: function is not deterministic");

  Tape tape;
  Var in = tape.input(x);
  tape.backward(f(tape, in));
  Tensor analytic = in.grad().size() ? in.grad() : Tensor(x.shape());

  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = eval(f, probe);
    probe[i] = x[i] - eps;
    const double down = eval(f, probe);
    probe[i] = x[i];
    worst = std::max(worst, component_error(analytic[i], (up - down) / (2 * eps)));
  }
  return worst;
}

GradCheckResult check_param_grads(const std::function<Var(Tape&)>& loss, ParamStore& params,
                                  double eps) {
  const double base1 = eval(loss);
  const double base2 = eval(loss);
  if (base1 != base2) fail(ErrorKind::kOracle, "check_param_grads: loss is not deterministic");

  Tape tape;
  tape.backward(loss(tape));
  const GradMap grads = collect_grads(tape, params);

  GradCheckResult res;
  for (auto& [name, p] : params) {
    const Tensor& g = grads.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double orig = p[i];
      p[i] = orig + eps;
      const double up = eval(loss);
      p[i] = orig - eps;
      const double down = eval(loss);
      p[i] = orig;
      const double err = component_error(g[i], (up - down) / (2 * eps));
      ++res.checked;
      if (err > res.max_error) {
        res.max_error = err;
        res.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

}  // namespace hreb
