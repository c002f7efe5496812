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
#include <string>

#include "hreb/autograd.hpp"
#include "hreb/params.hpp"

namespace hreb {

// Scalar-valued function of one tensor, expressed on a tape so the same code
// yields both the value and the analytic gradient.
using TapeFn = std::function<Var(Tape&, Var)>;

// Max over components of |analytic − central difference| / max(1, |analytic|).
// Throws kOracle if two baseline evaluations disagree.
double finite_diff_check(const TapeFn& f, const Tensor& x, double eps = 1e-5);

struct GradCheckResult {
  double max_error = 0.0;
  std::string worst;  // "param[index]" of the worst component
  std::size_t checked = 0;
};

// Checks d loss / d p for every parameter in the store. The loss builder is
// invoked on fresh tapes; parameters are perturbed in place and restored.
GradCheckResult check_param_grads(const std::function<Var(Tape&)>& loss, ParamStore& params,
                                  double eps = 1e-5);

}  // namespace hreb
