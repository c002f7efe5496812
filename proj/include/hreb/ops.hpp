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
#include <span>
#include <vector>

#include "hreb/autograd.hpp"
#include "hreb/tensor.hpp"

namespace hreb {

// Scalar kernels shared by the tape ops and by plain-tensor callers.
namespace scalar {
double sigmoid(double x);
double silu_paper(double x);     // σ(x) + x·σ(x)·(1−σ(x))
double silu_standard(double x);  // x·σ(x)
double softplus(double x);
double logit(double p);
// Gauss error function. Backed by the C library's erf, which is accurate to a
// few ulp (well inside the 1e-7 budget the attention kernels need).
double erf(double x);
// (1 + erf((x−μ)/(σ√2)))/2, evaluated through erfc to keep the lower tail.
double laplace(double x, double mu, double sigma);
// Max-shifted log Σ exp; −∞ entries contribute zero mass.
double logsumexp(std::span<const double> xs);
}  // namespace scalar

// Boolean mask over a rows×cols score matrix. A 1×cols mask broadcasts over
// rows (trailing-axis rule).
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t rows, std::size_t cols, bool fill = true)
      : rows_(rows), cols_(cols), on_(rows * cols, fill ? 1 : 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool operator()(std::size_t r, std::size_t c) const {
    return on_[(rows_ == 1 ? 0 : r) * cols_ + c] != 0;
  }
  void set(std::size_t r, std::size_t c, bool v) { on_[r * cols_ + c] = v ? 1 : 0; }
  std::size_t count_row(std::size_t r) const;
  bool empty() const noexcept { return on_.empty(); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> on_;
};

// Plain tensor helpers (no tape).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor softmax_lastdim(const Tensor& x, const Mask* mask = nullptr);

// ---- Differentiable ops --------------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_row(Var a, Var row);  // a[m×n] + row[1×n]
Var mul_row(Var a, Var row);  // a[m×n] ⊙ row[1×n]
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var one_minus(Var a);

Var sigmoid(Var x);
Var tanh(Var x);
Var exp(Var x);
Var log(Var x);
Var softplus(Var x);
Var erf(Var x);
Var silu_paper(Var x);
Var silu_standard(Var x);

Var sum(Var x);
Var mean(Var x);
// Reduces axis 0 (→ [cols]) or axis 1 / -1 (→ [rows]).
Var logsumexp(Var x, int axis);
Var softmax_lastdim(Var x, const Mask* mask = nullptr);

Var concat_cols(Var a, Var b);
Var slice_rows(Var x, std::size_t begin, std::size_t end);
// [1×h] → [1×h·k], every entry repeated k times in place.
Var repeat_cols(Var row, std::size_t k);
// Row lookup. Rows equal to skip_grad_id receive no gradient.
Var gather_rows(Var table, std::span<const int> ids, int skip_grad_id = -1);

// Row-wise layer normalization with learned gain and bias [1×n].
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
// Per-feature normalization with statistics over rows r < active_rows;
// remaining rows are normalized with the same statistics.
Var masked_batch_norm(Var x, Var gain, Var bias, std::size_t active_rows, double eps = 1e-5);

}  // namespace hreb
