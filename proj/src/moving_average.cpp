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

#include "hreb/moving_average.hpp"

#include <cmath>

#include "hreb/error.hpp"
#include "hreb/ops.hpp"

namespace hreb::ma {

std::vector<double> sma(std::span<const double> x, std::size_t window) {
  require(window >= 1, ErrorKind::kContract, "sma: window must be at least 1");
  require(window <= x.size(), ErrorKind::kContract,
          "sma: window " + std::to_string(window) + " exceeds sequence length " +
              std::to_string(x.size()));
  std::vector<double> out;
  out.reserve(x.size() - window + 1);
  for (std::size_t t = window - 1; t < x.size(); ++t) {
    double s = 0.0;
    for (std::size_t i = t + 1 - window; i <= t; ++i) s += x[i];
    out.push_back(s / static_cast<double>(window));
  }
  return out;
}

std::vector<double> wma(std::span<const double> x, std::span<const double> w) {
  const std::size_t n = w.size();
  require(n >= 1 && n <= x.size(), ErrorKind::kContract, "wma: weight count must be in [1, len(x)]");
  double wsum = 0.0;
  for (double v : w) wsum += v;
  require(wsum != 0.0, ErrorKind::kContract, "wma: weights sum to zero");
  std::vector<double> out;
  out.reserve(x.size() - n + 1);
  for (std::size_t t = n - 1; t < x.size(); ++t) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += w[i] * x[t - i];
    out.push_back(s / wsum);
  }
  return out;
}

std::vector<double> cma(std::span<const double> x) {
  require(!x.empty(), ErrorKind::kContract, "cma: empty sequence");
  std::vector<double> out;
  out.reserve(x.size());
  double s = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    s += x[t];
    out.push_back(s / static_cast<double>(t + 1));
  }
  return out;
}

namespace {

void check_alpha(double a) {
  if (!(a > 0.0 && a <= 1.0))
    fail(ErrorKind::kContract, "ema: decay " + std::to_string(a) + " outside (0, 1]");
}

}  // namespace

std::vector<double> ema_scan(std::span<const double> x, double alpha, double h0) {
  check_alpha(alpha);
  std::vector<double> out(x.size());
  double h = h0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    h = alpha * x[t] + (1.0 - alpha) * h;
    out[t] = h;
  }
  return out;
}

Tensor ema_scan(const Tensor& x, const Tensor& alpha, const Tensor& h0, std::size_t reset_every) {
  const std::size_t seq = x.rows(), n = x.cols();
  require(alpha.size() == n && h0.size() == n, ErrorKind::kDimension,
          "ema_scan: alpha/h0 width must match " + shape_str(x.shape()));
  for (double a : alpha.data()) check_alpha(a);
  Tensor out({seq, n});
  for (std::size_t t = 0; t < seq; ++t) {
    const bool restart = t == 0 || (reset_every > 0 && t % reset_every == 0);
    for (std::size_t j = 0; j < n; ++j) {
      const double prev = restart ? h0[j] : out[(t - 1) * n + j];
      out[t * n + j] = alpha[j] * x[t * n + j] + (1.0 - alpha[j]) * prev;
    }
  }
  return out;
}

Var ema_scan(Var x, Var alpha, Var h0, std::size_t reset_every) {
  Tensor out = ema_scan(x.value(), alpha.value(), h0.value(), reset_every);
  Tensor saved = out;
  return x.tape->record(
      "ema_scan", std::move(out), {x, alpha, h0},
      [x, alpha, h0, saved, reset_every](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(x.id);
        const Tensor& av = t.value(alpha.id);
        const Tensor& hv = t.value(h0.id);
        const std::size_t seq = xv.rows(), n = xv.cols();
        Tensor gx(xv.shape()), ga(av.shape()), gh0(hv.shape());
        std::vector<double> carry(n, 0.0);
        for (std::size_t tt = seq; tt-- > 0;) {
          const bool restart = tt == 0 || (reset_every > 0 && tt % reset_every == 0);
          for (std::size_t j = 0; j < n; ++j) {
            const double gh = g[tt * n + j] + carry[j];
            const double prev = restart ? hv[j] : saved[(tt - 1) * n + j];
            gx[tt * n + j] = av[j] * gh;
            ga[j] += gh * (xv[tt * n + j] - prev);
            carry[j] = (1.0 - av[j]) * gh;
            if (restart) {
              gh0[j] += carry[j];
              carry[j] = 0.0;
            }
          }
        }
        t.accumulate(x.id, gx);
        t.accumulate(alpha.id, ga);
        t.accumulate(h0.id, gh0);
      });
}

std::vector<double> initial_alphas(std::size_t n_head) {
  constexpr double lo = 0.05, hi = 0.95;
  if (n_head == 1) return {std::sqrt(lo * hi)};
  std::vector<double> out(n_head);
  for (std::size_t k = 0; k < n_head; ++k) {
    out[k] = lo * std::pow(hi / lo, static_cast<double>(k) / static_cast<double>(n_head - 1));
  }
  return out;
}

MultiHeadEma::MultiHeadEma(std::string prefix, std::size_t d_model, std::size_t n_head)
    : prefix_(std::move(prefix)), d_(d_model), heads_(n_head) {
  require(n_head >= 1 && d_model % n_head == 0, ErrorKind::kConfig,
          "n_ema_head=" + std::to_string(n_head) + " does not divide d_model=" + std::to_string(d_model));
}

void MultiHeadEma::init(ParamStore& params) const {
  params.add(prefix_ + ".w_in", Tensor::identity(d_));
  params.add(prefix_ + ".w_out", Tensor::identity(d_));
  std::vector<double> logits;
  for (double a : initial_alphas(heads_)) logits.push_back(scalar::logit(a));
  params.add(prefix_ + ".alpha_logit", Tensor::row(std::move(logits)));
  params.add(prefix_ + ".h0", Tensor({1, d_}));
}

Var MultiHeadEma::forward(Tape& tape, const ParamStore& params, Var x, std::size_t reset_every) const {
  require(x.cols() == d_, ErrorKind::kDimension,
          "multihead_ema: input width " + std::to_string(x.cols()) + " != d_model " + std::to_string(d_));
  Var heads = matmul(x, params.bind(tape, prefix_ + ".w_in"));
  Var alpha = repeat_cols(sigmoid(params.bind(tape, prefix_ + ".alpha_logit")), d_ / heads_);
  Var smoothed = ema_scan(heads, alpha, params.bind(tape, prefix_ + ".h0"), reset_every);
  return matmul(smoothed, params.bind(tape, prefix_ + ".w_out"));
}

std::vector<double> MultiHeadEma::alphas(const ParamStore& params) const {
  std::vector<double> out;
  for (double l : params.at(prefix_ + ".alpha_logit").data()) out.push_back(scalar::sigmoid(l));
  return out;
}

}  // namespace hreb::ma
