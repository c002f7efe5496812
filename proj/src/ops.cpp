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

#include "hreb/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hreb/error.hpp"

namespace hreb {

namespace scalar {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double silu_paper(double x) {
  const double s = sigmoid(x);
  return s + x * s * (1.0 - s);
}

double silu_standard(double x) { return x * sigmoid(x); }

double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double erf(double x) { return std::erf(x); }

double laplace(double x, double mu, double sigma) {
  return 0.5 * std::erfc(-(x - mu) / (sigma * std::numbers::sqrt2));
}

double logsumexp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : xs) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : xs) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace scalar

std::size_t Mask::count_row(std::size_t r) const {
  std::size_t n = 0;
  for (std::size_t c = 0; c < cols_; ++c) n += (*this)(r, c) ? 1 : 0;
  return n;
}

namespace {

void check_same(const Tensor& a, const Tensor& b, const char* op) {
  require(a.same_shape(b), ErrorKind::kDimension,
          std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
              shape_str(b.shape()));
}

void check_row(const Tensor& a, const Tensor& row, const char* op) {
  require(row.rows() == 1 && row.cols() == a.cols(), ErrorKind::kDimension,
          std::string(op) + ": row operand " + shape_str(row.shape()) +
              " does not broadcast over " + shape_str(a.shape()));
}

// out[i] = f(x[i]); backward multiplies by df(x[i], out[i]).
template <class F, class DF>
Var unary(const char* op, Var x, F f, DF df) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  Tensor saved = out;
  return x.tape->record(op, std::move(out), {x},
                        [x, df, saved](Tape& t, const Tensor& g) {
                          if (!t.requires_grad(x.id)) return;
                          const Tensor& xv = t.value(x.id);
                          Tensor& gx = t.grad_slot(x.id);
                          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xv[i], saved[i]);
                        });
}

// C += A·B (a: m×k, b: k×n)
void gemm_acc(const Tensor& a, const Tensor& b, Tensor& c, double alpha = 1.0) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = alpha * a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = &b.data()[p * n];
      double* crow = &c.data()[i * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C += A·Bᵀ (a: m×k, b: n×k)
void gemm_nt_acc(const Tensor& a, const Tensor& b, Tensor& c, double alpha = 1.0) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      c[i * n + j] += alpha * s;
    }
  }
}

// C += Aᵀ·B (a: k×m, b: k×n)
void gemm_tn_acc(const Tensor& a, const Tensor& b, Tensor& c, double alpha = 1.0) {
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t i = 0; i < m; ++i) {
      const double av = alpha * a[p * m + i];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += av * b[p * n + j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), ErrorKind::kDimension,
          "matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
              shape_str(b.shape()));
  Tensor c({a.rows(), b.cols()});
  gemm_acc(a, b, c);
  return c;
}

Tensor transpose(const Tensor& a) {
  Tensor t({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

Tensor softmax_lastdim(const Tensor& x, const Mask* mask) {
  const std::size_t m = x.rows(), n = x.cols();
  if (mask) {
    require(mask->cols() == n && (mask->rows() == 1 || mask->rows() == m),
            ErrorKind::kDimension, "softmax: mask does not broadcast to " + shape_str(x.shape()));
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (!mask || (*mask)(i, j)) mx = std::max(mx, x[i * n + j]);
    if (!std::isfinite(mx)) fail(ErrorKind::kDegenerate, "softmax: row " + std::to_string(i) + " is fully masked");
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double e = (!mask || (*mask)(i, j)) ? std::exp(x[i * n + j] - mx) : 0.0;
      out[i * n + j] = e;
      s += e;
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= s;
  }
  return out;
}

Var matmul(Var a, Var b) {
  Tensor out = matmul(a.value(), b.value());
  return a.tape->record("matmul", std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a.id)) gemm_nt_acc(g, t.value(b.id), t.grad_slot(a.id), testing::matmul_grad_fault());
    if (t.requires_grad(b.id)) gemm_tn_acc(t.value(a.id), g, t.grad_slot(b.id));
  });
}

Var transpose(Var a) {
  return a.tape->record("transpose", transpose(a.value()), {a}, [a](Tape& t, const Tensor& g) {
    t.accumulate(a.id, Tensor(t.value(a.id).shape(), transpose(g).vec()));
  });
}

Var add(Var a, Var b) {
  check_same(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return a.tape->record("add", std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a.id, g);
    t.accumulate(b.id, g);
  });
}

Var sub(Var a, Var b) {
  check_same(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape->record("sub", std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a.id, g);
    if (t.requires_grad(b.id)) {
      Tensor& gb = t.grad_slot(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  check_same(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape->record("mul", std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a.id)) {
      Tensor& ga = t.grad_slot(a.id);
      const Tensor& bv = t.value(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(b.id)) {
      Tensor& gb = t.grad_slot(b.id);
      const Tensor& av = t.value(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var add_row(Var a, Var row) {
  check_row(a.value(), row.value(), "add_row");
  Tensor out = a.value();
  const std::size_t n = out.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += row.value()[i % n];
  return a.tape->record("add_row", std::move(out), {a, row}, [a, row, n](Tape& t, const Tensor& g) {
    t.accumulate(a.id, g);
    if (t.requires_grad(row.id)) {
      Tensor& gr = t.grad_slot(row.id);
      for (std::size_t i = 0; i < g.size(); ++i) gr[i % n] += g[i];
    }
  });
}

Var mul_row(Var a, Var row) {
  check_row(a.value(), row.value(), "mul_row");
  Tensor out = a.value();
  const std::size_t n = out.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= row.value()[i % n];
  return a.tape->record("mul_row", std::move(out), {a, row}, [a, row, n](Tape& t, const Tensor& g) {
    if (t.requires_grad(a.id)) {
      Tensor& ga = t.grad_slot(a.id);
      const Tensor& rv = t.value(row.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * rv[i % n];
    }
    if (t.requires_grad(row.id)) {
      Tensor& gr = t.grad_slot(row.id);
      const Tensor& av = t.value(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) gr[i % n] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double c) {
  return unary("scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_scalar(Var a, double c) {
  return unary("add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var one_minus(Var a) {
  return unary("one_minus", a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Var sigmoid(Var x) {
  return unary("sigmoid", x, scalar::sigmoid, [](double, double s) { return s * (1.0 - s); });
}

Var tanh(Var x) {
  return unary("tanh", x, [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(Var x) {
  return unary("log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var softplus(Var x) {
  return unary("softplus", x, scalar::softplus, [](double v, double) { return scalar::sigmoid(v); });
}

Var erf(Var x) {
  return unary("erf", x, scalar::erf, [](double v, double) {
    return 2.0 * std::numbers::inv_sqrtpi * std::exp(-v * v);
  });
}

Var silu_paper(Var x) {
  // d/dx [s + x s(1−s)] = s(1−s) + s(1−s) + x s(1−s)(1−2s)
  return unary("silu_paper", x, scalar::silu_paper, [](double v, double) {
    const double s = scalar::sigmoid(v);
    const double ds = s * (1.0 - s);
    return 2.0 * ds + v * ds * (1.0 - 2.0 * s);
  });
}

Var silu_standard(Var x) {
  return unary("silu_standard", x, scalar::silu_standard, [](double v, double) {
    const double s = scalar::sigmoid(v);
    return s + v * s * (1.0 - s);
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape->record("sum", Tensor::scalar(s), {x}, [x](Tape& t, const Tensor& g) {
    t.accumulate(x.id, Tensor(t.value(x.id).shape(), g.item()));
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  return scale(sum(x), 1.0 / n);
}

Var logsumexp(Var x, int axis) {
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  const bool over_cols = axis == 1 || axis == -1;
  require(over_cols || axis == 0, ErrorKind::kContract, "logsumexp: axis must be 0, 1 or -1");
  const std::size_t outer = over_cols ? m : n;
  const std::size_t inner = over_cols ? n : m;
  Tensor out(Shape{outer});
  std::vector<double> buf(inner);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) buf[i] = over_cols ? xv[o * n + i] : xv[i * n + o];
    out[o] = scalar::logsumexp(buf);
  }
  Tensor saved = out;
  return x.tape->record("logsumexp", std::move(out), {x},
                        [x, saved, over_cols, outer, inner, n](Tape& t, const Tensor& g) {
                          if (!t.requires_grad(x.id)) return;
                          const Tensor& xv = t.value(x.id);
                          Tensor& gx = t.grad_slot(x.id);
                          for (std::size_t o = 0; o < outer; ++o) {
                            for (std::size_t i = 0; i < inner; ++i) {
                              const std::size_t k = over_cols ? o * n + i : i * n + o;
                              gx[k] += g[o] * std::exp(xv[k] - saved[o]);
                            }
                          }
                        });
}

Var softmax_lastdim(Var x, const Mask* mask) {
  Tensor out = softmax_lastdim(x.value(), mask);
  Tensor saved = out;
  return x.tape->record("softmax", std::move(out), {x}, [x, saved](Tape& t, const Tensor& g) {
    if (!t.requires_grad(x.id)) return;
    Tensor& gx = t.grad_slot(x.id);
    const std::size_t m = saved.rows(), n = saved.cols();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * saved[i * n + j];
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += saved[i * n + j] * (g[i * n + j] - dot);
    }
  });
}

Var concat_cols(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.rows() == bv.rows(), ErrorKind::kDimension,
          "concat_cols: row counts differ, " + shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
  const std::size_t m = av.rows(), na = av.cols(), nb = bv.cols();
  Tensor out({m, na + nb});
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(&av.data()[i * na], na, &out.data()[i * (na + nb)]);
    std::copy_n(&bv.data()[i * nb], nb, &out.data()[i * (na + nb) + na]);
  }
  return a.tape->record("concat_cols", std::move(out), {a, b}, [a, b, m, na, nb](Tape& t, const Tensor& g) {
    if (t.requires_grad(a.id)) {
      Tensor& ga = t.grad_slot(a.id);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < na; ++j) ga[i * na + j] += g[i * (na + nb) + j];
    }
    if (t.requires_grad(b.id)) {
      Tensor& gb = t.grad_slot(b.id);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < nb; ++j) gb[i * nb + j] += g[i * (na + nb) + na + j];
    }
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  require(begin < end && end <= xv.rows(), ErrorKind::kContract,
          "slice_rows: invalid range [" + std::to_string(begin) + "," + std::to_string(end) +
              ") for " + shape_str(xv.shape()));
  const std::size_t n = xv.cols();
  Tensor out({end - begin, n},
             std::vector<double>(xv.vec().begin() + begin * n, xv.vec().begin() + end * n));
  return x.tape->record("slice_rows", std::move(out), {x}, [x, begin, n](Tape& t, const Tensor& g) {
    if (!t.requires_grad(x.id)) return;
    Tensor& gx = t.grad_slot(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) gx[begin * n + i] += g[i];
  });
}

Var repeat_cols(Var row, std::size_t k) {
  const Tensor& rv = row.value();
  const std::size_t h = rv.size();
  Tensor out({1, h * k});
  for (std::size_t i = 0; i < h * k; ++i) out[i] = rv[i / k];
  return row.tape->record("repeat_cols", std::move(out), {row}, [row, k](Tape& t, const Tensor& g) {
    if (!t.requires_grad(row.id)) return;
    Tensor& gr = t.grad_slot(row.id);
    for (std::size_t i = 0; i < g.size(); ++i) gr[i / k] += g[i];
  });
}

Var gather_rows(Var table, std::span<const int> ids, int skip_grad_id) {
  const Tensor& tv = table.value();
  const std::size_t n = tv.cols();
  Tensor out({ids.size(), n});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < tv.rows(), ErrorKind::kContract,
            "gather_rows: id " + std::to_string(ids[i]) + " out of range");
    std::copy_n(&tv.data()[ids[i] * n], n, &out.data()[i * n]);
  }
  std::vector<int> saved(ids.begin(), ids.end());
  return table.tape->record("gather_rows", std::move(out), {table},
                            [table, saved, n, skip_grad_id](Tape& t, const Tensor& g) {
                              if (!t.requires_grad(table.id)) return;
                              Tensor& gt = t.grad_slot(table.id);
                              for (std::size_t i = 0; i < saved.size(); ++i) {
                                if (saved[i] == skip_grad_id) continue;
                                for (std::size_t j = 0; j < n; ++j) gt[saved[i] * n + j] += g[i * n + j];
                              }
                            });
}

namespace {

// y = gain ⊙ x̂ + bias where x̂ = (x − mean)/sqrt(var + eps); the statistics
// are taken along rows (per position) or along columns (per feature).
struct NormStats {
  std::vector<double> mean, inv_std;
};

Var affine_normalize(const char* op, Var x, Var gain, Var bias, const NormStats& st, bool per_row,
                     std::size_t active_rows) {
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  check_row(xv, gain.value(), op);
  check_row(xv, bias.value(), op);
  Tensor xhat(xv.shape());
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t s = per_row ? i : j;
      xhat[i * n + j] = (xv[i * n + j] - st.mean[s]) * st.inv_std[s];
      out[i * n + j] = gain.value()[j] * xhat[i * n + j] + bias.value()[j];
    }
  }
  return x.tape->record(op, std::move(out), {x, gain, bias},
                        [x, gain, bias, xhat, st, per_row, active_rows, m, n](Tape& t, const Tensor& g) {
                          const Tensor& gv = t.value(gain.id);
                          if (t.requires_grad(gain.id)) {
                            Tensor& gg = t.grad_slot(gain.id);
                            for (std::size_t i = 0; i < m * n; ++i) gg[i % n] += g[i] * xhat[i];
                          }
                          if (t.requires_grad(bias.id)) {
                            Tensor& gb = t.grad_slot(bias.id);
                            for (std::size_t i = 0; i < m * n; ++i) gb[i % n] += g[i];
                          }
                          if (!t.requires_grad(x.id)) return;
                          Tensor& gx = t.grad_slot(x.id);
                          if (per_row) {
                            for (std::size_t i = 0; i < m; ++i) {
                              double s1 = 0.0, s2 = 0.0;
                              for (std::size_t j = 0; j < n; ++j) {
                                const double dx = g[i * n + j] * gv[j];
                                s1 += dx;
                                s2 += dx * xhat[i * n + j];
                              }
                              for (std::size_t j = 0; j < n; ++j) {
                                const double dx = g[i * n + j] * gv[j];
                                gx[i * n + j] += st.inv_std[i] * (dx - s1 / n - xhat[i * n + j] * s2 / n);
                              }
                            }
                            return;
                          }
                          // Per-feature statistics over the first active_rows rows; rows past
                          // that only read the statistics.
                          const double cnt = static_cast<double>(active_rows);
                          for (std::size_t j = 0; j < n; ++j) {
                            double s1 = 0.0, s2 = 0.0;
                            for (std::size_t i = 0; i < m; ++i) {
                              const double dx = g[i * n + j] * gv[j];
                              s1 += dx;
                              s2 += dx * xhat[i * n + j];
                            }
                            for (std::size_t i = 0; i < m; ++i) {
                              const double dx = g[i * n + j] * gv[j];
                              double v = st.inv_std[j] * dx;
                              if (i < active_rows) v -= st.inv_std[j] * (s1 + xhat[i * n + j] * s2) / cnt;
                              gx[i * n + j] += v;
                            }
                          }
                        });
}

}  // namespace

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  NormStats st{std::vector<double>(m), std::vector<double>(m)};
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xv[i * n + j];
    mu /= n;
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (xv[i * n + j] - mu) * (xv[i * n + j] - mu);
    var /= n;
    st.mean[i] = mu;
    st.inv_std[i] = 1.0 / std::sqrt(var + eps);
  }
  return affine_normalize("layer_norm", x, gain, bias, st, true, m);
}

Var masked_batch_norm(Var x, Var gain, Var bias, std::size_t active_rows, double eps) {
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  require(active_rows >= 1 && active_rows <= m, ErrorKind::kContract,
          "masked_batch_norm: active rows out of range");
  NormStats st{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t j = 0; j < n; ++j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < active_rows; ++i) mu += xv[i * n + j];
    mu /= active_rows;
    double var = 0.0;
    for (std::size_t i = 0; i < active_rows; ++i) var += (xv[i * n + j] - mu) * (xv[i * n + j] - mu);
    var /= active_rows;
    st.mean[j] = mu;
    st.inv_std[j] = 1.0 / std::sqrt(var + eps);
  }
  return affine_normalize("masked_batch_norm", x, gain, bias, st, false, active_rows);
}

}  // namespace hreb
