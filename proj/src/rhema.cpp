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

#include "hreb/rhema.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hreb/error.hpp"

namespace hreb::rhema {

AttnFn parse_attn_fn(const std::string& s) {
  if (s == "softmax") return AttnFn::kSoftmax;
  if (s == "laplace") return AttnFn::kLaplace;
  if (s == "reduced_laplace") return AttnFn::kReducedLaplace;
  fail(ErrorKind::kConfig, "unknown attn_fn '" + s + "' (expected softmax|laplace|reduced_laplace)");
}

std::string attn_fn_name(AttnFn f) {
  switch (f) {
    case AttnFn::kSoftmax: return "softmax";
    case AttnFn::kLaplace: return "laplace";
    case AttnFn::kReducedLaplace: return "reduced_laplace";
  }
  return "reduced_laplace";
}

SiluVariant parse_silu(const std::string& s) {
  if (s == "paper") return SiluVariant::kPaper;
  if (s == "standard") return SiluVariant::kStandard;
  fail(ErrorKind::kConfig, "unknown silu_variant '" + s + "' (expected paper|standard)");
}

std::string silu_name(SiluVariant s) { return s == SiluVariant::kPaper ? "paper" : "standard"; }

void RhemaConfig::validate() const {
  require(d_model >= 1, ErrorKind::kConfig, "d_model must be positive");
  require(z_dim == d_model, ErrorKind::kConfig,
          "z_dim (" + std::to_string(z_dim) + ") must equal d_model (" + std::to_string(d_model) +
              "): the shared representation adds X_in");
  require(v_dim >= 1, ErrorKind::kConfig, "v_dim must be positive");
  require(n_ema_head >= 1 && d_model % n_ema_head == 0, ErrorKind::kConfig,
          "n_ema_head=" + std::to_string(n_ema_head) + " must divide d_model=" + std::to_string(d_model));
  require(daleth >= 0.0, ErrorKind::kConfig, "daleth must be positive (0 selects sqrt(z_dim))");
}

double RhemaConfig::scale() const {
  return daleth > 0.0 ? daleth : std::sqrt(static_cast<double>(z_dim));
}

Mask attention_mask(std::size_t seq, std::size_t length, std::size_t chunk_size) {
  Mask m(seq, seq, false);
  for (std::size_t i = 0; i < seq; ++i) {
    if (i >= length) {
      m.set(i, i, true);
      continue;
    }
    for (std::size_t j = 0; j < length; ++j) {
      if (chunk_size == 0 || i / chunk_size == j / chunk_size) m.set(i, j, true);
    }
  }
  return m;
}

Var apply_silu(Var x, SiluVariant v) {
  return v == SiluVariant::kPaper ? silu_paper(x) : silu_standard(x);
}

namespace {

void check_mask(const Tensor& s, const Mask* mask, const char* op) {
  if (!mask) return;
  require(mask->cols() == s.cols() && (mask->rows() == 1 || mask->rows() == s.rows()),
          ErrorKind::kDimension, std::string(op) + ": mask does not broadcast to " + shape_str(s.shape()));
}

bool admissible(const Mask* mask, std::size_t i, std::size_t j) { return !mask || (*mask)(i, j); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

Var laplace_attn(Var scores, Var mu, Var sigma, const Mask* mask) {
  const Tensor& s = scores.value();
  check_mask(s, mask, "laplace_attn");
  const double m = mu.value().item();
  const double sg = sigma.value().item();
  require(sg > 0.0, ErrorKind::kContract, "laplace_attn: sigma must be positive");
  const std::size_t rows = s.rows(), cols = s.cols();
  Tensor out(s.shape());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      if (admissible(mask, i, j)) out[i * cols + j] = scalar::laplace(s[i * cols + j], m, sg);
  Mask saved_mask = mask ? *mask : Mask();
  return scores.tape->record(
      "laplace_attn", std::move(out), {scores, mu, sigma},
      [scores, mu, sigma, saved_mask, rows, cols](Tape& t, const Tensor& g) {
        const Tensor& s = t.value(scores.id);
        const double m = t.value(mu.id).item();
        const double sg = t.value(sigma.id).item();
        const Mask* mk = saved_mask.empty() ? nullptr : &saved_mask;
        Tensor gs(s.shape());
        double gmu = 0.0, gsg = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < cols; ++j) {
            if (!admissible(mk, i, j)) continue;
            const double z = (s[i * cols + j] - m) / sg;
            const double d = normal_pdf(z) / sg;
            const double gij = g[i * cols + j];
            gs[i * cols + j] = gij * d;
            gmu -= gij * d;
            gsg -= gij * d * z;
          }
        }
        t.accumulate(scores.id, gs);
        t.accumulate(mu.id, Tensor(t.value(mu.id).shape(), gmu));
        t.accumulate(sigma.id, Tensor(t.value(sigma.id).shape(), gsg));
      });
}

Var reduced_laplace_attn(Var scores, Var context, Var mu, Var sigma, const Mask* mask) {
  const Tensor& s = scores.value();
  const Tensor& c = context.value();
  require(s.same_shape(c), ErrorKind::kDimension,
          "reduced_laplace_attn: context " + shape_str(c.shape()) + " vs scores " + shape_str(s.shape()));
  check_mask(s, mask, "reduced_laplace_attn");
  const double m = mu.value().item();
  const double sg = sigma.value().item();
  require(sg > 0.0, ErrorKind::kContract, "reduced_laplace_attn: sigma must be positive");
  const std::size_t rows = s.rows(), cols = s.cols();

  Tensor out(s.shape());
  std::vector<double> row_sum(rows);
  std::vector<std::size_t> argmin(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    double cmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j) {
      if (admissible(mask, i, j) && c[i * cols + j] < cmin) {
        cmin = c[i * cols + j];
        argmin[i] = j;
      }
    }
    if (!std::isfinite(cmin))
      fail(ErrorKind::kDegenerate, "reduced_laplace_attn: row " + std::to_string(i) + " is fully masked");
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      if (!admissible(mask, i, j)) continue;
      const double r = scalar::laplace(s[i * cols + j], m, sg) + c[i * cols + j] - cmin;
      out[i * cols + j] = r;
      total += r;
    }
    if (!(total > 0.0))
      fail(ErrorKind::kDegenerate, "reduced_laplace_attn: row " + std::to_string(i) + " has no mass");
    row_sum[i] = total;
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] /= total;
  }

  Tensor weights = out;
  Mask saved_mask = mask ? *mask : Mask();
  return scores.tape->record(
      "reduced_laplace_attn", std::move(out), {scores, context, mu, sigma},
      [scores, context, mu, sigma, weights, row_sum, argmin, saved_mask, rows, cols](Tape& t, const Tensor& g) {
        const Tensor& s = t.value(scores.id);
        const double m = t.value(mu.id).item();
        const double sg = t.value(sigma.id).item();
        const Mask* mk = saved_mask.empty() ? nullptr : &saved_mask;
        Tensor gs(s.shape()), gc(s.shape());
        double gmu = 0.0, gsg = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < cols; ++j) dot += g[i * cols + j] * weights[i * cols + j];
          double dr_total = 0.0;
          for (std::size_t j = 0; j < cols; ++j) {
            if (!admissible(mk, i, j)) continue;
            const double dr = (g[i * cols + j] - dot) / row_sum[i];
            const double z = (s[i * cols + j] - m) / sg;
            const double d = normal_pdf(z) / sg;
            gs[i * cols + j] += dr * d;
            gmu -= dr * d;
            gsg -= dr * d * z;
            gc[i * cols + j] += dr;
            dr_total += dr;
          }
          gc[i * cols + argmin[i]] -= dr_total;
        }
        t.accumulate(scores.id, gs);
        t.accumulate(context.id, gc);
        t.accumulate(mu.id, Tensor(t.value(mu.id).shape(), gmu));
        t.accumulate(sigma.id, Tensor(t.value(sigma.id).shape(), gsg));
      });
}

Var relative_bias(Var b_rel, std::size_t seq, std::size_t window) {
  const Tensor& b = b_rel.value();
  require(b.size() == 2 * window + 1, ErrorKind::kDimension, "relative_bias: table size must be 2*window+1");
  const auto index = [window](std::size_t i, std::size_t j) {
    const long off = static_cast<long>(j) - static_cast<long>(i);
    const long w = static_cast<long>(window);
    return static_cast<std::size_t>(std::clamp(off, -w, w) + w);
  };
  Tensor out({seq, seq});
  for (std::size_t i = 0; i < seq; ++i)
    for (std::size_t j = 0; j < seq; ++j) out.at(i, j) = b[index(i, j)];
  return b_rel.tape->record("relative_bias", std::move(out), {b_rel}, [b_rel, seq, index](Tape& t, const Tensor& g) {
    if (!t.requires_grad(b_rel.id)) return;
    Tensor& gb = t.grad_slot(b_rel.id);
    for (std::size_t i = 0; i < seq; ++i)
      for (std::size_t j = 0; j < seq; ++j) gb[index(i, j)] += g[i * seq + j];
  });
}

// ---- RhemaBlock -----------------------------------------------------------

RhemaBlock::RhemaBlock(std::string prefix, RhemaConfig cfg)
    : prefix_(std::move(prefix)),
      cfg_(cfg),
      ema_(prefix_ + ".ema", cfg.d_model, cfg.n_ema_head),
      rb_attn_(prefix_ + ".rb_attn", cfg.d_model, cfg.residual),
      rb_ff_(prefix_ + ".rb_ff", cfg.d_model, cfg.residual) {
  cfg_.validate();
}

void RhemaBlock::init(ParamStore& params, Rng& rng) const {
  const std::size_t d = cfg_.d_model, z = cfg_.z_dim, v = cfg_.v_dim;
  const std::string& p = prefix_;
  params.add(p + ".norm_attn.gain", Tensor({1, d}, 1.0));
  params.add(p + ".norm_attn.bias", Tensor({1, d}));
  params.add(p + ".norm_ff.gain", Tensor({1, d}, 1.0));
  params.add(p + ".norm_ff.bias", Tensor({1, d}));
  ema_.init(params);
  params.add(p + ".w_z", glorot(d, z, rng));
  params.add(p + ".b_z", Tensor({1, z}));
  Tensor kq = uniform_tensor({1, z}, 0.9, 1.1, rng);
  Tensor kk = uniform_tensor({1, z}, 0.9, 1.1, rng);
  params.add(p + ".kappa_q", std::move(kq));
  params.add(p + ".mu_q", Tensor({1, z}));
  params.add(p + ".kappa_k", std::move(kk));
  params.add(p + ".mu_k", Tensor({1, z}));
  params.add(p + ".w_v", glorot(d, v, rng));
  params.add(p + ".b_v", Tensor({1, v}));
  params.add(p + ".b_rel", Tensor({1, 2 * cfg_.rel_bias_window + 1}));
  params.add(p + ".w_h", glorot(z, d, rng));
  params.add(p + ".u_h", glorot(v, d, rng));
  params.add(p + ".b_h", Tensor({1, d}));
  params.add(p + ".w_gamma", glorot(z, v, rng));
  params.add(p + ".b_gamma", Tensor({1, v}));
  params.add(p + ".w_phi", glorot(z, d, rng));
  params.add(p + ".b_phi", Tensor({1, d}));
  // Laplace kernel starts as the GELU-matching normal CDF used by MEGA.
  params.add(p + ".lap_mu", Tensor({1, 1}, std::sqrt(0.5)));
  const double sigma0 = std::sqrt(1.0 / (4.0 * std::numbers::pi));
  params.add(p + ".lap_sigma_raw", Tensor({1, 1}, std::log(std::expm1(sigma0))));
  params.add(p + ".ff.w1", glorot(d, 2 * d, rng));
  params.add(p + ".ff.b1", Tensor({1, 2 * d}));
  params.add(p + ".ff.w2", glorot(2 * d, d, rng));
  params.add(p + ".ff.b2", Tensor({1, d}));
  rb_attn_.init(params);
  rb_ff_.init(params);
}

Var RhemaBlock::shared_rep(Tape& tape, const ParamStore& params, Var x_in, std::size_t ema_reset) const {
  require(x_in.cols() == cfg_.d_model, ErrorKind::kConfig, "shared_rep: input width must equal d_model");
  Var x_ema = ema_.forward(tape, params, x_in, ema_reset);
  Var proj = add_row(matmul(x_ema, params.bind(tape, prefix_ + ".w_z")), params.bind(tape, prefix_ + ".b_z"));
  return add(apply_silu(proj, cfg_.silu), x_in);
}

std::pair<Var, Var> RhemaBlock::qk_transform(Tape& tape, const ParamStore& params, Var z) const {
  Var q = add_row(mul_row(z, params.bind(tape, prefix_ + ".kappa_q")), params.bind(tape, prefix_ + ".mu_q"));
  Var k = add_row(mul_row(z, params.bind(tape, prefix_ + ".kappa_k")), params.bind(tape, prefix_ + ".mu_k"));
  return {q, k};
}

Var RhemaBlock::value_transform(Tape& tape, const ParamStore& params, Var x_in) const {
  Var proj = add_row(matmul(x_in, params.bind(tape, prefix_ + ".w_v")), params.bind(tape, prefix_ + ".b_v"));
  return apply_silu(proj, cfg_.silu);
}

Var RhemaBlock::attention(Tape& tape, const ParamStore& params, Var q, Var k, Var v, const Mask& mask,
                          AttentionTrace* trace) const {
  require(q.cols() == k.cols(), ErrorKind::kDimension, "attention: Q and K widths differ");
  const std::size_t seq = q.rows();
  Var scores = scale(matmul(q, transpose(k)), 1.0 / cfg_.scale());
  scores = add(scores, relative_bias(params.bind(tape, prefix_ + ".b_rel"), seq, cfg_.rel_bias_window));

  Var weights;
  switch (cfg_.attn_fn) {
    case AttnFn::kSoftmax:
      weights = softmax_lastdim(scores, &mask);
      break;
    case AttnFn::kLaplace:
    case AttnFn::kReducedLaplace: {
      Var mu = params.bind(tape, prefix_ + ".lap_mu");
      Var sigma = softplus(params.bind(tape, prefix_ + ".lap_sigma_raw"));
      weights = cfg_.attn_fn == AttnFn::kLaplace ? laplace_attn(scores, mu, sigma, &mask)
                                                 : reduced_laplace_attn(scores, scores, mu, sigma, &mask);
      break;
    }
  }
  if (trace) {
    trace->scores = scores.value();
    trace->weights = weights.value();
    trace->mask = mask;
  }
  return matmul(weights, v);
}

Var RhemaBlock::gated_output(Tape& tape, const ParamStore& params, Var x_in, Var z, Var o,
                             AttentionTrace* trace) const {
  const std::string& p = prefix_;
  Var gamma = sigmoid(add_row(matmul(z, params.bind(tape, p + ".w_gamma")), params.bind(tape, p + ".b_gamma")));
  Var phi = sigmoid(add_row(matmul(z, params.bind(tape, p + ".w_phi")), params.bind(tape, p + ".b_phi")));
  Var pre = add(matmul(z, params.bind(tape, p + ".w_h")), matmul(mul(gamma, o), params.bind(tape, p + ".u_h")));
  Var y_hat = apply_silu(add_row(pre, params.bind(tape, p + ".b_h")), cfg_.silu);
  if (trace) {
    trace->gamma = gamma.value();
    trace->phi = phi.value();
  }
  return add(mul(phi, y_hat), mul(one_minus(phi), x_in));
}

Var RhemaBlock::normalize(Tape& tape, const ParamStore& params, const std::string& which, Var x,
                          std::size_t length) const {
  Var gain = params.bind(tape, prefix_ + "." + which + ".gain");
  Var bias = params.bind(tape, prefix_ + "." + which + ".bias");
  if (cfg_.norm == NormKind::kBatch) return masked_batch_norm(x, gain, bias, std::max<std::size_t>(1, length));
  return layer_norm(x, gain, bias);
}

Var RhemaBlock::feed_forward(Tape& tape, const ParamStore& params, Var x) const {
  const std::string& p = prefix_;
  Var h = silu_paper(add_row(matmul(x, params.bind(tape, p + ".ff.w1")), params.bind(tape, p + ".ff.b1")));
  return add_row(matmul(h, params.bind(tape, p + ".ff.w2")), params.bind(tape, p + ".ff.b2"));
}

Var RhemaBlock::forward(Tape& tape, const ParamStore& params, std::span<const rb::GateState> gates, Var x,
                        const Mask& mask, std::size_t length, std::size_t ema_reset,
                        std::vector<rb::GateProbe>* probes, AttentionTrace* trace) const {
  require(gates.size() >= 2, ErrorKind::kContract, "rhema_block: expects two gate states");
  rb::GateProbe probe_attn, probe_ff;
  auto attn_branch = [&](Var in) {
    Var x_in = normalize(tape, params, "norm_attn", in, length);
    Var z = shared_rep(tape, params, x_in, ema_reset);
    auto [q, k] = qk_transform(tape, params, z);
    Var v = value_transform(tape, params, x_in);
    if (trace) {
      trace->z = z.value();
      trace->q = q.value();
      trace->k = k.value();
      trace->v = v.value();
    }
    Var o = attention(tape, params, q, k, v, mask, trace);
    return gated_output(tape, params, x_in, z, o, trace);
  };
  Var h = rb_attn_.apply(tape, params, gates[0], x, attn_branch, &probe_attn, length);
  auto ff_branch = [&](Var in) { return feed_forward(tape, params, normalize(tape, params, "norm_ff", in, length)); };
  Var y = rb_ff_.apply(tape, params, gates[1], h, ff_branch, &probe_ff, length);
  if (probes) {
    probes->push_back(probe_attn);
    probes->push_back(probe_ff);
  }
  return y;
}

// ---- HierarchicalEncoder ---------------------------------------------------

HierarchicalEncoder::HierarchicalEncoder(std::string prefix, RhemaConfig cfg)
    : cfg_(cfg), local_(prefix + ".local", cfg), global_(prefix + ".global", cfg) {}

void HierarchicalEncoder::init(ParamStore& params, Rng& rng) const {
  local_.init(params, rng);
  global_.init(params, rng);
}

std::vector<std::string> HierarchicalEncoder::residual_names() const {
  auto names = local_.residual_names();
  for (auto& n : global_.residual_names()) names.push_back(n);
  return names;
}

Mask HierarchicalEncoder::local_mask(std::size_t seq, std::size_t length) const {
  return attention_mask(seq, length, cfg_.chunk_size);
}

Var HierarchicalEncoder::forward(Tape& tape, const ParamStore& params, std::span<const rb::GateState> gates,
                                 Var x, std::size_t length, std::vector<rb::GateProbe>* probes,
                                 std::vector<AttentionTrace>* traces) const {
  require(gates.size() >= 4, ErrorKind::kContract, "hierarchical_encoder: expects four gate states");
  const std::size_t seq = x.rows();
  AttentionTrace local_trace{"local", {}, {}, {}, {}, {}, {}, {}, {}, {}};
  AttentionTrace global_trace{"global", {}, {}, {}, {}, {}, {}, {}, {}, {}};
  Var h = local_.forward(tape, params, gates.subspan(0, 2), x, local_mask(seq, length), length,
                         cfg_.chunk_size, probes, traces ? &local_trace : nullptr);
  Var y = global_.forward(tape, params, gates.subspan(2, 2), h, attention_mask(seq, length, 0), length, 0,
                          probes, traces ? &global_trace : nullptr);
  if (traces) {
    traces->push_back(std::move(local_trace));
    traces->push_back(std::move(global_trace));
  }
  return y;
}

// ---- NaiveAttentionBlock ---------------------------------------------------

NaiveAttentionBlock::NaiveAttentionBlock(std::string prefix, RhemaConfig cfg)
    : prefix_(std::move(prefix)),
      cfg_(cfg),
      rb_attn_(prefix_ + ".rb_attn", cfg.d_model, cfg.residual),
      rb_ff_(prefix_ + ".rb_ff", cfg.d_model, cfg.residual) {}

void NaiveAttentionBlock::init(ParamStore& params, Rng& rng) const {
  const std::size_t d = cfg_.d_model;
  const std::string& p = prefix_;
  params.add(p + ".norm_attn.gain", Tensor({1, d}, 1.0));
  params.add(p + ".norm_attn.bias", Tensor({1, d}));
  params.add(p + ".norm_ff.gain", Tensor({1, d}, 1.0));
  params.add(p + ".norm_ff.bias", Tensor({1, d}));
  for (const char* w : {".w_q", ".w_k", ".w_v", ".w_o"}) params.add(p + w, glorot(d, d, rng));
  params.add(p + ".ff.w1", glorot(d, 2 * d, rng));
  params.add(p + ".ff.b1", Tensor({1, 2 * d}));
  params.add(p + ".ff.w2", glorot(2 * d, d, rng));
  params.add(p + ".ff.b2", Tensor({1, d}));
  rb_attn_.init(params);
  rb_ff_.init(params);
}

Var NaiveAttentionBlock::forward(Tape& tape, const ParamStore& params, std::span<const rb::GateState> gates,
                                 Var x, std::size_t length, std::vector<rb::GateProbe>* probes,
                                 std::vector<AttentionTrace>* traces) const {
  require(gates.size() >= 2, ErrorKind::kContract, "naive block: expects two gate states");
  const std::string& p = prefix_;
  const std::size_t seq = x.rows();
  const Mask mask = attention_mask(seq, length, 0);
  AttentionTrace trace{"naive", {}, {}, {}, {}, {}, {}, {}, {}, {}};
  auto norm = [&](const std::string& which, Var in) {
    return layer_norm(in, params.bind(tape, p + "." + which + ".gain"), params.bind(tape, p + "." + which + ".bias"));
  };
  auto attn_branch = [&](Var in) {
    Var n = norm("norm_attn", in);
    Var q = matmul(n, params.bind(tape, p + ".w_q"));
    Var k = matmul(n, params.bind(tape, p + ".w_k"));
    Var v = matmul(n, params.bind(tape, p + ".w_v"));
    Var scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(cfg_.d_model)));
    Var w = softmax_lastdim(scores, &mask);
    trace.q = q.value();
    trace.k = k.value();
    trace.v = v.value();
    trace.scores = scores.value();
    trace.weights = w.value();
    trace.mask = mask;
    return matmul(matmul(w, v), params.bind(tape, p + ".w_o"));
  };
  auto ff_branch = [&](Var in) {
    Var n = norm("norm_ff", in);
    Var h = silu_paper(add_row(matmul(n, params.bind(tape, p + ".ff.w1")), params.bind(tape, p + ".ff.b1")));
    return add_row(matmul(h, params.bind(tape, p + ".ff.w2")), params.bind(tape, p + ".ff.b2"));
  };
  rb::GateProbe pa, pf;
  Var h = rb_attn_.apply(tape, params, gates[0], x, attn_branch, &pa, length);
  Var y = rb_ff_.apply(tape, params, gates[1], h, ff_branch, &pf, length);
  if (probes) {
    probes->push_back(pa);
    probes->push_back(pf);
  }
  if (traces) traces->push_back(std::move(trace));
  return y;
}

}  // namespace hreb::rhema
