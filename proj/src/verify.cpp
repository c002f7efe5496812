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

#include "hreb/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>

#include "hreb/encoders.hpp"
#include "hreb/error.hpp"
#include "hreb/gradcheck.hpp"
#include "hreb/model.hpp"
#include "hreb/moving_average.hpp"
#include "hreb/reduced_bias.hpp"
#include "hreb/rhema.hpp"

namespace hreb::verify {

namespace {

using Clock = std::chrono::steady_clock;

std::string dump(const Tensor& t) {
  std::ostringstream os;
  os << std::setprecision(17) << shape_str(t.shape()) << " [";
  for (std::size_t i = 0; i < t.size(); ++i) os << (i ? " " : "") << t[i];
  os << "]";
  return os.str();
}

Tensor rand(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) { return uniform_tensor(std::move(s), lo, hi, rng); }

// Reduces a matrix-valued op to a scalar with fixed random weights so every
// output entry contributes a distinct gradient.
Var weighted_sum(Var y, std::uint64_t seed) {
  Rng rng(seed);
  Tensor w = uniform_tensor(y.shape(), -1.0, 1.0, rng);
  return sum(mul(y, y.tape->constant(std::move(w))));
}

Var ws(Var y) { return weighted_sum(y, 99); }

struct GradCase {
  std::string name;
  TapeFn fn;
  Tensor x;
};

void add_result(SuiteReport& rep, const std::string& suite, const std::string& name, double err, double tol,
                const std::function<std::string()>& replay) {
  CaseResult c;
  c.suite = suite;
  c.name = name;
  c.error = err;
  c.tolerance = tol;
  c.passed = std::isfinite(err) && err <= tol;
  if (!c.passed) c.replay = replay();
  rep.cases.push_back(std::move(c));
}

std::vector<GradCase> op_cases() {
  Rng rng(7);
  std::vector<GradCase> cases;
  const Tensor a = rand({3, 4}, rng), b = rand({4, 2}, rng), c = rand({3, 4}, rng), row = rand({1, 4}, rng);
  auto add = [&](std::string name, TapeFn fn, Tensor x) { cases.push_back({std::move(name), std::move(fn), std::move(x)}); };

  add("matmul.lhs", [b](Tape& t, Var x) { return ws(matmul(x, t.constant(b))); }, a);
  add("matmul.rhs", [a](Tape& t, Var x) { return ws(matmul(t.constant(a), x)); }, b);
  add("transpose", [](Tape&, Var x) { return ws(transpose(x)); }, a);
  add("add", [c](Tape& t, Var x) { return ws(hreb::add(x, t.constant(c))); }, a);
  add("sub", [c](Tape& t, Var x) { return ws(sub(t.constant(c), x)); }, a);
  add("mul", [c](Tape& t, Var x) { return ws(mul(x, t.constant(c))); }, a);
  add("add_row", [a](Tape& t, Var x) { return ws(add_row(t.constant(a), x)); }, row);
  add("mul_row.row", [a](Tape& t, Var x) { return ws(mul_row(t.constant(a), x)); }, row);
  add("mul_row.mat", [row](Tape& t, Var x) { return ws(mul_row(x, t.constant(row))); }, a);
  add("scale", [](Tape&, Var x) { return ws(scale(x, -2.5)); }, a);
  add("one_minus", [](Tape&, Var x) { return ws(one_minus(x)); }, a);
  add("sigmoid", [](Tape&, Var x) { return ws(sigmoid(x)); }, a);
  add("tanh", [](Tape&, Var x) { return ws(hreb::tanh(x)); }, a);
  add("exp", [](Tape&, Var x) { return ws(hreb::exp(x)); }, a);
  add("log", [](Tape&, Var x) { return ws(hreb::log(x)); }, rand({3, 4}, rng, 0.5, 2.0));
  add("softplus", [](Tape&, Var x) { return ws(softplus(x)); }, a);
  add("erf", [](Tape&, Var x) { return ws(hreb::erf(x)); }, a);
  add("silu_paper", [](Tape&, Var x) { return ws(silu_paper(x)); }, rand({3, 4}, rng, -3.0, 3.0));
  add("silu_standard", [](Tape&, Var x) { return ws(silu_standard(x)); }, rand({3, 4}, rng, -3.0, 3.0));
  add("mean", [](Tape&, Var x) { return mean(hreb::exp(x)); }, a);
  add("logsumexp.rows", [](Tape&, Var x) { return ws(logsumexp(x, 1)); }, a);
  add("logsumexp.cols", [](Tape&, Var x) { return ws(logsumexp(x, 0)); }, a);
  {
    Mask m(3, 4, true);
    m.set(0, 3, false);
    m.set(2, 0, false);
    add("softmax.masked", [m](Tape&, Var x) { return ws(softmax_lastdim(x, &m)); }, a);
  }
  add("concat_cols", [c](Tape& t, Var x) { return ws(concat_cols(x, t.constant(c))); }, a);
  add("slice_rows", [](Tape&, Var x) { return ws(slice_rows(x, 1, 3)); }, a);
  add("repeat_cols", [](Tape&, Var x) { return ws(repeat_cols(x, 3)); }, row);
  add("gather_rows",
      [](Tape&, Var x) {
        const std::vector<int> ids = {2, 0, 2, 1};
        return ws(gather_rows(x, ids));
      },
      a);
  {
    const Tensor gain = rand({1, 4}, rng, 0.5, 1.5), bias = rand({1, 4}, rng);
    add("layer_norm.x", [gain, bias](Tape& t, Var x) { return ws(layer_norm(x, t.constant(gain), t.constant(bias))); }, a);
    add("layer_norm.gain", [a, bias](Tape& t, Var x) { return ws(layer_norm(t.constant(a), x, t.constant(bias))); }, gain);
    add("batch_norm.x",
        [gain, bias](Tape& t, Var x) { return ws(masked_batch_norm(x, t.constant(gain), t.constant(bias), 2)); }, a);
    add("batch_norm.gain",
        [a, bias](Tape& t, Var x) { return ws(masked_batch_norm(t.constant(a), x, t.constant(bias), 3)); }, gain);
  }
  {
    const Tensor alpha = rand({1, 4}, rng, 0.2, 0.9), h0 = rand({1, 4}, rng), xs = rand({6, 4}, rng);
    add("ema_scan.x", [alpha, h0](Tape& t, Var x) { return ws(ma::ema_scan(x, t.constant(alpha), t.constant(h0), 4)); }, xs);
    add("ema_scan.alpha", [xs, h0](Tape& t, Var x) { return ws(ma::ema_scan(t.constant(xs), x, t.constant(h0), 0)); }, alpha);
    add("ema_scan.h0", [xs, alpha](Tape& t, Var x) { return ws(ma::ema_scan(t.constant(xs), t.constant(alpha), x, 3)); }, h0);
  }
  {
    const Tensor s = rand({4, 4}, rng, -2.0, 2.0), ctx = rand({4, 4}, rng);
    const Tensor mu = Tensor({1, 1}, 0.7), sigma = Tensor({1, 1}, 0.4);
    Mask m = rhema::attention_mask(4, 3, 2);
    add("laplace_attn.scores",
        [mu, sigma, m](Tape& t, Var x) { return ws(rhema::laplace_attn(x, t.constant(mu), t.constant(sigma), &m)); }, s);
    add("laplace_attn.sigma",
        [s, mu](Tape& t, Var x) { return ws(rhema::laplace_attn(t.constant(s), t.constant(mu), x)); }, sigma);
    add("reduced_laplace.shared",
        [mu, sigma, m](Tape& t, Var x) {
          return ws(rhema::reduced_laplace_attn(x, x, t.constant(mu), t.constant(sigma), &m));
        },
        s);
    add("reduced_laplace.context",
        [s, mu, sigma](Tape& t, Var x) {
          return ws(rhema::reduced_laplace_attn(t.constant(s), x, t.constant(mu), t.constant(sigma)));
        },
        ctx);
    add("reduced_laplace.mu",
        [s, ctx, sigma](Tape& t, Var x) {
          return ws(rhema::reduced_laplace_attn(t.constant(s), t.constant(ctx), x, t.constant(sigma)));
        },
        mu);
    add("relative_bias", [](Tape&, Var x) { return ws(rhema::relative_bias(x, 5, 2)); }, rand({1, 5}, rng));
  }
  {
    const std::size_t d = 3, h = 2;
    const Tensor xs = rand({5, d}, rng), wi = rand({d, 4 * h}, rng), wh = rand({h, 4 * h}, rng), bb = rand({1, 4 * h}, rng);
    for (bool rev : {false, true}) {
      const std::string dir = rev ? ".bwd" : ".fwd";
      add("lstm" + dir + ".x",
          [=](Tape& t, Var x) { return ws(enc::lstm_direction(x, t.constant(wi), t.constant(wh), t.constant(bb), 4, rev)); },
          xs);
      add("lstm" + dir + ".w_ih",
          [=](Tape& t, Var x) { return ws(enc::lstm_direction(t.constant(xs), x, t.constant(wh), t.constant(bb), 5, rev)); },
          wi);
      add("lstm" + dir + ".w_hh",
          [=](Tape& t, Var x) { return ws(enc::lstm_direction(t.constant(xs), t.constant(wi), x, t.constant(bb), 5, rev)); },
          wh);
    }
  }
  {
    const crf::Transitions open(3);
    Tensor trans = rand({5, 5}, rng);
    const Tensor em = rand({4, 3}, rng, -2.0, 2.0);
    const std::vector<int> gold = {0, 2, 2, 1};
    add("crf_nll.emissions", [trans, open, gold](Tape& t, Var x) { return crf::crf_nll(x, t.constant(trans), gold, open); },
        em);
    add("crf_nll.transitions", [em, open, gold](Tape& t, Var x) { return crf::crf_nll(t.constant(em), x, gold, open); },
        trans);
    add("token_nll", [gold](Tape&, Var x) { return crf::token_nll_logits(x, gold); }, em);
  }
  return cases;
}

struct ModelCase {
  std::string name;
  std::string attn_fn, rb_mode, norm = "layer", silu = "paper", loss = "crf", attention = "hema";
};

// Tiny tagger with every parameter nudged off its structured initialization
// so no gradient is trivially zero.
Tagger tiny_tagger(const ModelCase& mc) {
  RunConfig cfg;
  cfg.d_model = 8;
  cfg.v_dim = 16;
  cfg.n_ema_head = 2;
  cfg.chunk_size = 2;
  cfg.rel_bias_window = 2;
  cfg.h_lstm = 5;
  cfg.attn_fn = mc.attn_fn;
  cfg.reduced_bias_mode = mc.rb_mode;
  cfg.static_alpha = 0.7;
  cfg.static_beta = 1.3;
  cfg.norm = mc.norm;
  cfg.silu_variant = mc.silu;
  cfg.loss = mc.loss;
  cfg.attention = mc.attention;
  cfg.seed = 11;
  data::Vocab vocab;
  for (const char* tok : {"a", "b", "c", "d", "e"}) vocab.add_token(tok);
  for (const char* tag : {"O", "B-X", "I-X"}) vocab.add_tag(tag);
  Tagger m(cfg, vocab);
  Rng rng(5);
  for (auto& [name, p] : m.params()) {
    if (name == "embed.table") continue;
    for (double& v : p.data()) v += rng.uniform(-0.1, 0.1);
  }
  for (auto& g : m.gates()) {
    g.cache_f = rand({1, 8}, rng);
    g.cache_x = rand({1, 8}, rng);
  }
  return m;
}

}  // namespace

bool SuiteReport::passed() const {
  for (const auto& c : cases)
    if (!c.passed) return false;
  return !cases.empty();
}

SuiteReport run_grad_suite() {
  SuiteReport rep;
  const auto t0 = Clock::now();
  for (const GradCase& gc : op_cases()) {
    double err;
    try {
      err = finite_diff_check(gc.fn, gc.x);
    } catch (const Error& e) {
      err = std::numeric_limits<double>::infinity();
    }
    add_result(rep, "grad", "op." + gc.name, err, kGradTolerance, [&] { return "x=" + dump(gc.x); });
  }

  std::vector<ModelCase> models;
  for (const char* fn : {"softmax", "laplace", "reduced_laplace"})
    for (const char* mode : {"classic", "static", "dynamic"})
      models.push_back({std::string("model.") + fn + "." + mode, fn, mode});
  models.push_back({"model.batch_norm.standard_silu", "reduced_laplace", "dynamic", "batch", "standard"});
  models.push_back({"model.token_loss", "reduced_laplace", "dynamic", "layer", "paper", "token"});
  models.push_back({"model.naive_attention", "softmax", "dynamic", "layer", "paper", "crf", "naive"});

  const data::Encoded sentence{{2, 3, 4, 2, 5}, {1, 2, 0, 1, 0}};
  for (const ModelCase& mc : models) {
    Tagger m = tiny_tagger(mc);
    GradCheckResult r;
    double err;
    try {
      r = check_param_grads([&](Tape& t) { return m.sentence_loss(t, sentence); }, m.params());
      err = r.max_error;
    } catch (const Error& e) {
      err = std::numeric_limits<double>::infinity();
      r.worst = e.what();
    }
    add_result(rep, "grad", mc.name, err, kGradTolerance, [&] {
      return "worst=" + r.worst + " attn_fn=" + mc.attn_fn + " reduced_bias=" + mc.rb_mode + " seed=11 tokens=[2 3 4 2 5]";
    });
  }

  {
    // Padded batch: two sentences of different length through the batch path.
    Tagger m = tiny_tagger({"model.padded_batch", "reduced_laplace", "dynamic"});
    const std::vector<data::Encoded> sents = {{{2, 3, 4}, {1, 2, 0}}, {{5, 4, 3, 2, 6}, {0, 1, 2, 2, 0}}};
    const auto batches = data::make_batches(sents, 2, 0, false);
    GradCheckResult r;
    double err;
    try {
      r = check_param_grads([&](Tape& t) { return m.batch_loss(t, batches[0]); }, m.params());
      err = r.max_error;
    } catch (const Error& e) {
      err = std::numeric_limits<double>::infinity();
      r.worst = e.what();
    }
    add_result(rep, "grad", "model.padded_batch", err, kGradTolerance, [&] { return "worst=" + r.worst; });
  }
  rep.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return rep;
}

double brute_log_partition(const Tensor& em, const Tensor& trans, const crf::Transitions& open) {
  const std::size_t n = em.rows(), c = em.cols();
  std::vector<int> path(n, 0);
  std::vector<double> scores;
  while (true) {
    const double s = crf::sequence_score(em, path, trans, open);
    if (s != -std::numeric_limits<double>::infinity()) scores.push_back(s);
    std::size_t k = 0;
    while (k < n && ++path[k] == static_cast<int>(c)) path[k++] = 0;
    if (k == n) break;
  }
  return scalar::logsumexp(scores);
}

crf::Decoded brute_viterbi(const Tensor& em, const Tensor& trans, const crf::Transitions& open) {
  const std::size_t n = em.rows(), c = em.cols();
  // Odometer over paths with the last position as the most significant
  // digit, so the first maximum met is the reverse-lexicographic smallest.
  std::vector<int> path(n, 0);
  crf::Decoded best;
  best.score = -std::numeric_limits<double>::infinity();
  while (true) {
    const double s = crf::sequence_score(em, path, trans, open);
    if (s > best.score) {
      best.score = s;
      best.path = path;
    }
    std::size_t k = 0;
    while (k < n && ++path[k] == static_cast<int>(c)) path[k++] = 0;
    if (k == n) break;
  }
  return best;
}

SuiteReport run_crf_suite(std::size_t instances, std::uint64_t seed) {
  SuiteReport rep;
  const auto t0 = Clock::now();
  Rng rng(seed);
  for (std::size_t i = 0; i < instances; ++i) {
    const std::size_t n = 1 + rng.index(6), c = 1 + rng.index(4);
    const double spread = i % 10 == 9 ? 20.0 : 3.0;
    const Tensor em = rand({n, c}, rng, -spread, spread);
    Tensor trans = rand({c + 2, c + 2}, rng, -spread, spread);
    crf::Transitions open(c);
    const std::string tag = "crf." + std::to_string(i) + ".n" + std::to_string(n) + ".c" + std::to_string(c);
    auto replay = [&] { return "emissions=" + dump(em) + " transitions=" + dump(trans); };

    const double z = crf::log_partition(em, trans, open);
    const double zb = brute_log_partition(em, trans, open);
    add_result(rep, "crf", tag + ".log_partition", std::abs(z - zb), kPartitionTolerance, replay);

    const crf::Decoded v = crf::viterbi(em, trans, open);
    const crf::Decoded vb = brute_viterbi(em, trans, open);
    const double verr = v.path == vb.path ? std::abs(v.score - vb.score) : std::numeric_limits<double>::infinity();
    add_result(rep, "crf", tag + ".viterbi", verr, kViterbiScoreTolerance, replay);
  }
  {
    // Ties: all-zero scores make every path optimal; the all-zero path wins.
    const Tensor em({4, 3});
    const Tensor trans({5, 5});
    const crf::Transitions open(3);
    const crf::Decoded v = crf::viterbi(em, trans, open);
    const crf::Decoded vb = brute_viterbi(em, trans, open);
    add_result(rep, "crf", "crf.tie_break", v.path == vb.path && v.path == std::vector<int>(4, 0) ? 0.0 : 1.0, 0.0,
               [] { return std::string("all-zero scores, n=4, C=3"); });
  }
  {
    // Emission gradient rows sum to zero; a per-position shift leaves the NLL unchanged.
    Rng r2(seed + 1);
    double row_err = 0.0, shift_err = 0.0;
    for (int k = 0; k < 20; ++k) {
      const std::size_t n = 1 + r2.index(6), c = 1 + r2.index(4);
      const Tensor em = rand({n, c}, r2, -3.0, 3.0), trans = rand({c + 2, c + 2}, r2);
      std::vector<int> gold(n);
      for (auto& y : gold) y = static_cast<int>(r2.index(c));
      const crf::Transitions open(c);
      Tape t;
      Var e = t.input(em);
      Var loss = crf::crf_nll(e, t.constant(trans), gold, open);
      t.backward(loss);
      for (std::size_t p = 0; p < n; ++p) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += e.grad().at(p, j);
        row_err = std::max(row_err, std::abs(s));
      }
      Tensor shifted = em;
      for (std::size_t p = 0; p < n; ++p) {
        const double shift = r2.uniform(-5.0, 5.0);
        for (std::size_t j = 0; j < c; ++j) shifted.at(p, j) += shift;
      }
      Tape t2(false);
      const double l2 = crf::crf_nll(t2.constant(shifted), t2.constant(trans), gold, open).value().item();
      shift_err = std::max(shift_err, std::abs(l2 - loss.value().item()));
    }
    add_result(rep, "crf", "crf.gradient_rows_sum_to_zero", row_err, 1e-9, [] { return std::string("seeded"); });
    add_result(rep, "crf", "crf.nll_shift_invariance", shift_err, 1e-9, [] { return std::string("seeded"); });
  }
  rep.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return rep;
}

SuiteReport run_ema_suite() {
  SuiteReport rep;
  const auto t0 = Clock::now();
  Rng rng(3);
  for (double alpha : {0.05, 0.3, 0.77, 1.0}) {
    std::vector<double> x(64);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const double h0 = rng.uniform(-1.0, 1.0);
    const auto h = ma::ema_scan(x, alpha, h0);
    double err = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
      // h_t = Σ_{i≤t} α(1−α)^{t−i} x_i + (1−α)^{t+1} h0
      double closed = std::pow(1.0 - alpha, static_cast<double>(t + 1)) * h0;
      for (std::size_t i = 0; i <= t; ++i) closed += alpha * std::pow(1.0 - alpha, static_cast<double>(t - i)) * x[i];
      err = std::max(err, std::abs(closed - h[t]));
    }
    std::ostringstream name;
    name << "ema.closed_form.alpha=" << alpha;
    add_result(rep, "ema", name.str(), err, kEmaTolerance, [&] {
      std::ostringstream os;
      os << std::setprecision(17) << "alpha=" << alpha << " h0=" << h0;
      return os.str();
    });
  }
  {
    std::vector<double> x(17);
    for (double& v : x) v = rng.uniform(-3.0, 3.0);
    const auto h = ma::ema_scan(x, 1.0, 42.0);
    add_result(rep, "ema", "ema.alpha_one_identity", h == x ? 0.0 : 1.0, 0.0, [] { return std::string("exact"); });
  }
  {
    const std::size_t d = 4, seq = 9;
    ma::MultiHeadEma mh("ema", d, 1);
    ParamStore ps;
    mh.init(ps);
    const Tensor x = rand({seq, d}, rng);
    Tape t(false);
    const Tensor y = mh.forward(t, ps, t.constant(x)).value();
    const double alpha = mh.alphas(ps)[0];
    double err = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      std::vector<double> col(seq);
      for (std::size_t i = 0; i < seq; ++i) col[i] = x.at(i, j);
      const auto ref = ma::ema_scan(col, alpha, 0.0);
      for (std::size_t i = 0; i < seq; ++i) err = std::max(err, std::abs(ref[i] - y.at(i, j)));
    }
    add_result(rep, "ema", "ema.multihead_single_head_identity", err, kEmaTolerance, [&] { return "x=" + dump(x); });
  }
  {
    // Restart every k rows equals independent scans per chunk.
    const Tensor x = rand({7, 2}, rng), alpha = Tensor::row({0.4, 0.9}), h0 = Tensor::row({0.5, -0.5});
    const Tensor y = ma::ema_scan(x, alpha, h0, 3);
    double err = 0.0;
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t b = 0; b < 7; b += 3) {
        std::vector<double> col;
        for (std::size_t i = b; i < std::min<std::size_t>(7, b + 3); ++i) col.push_back(x.at(i, j));
        const auto ref = ma::ema_scan(col, alpha[j], h0[j]);
        for (std::size_t i = 0; i < col.size(); ++i) err = std::max(err, std::abs(ref[i] - y.at(b + i, j)));
      }
    add_result(rep, "ema", "ema.chunk_restart", err, kEmaTolerance, [&] { return "x=" + dump(x); });
  }
  rep.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return rep;
}

SuiteReport run_suite(const std::string& name) {
  if (name == "grad") return run_grad_suite();
  if (name == "crf") return run_crf_suite();
  if (name == "ema") return run_ema_suite();
  if (name != "all") fail(ErrorKind::kConfig, "unknown verify suite '" + name + "' (expected all|grad|crf|ema)");
  SuiteReport all;
  for (const SuiteReport& r : {run_grad_suite(), run_crf_suite(), run_ema_suite()}) {
    all.cases.insert(all.cases.end(), r.cases.begin(), r.cases.end());
    all.seconds += r.seconds;
  }
  return all;
}

std::string format_table(const SuiteReport& r) {
  std::ostringstream os;
  // Per-suite summary, then every failing case with its replay line.
  std::vector<std::string> suites;
  for (const auto& c : r.cases)
    if (std::find(suites.begin(), suites.end(), c.suite) == suites.end()) suites.push_back(c.suite);
  os << std::left << std::setw(8) << "suite" << std::right << std::setw(8) << "cases" << std::setw(8) << "failed"
     << std::setw(14) << "max error" << "  status\n";
  for (const auto& s : suites) {
    std::size_t n = 0, failed = 0;
    double worst = 0.0;
    for (const auto& c : r.cases) {
      if (c.suite != s) continue;
      ++n;
      failed += c.passed ? 0 : 1;
      worst = std::max(worst, c.error);
    }
    os << std::left << std::setw(8) << s << std::right << std::setw(8) << n << std::setw(8) << failed << std::setw(14)
       << std::scientific << std::setprecision(3) << worst << std::defaultfloat << "  " << (failed ? "FAIL" : "PASS")
       << '\n';
  }
  for (const auto& c : r.cases) {
    if (c.passed) continue;
    os << "FAIL " << c.name << " error=" << std::scientific << std::setprecision(3) << c.error
       << " tol=" << c.tolerance << std::defaultfloat << "\n  replay: " << c.replay << '\n';
  }
  os << std::fixed << std::setprecision(2) << "elapsed " << r.seconds << " s\n";
  return os.str();
}

}  // namespace hreb::verify
