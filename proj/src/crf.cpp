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

#include "hreb/crf.hpp"

#include <atomic>
#include <cmath>
#include <limits>

#include "hreb/error.hpp"

namespace hreb::crf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
std::atomic<std::size_t> g_clamps{0};

double lse2(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

void check_inputs(const Tensor& em, const Tensor& trans, const Transitions& open) {
  require(em.rows() >= 1, ErrorKind::kContract, "crf: empty sentence");
  require(em.cols() == open.classes(), ErrorKind::kDimension,
          "crf: emissions have " + std::to_string(em.cols()) + " classes, transitions " +
              std::to_string(open.classes()));
  require(trans.rows() == open.states() && trans.cols() == open.states(), ErrorKind::kDimension,
          "crf: transition tensor must be " + std::to_string(open.states()) + "x" + std::to_string(open.states()));
}

void check_tags(std::span<const int> tags, std::size_t n, std::size_t c) {
  require(tags.size() == n, ErrorKind::kContract, "crf: tag count differs from sentence length");
  for (int y : tags)
    require(y >= 0 && static_cast<std::size_t>(y) < c, ErrorKind::kContract,
            "crf: tag " + std::to_string(y) + " out of range");
}

// alpha[t][c]: log-sum of path scores ending in c at t (emission included).
std::vector<double> forward_table(const Tensor& em, const Tensor& trans, const Transitions& open) {
  const std::size_t n = em.rows(), c = em.cols(), s = start_state(c);
  std::vector<double> alpha(n * c, kNegInf);
  for (std::size_t j = 0; j < c; ++j) alpha[j] = transition(trans, open, s, j) + em.at(0, j);
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t j = 0; j < c; ++j) {
      double acc = kNegInf;
      for (std::size_t i = 0; i < c; ++i) {
        if (!open.allowed(i, j)) continue;
        acc = lse2(acc, alpha[(t - 1) * c + i] + trans.at(i, j));
      }
      alpha[t * c + j] = acc + em.at(t, j);
    }
  }
  return alpha;
}

double finish(const std::vector<double>& alpha, const Tensor& trans, const Transitions& open, std::size_t n) {
  const std::size_t c = open.classes(), e = stop_state(c);
  double z = kNegInf;
  for (std::size_t j = 0; j < c; ++j) z = lse2(z, alpha[(n - 1) * c + j] + transition(trans, open, j, e));
  return z;
}

}  // namespace

Transitions::Transitions(std::size_t n_classes) : n_(n_classes), open_(n_classes + 2, n_classes + 2, true) {
  const std::size_t s = start_state(n_), e = stop_state(n_);
  for (std::size_t k = 0; k < n_ + 2; ++k) {
    open_.set(k, s, false);
    open_.set(e, k, false);
  }
  open_.set(s, e, false);
}

Transitions Transitions::strict_bio(std::span<const std::string> tags) {
  Transitions t(tags.size());
  auto type_of = [](const std::string& tag) { return tag.size() > 2 ? tag.substr(2) : std::string(); };
  for (std::size_t j = 0; j < tags.size(); ++j) {
    if (tags[j].rfind("I-", 0) != 0) continue;
    const std::string ty = type_of(tags[j]);
    t.close(start_state(tags.size()), j);
    for (std::size_t i = 0; i < tags.size(); ++i) {
      const bool same_entity = (tags[i].rfind("B-", 0) == 0 || tags[i].rfind("I-", 0) == 0) && type_of(tags[i]) == ty;
      if (!same_entity) t.close(i, j);
    }
  }
  return t;
}

double transition(const Tensor& trans, const Transitions& open, std::size_t from, std::size_t to) {
  return open.allowed(from, to) ? trans.at(from, to) : kNegInf;
}

Tensor init_transitions(const Transitions& open) { return Tensor({open.states(), open.states()}); }

double sequence_score(const Tensor& em, std::span<const int> tags, const Tensor& trans, const Transitions& open) {
  check_inputs(em, trans, open);
  const std::size_t n = em.rows(), c = em.cols();
  check_tags(tags, n, c);
  double s = transition(trans, open, start_state(c), tags[0]);
  for (std::size_t t = 0; t < n; ++t) {
    s += em.at(t, tags[t]);
    if (t > 0) s += transition(trans, open, tags[t - 1], tags[t]);
  }
  return s + transition(trans, open, tags[n - 1], stop_state(c));
}

double log_partition(const Tensor& em, const Tensor& trans, const Transitions& open) {
  check_inputs(em, trans, open);
  return finish(forward_table(em, trans, open), trans, open, em.rows());
}

Marginals marginals(const Tensor& em, const Tensor& trans, const Transitions& open) {
  check_inputs(em, trans, open);
  const std::size_t n = em.rows(), c = em.cols(), s = start_state(c), e = stop_state(c);
  const std::vector<double> alpha = forward_table(em, trans, open);
  const double log_z = finish(alpha, trans, open, n);
  if (log_z == kNegInf) fail(ErrorKind::kDegenerate, "crf: no admissible tag path");

  std::vector<double> beta(n * c, kNegInf);
  for (std::size_t j = 0; j < c; ++j) beta[(n - 1) * c + j] = transition(trans, open, j, e);
  for (std::size_t t = n - 1; t-- > 0;) {
    for (std::size_t i = 0; i < c; ++i) {
      double acc = kNegInf;
      for (std::size_t j = 0; j < c; ++j) {
        if (!open.allowed(i, j)) continue;
        acc = lse2(acc, trans.at(i, j) + em.at(t + 1, j) + beta[(t + 1) * c + j]);
      }
      beta[t * c + i] = acc;
    }
  }

  Marginals m;
  m.log_z = log_z;
  m.unary = Tensor({n, c});
  m.pairwise = Tensor({c + 2, c + 2});
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t j = 0; j < c; ++j) m.unary.at(t, j) = std::exp(alpha[t * c + j] + beta[t * c + j] - log_z);
  for (std::size_t j = 0; j < c; ++j) {
    m.pairwise.at(s, j) = m.unary.at(0, j);
    m.pairwise.at(j, e) = m.unary.at(n - 1, j);
  }
  for (std::size_t t = 0; t + 1 < n; ++t)
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        if (!open.allowed(i, j)) continue;
        m.pairwise.at(i, j) +=
            std::exp(alpha[t * c + i] + trans.at(i, j) + em.at(t + 1, j) + beta[(t + 1) * c + j] - log_z);
      }
  return m;
}

Decoded viterbi(const Tensor& em, const Tensor& trans, const Transitions& open) {
  check_inputs(em, trans, open);
  const std::size_t n = em.rows(), c = em.cols(), s = start_state(c), e = stop_state(c);
  std::vector<double> delta(n * c, kNegInf);
  std::vector<int> back(n * c, 0);
  for (std::size_t j = 0; j < c; ++j) delta[j] = transition(trans, open, s, j) + em.at(0, j);
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t j = 0; j < c; ++j) {
      double best = kNegInf;
      int arg = 0;
      for (std::size_t i = 0; i < c; ++i) {
        const double v = delta[(t - 1) * c + i] + transition(trans, open, i, j);
        if (v > best) {
          best = v;
          arg = static_cast<int>(i);
        }
      }
      delta[t * c + j] = best + em.at(t, j);
      back[t * c + j] = arg;
    }
  }
  double best = kNegInf;
  int last = 0;
  for (std::size_t j = 0; j < c; ++j) {
    const double v = delta[(n - 1) * c + j] + transition(trans, open, j, e);
    if (v > best) {
      best = v;
      last = static_cast<int>(j);
    }
  }
  if (best == kNegInf) fail(ErrorKind::kDegenerate, "viterbi: no admissible tag path");
  Decoded d;
  d.score = best;
  d.path.assign(n, 0);
  d.path[n - 1] = last;
  for (std::size_t t = n - 1; t > 0; --t) d.path[t - 1] = back[t * c + d.path[t]];
  return d;
}

Var crf_nll(Var emissions, Var trans, std::span<const int> tags, const Transitions& open) {
  const Tensor& em = emissions.value();
  const Tensor& tr = trans.value();
  check_inputs(em, tr, open);
  check_tags(tags, em.rows(), em.cols());
  const double gold = sequence_score(em, tags, tr, open);
  if (gold == kNegInf) fail(ErrorKind::kContract, "crf_nll: gold path uses a closed transition");
  Marginals m = marginals(em, tr, open);
  std::vector<int> y(tags.begin(), tags.end());
  Tensor loss = Tensor::scalar(m.log_z - gold);
  return emissions.tape->record(
      "crf_nll", std::move(loss), {emissions, trans},
      [emissions, trans, y, m = std::move(m), open](Tape& t, const Tensor& g) {
        const double gs = g.item();
        const std::size_t n = m.unary.rows(), c = m.unary.cols();
        if (t.requires_grad(emissions.id)) {
          Tensor ge = m.unary;
          for (std::size_t p = 0; p < n; ++p) ge.at(p, y[p]) -= 1.0;
          for (double& v : ge.data()) v *= gs;
          t.accumulate(emissions.id, ge);
        }
        if (t.requires_grad(trans.id)) {
          Tensor gt = m.pairwise;
          gt.at(start_state(c), y[0]) -= 1.0;
          gt.at(y[n - 1], stop_state(c)) -= 1.0;
          for (std::size_t p = 1; p < n; ++p) gt.at(y[p - 1], y[p]) -= 1.0;
          for (std::size_t i = 0; i < c + 2; ++i)
            for (std::size_t j = 0; j < c + 2; ++j) gt.at(i, j) = open.allowed(i, j) ? gt.at(i, j) * gs : 0.0;
          t.accumulate(trans.id, gt);
        }
      });
}

double token_nll(const Tensor& probs, const Tensor& onehot) {
  require(probs.same_shape(onehot), ErrorKind::kDimension, "token_nll: probs and one-hot shapes differ");
  double loss = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (onehot[k] == 0.0) continue;
    double p = probs[k];
    if (p < 1e-12) {
      p = 1e-12;
      g_clamps.fetch_add(1, std::memory_order_relaxed);
    }
    loss -= onehot[k] * std::log(p);
  }
  return loss;
}

Var token_nll_logits(Var logits, std::span<const int> tags) {
  const Tensor& z = logits.value();
  const std::size_t n = z.rows(), c = z.cols();
  check_tags(tags, n, c);
  static const double kFloor = std::log(1e-12);
  Tensor probs({n, c});
  std::vector<bool> clamped(n, false);
  double loss = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double lse = scalar::logsumexp(z.data().subspan(t * c, c));
    for (std::size_t j = 0; j < c; ++j) probs.at(t, j) = std::exp(z.at(t, j) - lse);
    double lp = z.at(t, tags[t]) - lse;
    if (lp < kFloor) {
      lp = kFloor;
      clamped[t] = true;
      g_clamps.fetch_add(1, std::memory_order_relaxed);
    }
    loss -= lp;
  }
  std::vector<int> y(tags.begin(), tags.end());
  return logits.tape->record("token_nll", Tensor::scalar(loss), {logits},
                             [logits, probs, y, clamped](Tape& t, const Tensor& g) {
                               const double gs = g.item();
                               Tensor gz(probs.shape());
                               const std::size_t c = probs.cols();
                               for (std::size_t p = 0; p < y.size(); ++p) {
                                 if (clamped[p]) continue;
                                 for (std::size_t j = 0; j < c; ++j)
                                   gz.at(p, j) = gs * (probs.at(p, j) - (static_cast<int>(j) == y[p] ? 1.0 : 0.0));
                               }
                               t.accumulate(logits.id, gz);
                             });
}

std::size_t token_nll_clamp_count() { return g_clamps.load(); }

double hmm_joint_log_prob(const Tensor& init, const Tensor& trans, const Tensor& emit,
                          std::span<const int> observations, std::span<const int> states) {
  require(!states.empty() && observations.size() == states.size(), ErrorKind::kContract,
          "hmm: observations and states must be non-empty and aligned");
  const std::size_t k = init.size();
  require(trans.rows() == k && trans.cols() == k && emit.rows() == k, ErrorKind::kDimension,
          "hmm: init/trans/emit state counts differ");
  for (std::size_t t = 0; t < states.size(); ++t) {
    require(states[t] >= 0 && static_cast<std::size_t>(states[t]) < k, ErrorKind::kContract, "hmm: state out of range");
    require(observations[t] >= 0 && static_cast<std::size_t>(observations[t]) < emit.cols(), ErrorKind::kContract,
            "hmm: observation out of range");
  }
  double lp = std::log(init[states[0]]);
  for (std::size_t t = 0; t < states.size(); ++t) {
    if (t > 0) lp += std::log(trans.at(states[t - 1], states[t]));
    lp += std::log(emit.at(states[t], observations[t]));
  }
  return lp;
}

}  // namespace hreb::crf
