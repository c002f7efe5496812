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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hreb/error.hpp"
#include "hreb/rhema.hpp"
#include "support.hpp"

namespace hreb {
namespace {

using rhema::AttnFn;
using rhema::RhemaBlock;
using rhema::RhemaConfig;

RhemaConfig small_config(AttnFn fn = AttnFn::kReducedLaplace, rb::ResidualMode mode = rb::ResidualMode::kDynamic) {
  RhemaConfig c;
  c.d_model = 4;
  c.z_dim = 4;
  c.v_dim = 6;
  c.n_ema_head = 2;
  c.chunk_size = 2;
  c.rel_bias_window = 2;
  c.attn_fn = fn;
  c.residual = mode;
  return c;
}

struct Fixture {
  RhemaConfig cfg;
  RhemaBlock block;
  ParamStore ps;
  std::vector<rb::GateState> gates;

  explicit Fixture(RhemaConfig c, unsigned seed = 3) : cfg(c), block("blk", c) {
    Rng rng(seed);
    block.init(ps, rng);
    for (int i = 0; i < 4; ++i) gates.emplace_back(c.residual, c.d_model);
  }
  void zero(const std::string& name) { ps.at(name).fill(0.0); }
};

// Standard normal CDF, written independently of erf.
double normal_cdf(double x) {
  // Composite Simpson over [−12, x] of the normal density.
  const double lo = -12.0;
  const int n = 20000;
  const double h = (x - lo) / n;
  auto pdf = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2 * M_PI); };
  double s = pdf(lo) + pdf(x);
  for (int i = 1; i < n; ++i) s += pdf(lo + i * h) * (i % 2 ? 4 : 2);
  return s * h / 3;
}

TEST(Config, Validation) {
  RhemaConfig c = small_config();
  EXPECT_NO_THROW(c.validate());
  c.z_dim = 5;
  EXPECT_THROW(c.validate(), Error);
  c = small_config();
  c.daleth = -1;
  EXPECT_THROW(c.validate(), Error);
  c = small_config();
  EXPECT_DOUBLE_EQ(c.scale(), 2.0);
  c.daleth = 3.5;
  EXPECT_DOUBLE_EQ(c.scale(), 3.5);
}

TEST(SharedRep, ZeroProjection) {
  for (auto silu : {rhema::SiluVariant::kPaper, rhema::SiluVariant::kStandard}) {
    RhemaConfig c = small_config();
    c.silu = silu;
    Fixture f(c);
    f.zero("blk.w_z");
    const Tensor x = test::randn(5, 4, 1);
    Tape t(false);
    const Tensor z = f.block.shared_rep(t, f.ps, t.input(x)).value();
    ASSERT_EQ(z.shape(), (Shape{5, 4}));
    const double offset = silu == rhema::SiluVariant::kPaper ? 0.5 : 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(z[i], x[i] + offset);
  }
}

TEST(QkTransform, AffineExamplesAndGradient) {
  Fixture f(small_config());
  const Tensor z = test::randn(5, 4, 2);
  f.ps.at("blk.kappa_q").fill(1.0);
  Tape t(false);
  auto [q, k] = f.block.qk_transform(t, f.ps, t.input(z));
  EXPECT_EQ(q.value().vec(), z.vec());
  f.ps.at("blk.kappa_q").fill(0.0);
  f.ps.at("blk.mu_q") = Tensor::row({1, 2, 3, 4});
  Tape t2(false);
  auto qk = f.block.qk_transform(t2, f.ps, t2.input(z));
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(qk.first.value().at(r, c), c + 1.0);
  f.ps.at("blk.kappa_q") = test::randn(1, 4, 3);
  EXPECT_LE(test::param_diff_error(
                [&](Tape& tp) {
                  auto [qq, kk] = f.block.qk_transform(tp, f.ps, tp.constant(z));
                  return test::weighted(mul(qq, kk));
                },
                f.ps, "blk.kappa_q"),
            1e-5);
}

TEST(ValueTransform, ZeroProjectionShapeAndGradient) {
  RhemaConfig c = small_config();
  c.v_dim = 32;
  Fixture f(c);
  const Tensor x = test::randn(5, 4, 4);
  f.zero("blk.w_v");
  Tape t(false);
  const Tensor v = f.block.value_transform(t, f.ps, t.input(x)).value();
  EXPECT_EQ(v.shape(), (Shape{5, 32}));
  for (double e : v.vec()) EXPECT_EQ(e, 0.5);
  f.ps.at("blk.w_v") = test::randn(4, 32, 5);
  EXPECT_LE(test::param_diff_error(
                [&](Tape& tp) { return test::weighted(f.block.value_transform(tp, f.ps, tp.constant(x))); }, f.ps,
                "blk.w_v"),
            1e-5);
}

TEST(Attention, SingleKeyReturnsValue) {
  Fixture f(small_config(AttnFn::kSoftmax));
  Tape t(false);
  const Tensor v = test::randn(1, 6, 5);
  const Tensor o = f.block
                       .attention(t, f.ps, t.input(test::randn(1, 4, 6)), t.input(test::randn(1, 4, 7)),
                                  t.input(v), Mask(1, 1))
                       .value();
  EXPECT_EQ(o.vec(), v.vec());
}

TEST(Attention, IdenticalKeysAverageValues) {
  Fixture f(small_config(AttnFn::kSoftmax));
  Tensor k({4, 4});
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) k.at(r, c) = 0.3 * c - 0.2;
  const Tensor v = test::randn(4, 6, 8);
  Tape t(false);
  const Tensor o =
      f.block.attention(t, f.ps, t.input(test::randn(4, 4, 9)), t.input(k), t.input(v), Mask(4, 4)).value();
  for (std::size_t c = 0; c < 6; ++c) {
    double mean = 0;
    for (std::size_t r = 0; r < 4; ++r) mean += v.at(r, c) / 4;
    for (std::size_t r = 0; r < 4; ++r) EXPECT_NEAR(o.at(r, c), mean, 1e-14);
  }
}

TEST(Attention, TwoByTwoHandCase) {
  RhemaConfig c = small_config(AttnFn::kSoftmax);
  c.d_model = c.z_dim = 2;
  c.n_ema_head = 1;
  c.daleth = 1.0;
  Fixture f(c);
  const Tensor id = Tensor::identity(2);
  const Tensor v = Tensor::matrix({{1.0, -2.0, 0.5, 0, 0, 3}, {4.0, 1.0, -1.0, 2, 0, 1}});
  Tape t(false);
  rhema::AttentionTrace tr;
  const Tensor o = f.block.attention(t, f.ps, t.input(id), t.input(id), t.input(v), Mask(2, 2), &tr).value();
  const double e = std::exp(1.0), a = e / (e + 1), b = 1 / (e + 1);
  EXPECT_NEAR(tr.weights.at(0, 0), a, 1e-15);
  EXPECT_NEAR(tr.weights.at(0, 1), b, 1e-15);
  EXPECT_NEAR(tr.weights.at(1, 0), b, 1e-15);
  EXPECT_NEAR(tr.weights.at(1, 1), a, 1e-15);
  for (std::size_t j = 0; j < 6; ++j) {
    EXPECT_NEAR(o.at(0, j), a * v.at(0, j) + b * v.at(1, j), 1e-14);
    EXPECT_NEAR(o.at(1, j), b * v.at(0, j) + a * v.at(1, j), 1e-14);
  }
}

double laplace_at(double x, double mu, double sigma) {
  Tape t(false);
  return rhema::laplace_attn(t.input(Tensor::row({x})), t.input(Tensor::row({mu})), t.input(Tensor::row({sigma})))
      .value()[0];
}

TEST(LaplaceAttn, Values) {
  EXPECT_DOUBLE_EQ(laplace_at(0.7, 0.7, 0.3), 0.5);
  EXPECT_DOUBLE_EQ(laplace_at(1e6, 0.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(laplace_at(-1e6, 0.0, 1.0), 0.0);
  EXPECT_NEAR(laplace_at(1.0, 0.0, 1.0), 0.8413, 1e-4);
  for (double x : {-2.0, -0.4, 0.3, 1.0, 2.7}) EXPECT_NEAR(laplace_at(x, 0.0, 1.0), normal_cdf(x), 1e-12) << x;
  EXPECT_NEAR(laplace_at(1.3, 0.5, 2.0), normal_cdf(0.4), 1e-12);
}

TEST(LaplaceAttn, MaskedEntriesAreZeroAndGradients) {
  Mask m(3, 3);
  m.set(0, 2, false);
  Tape t(false);
  const Tensor w =
      rhema::laplace_attn(t.input(test::randn(3, 3, 1)), t.input(Tensor::row({0.2})), t.input(Tensor::row({0.8})), &m)
          .value();
  EXPECT_EQ(w.at(0, 2), 0.0);
  const Tensor s = test::randn(3, 3, 2);
  EXPECT_LE(test::central_diff_error(
                [&](Tape& tp, Var x) {
                  return test::weighted(rhema::laplace_attn(x, tp.constant(Tensor::row({0.2})),
                                                            tp.constant(Tensor::row({0.8})), &m));
                },
                s),
            1e-6);
  EXPECT_LE(test::central_diff_error(
                [&](Tape& tp, Var mu) {
                  return test::weighted(rhema::laplace_attn(tp.constant(s), mu, tp.constant(Tensor::row({0.8})), &m));
                },
                Tensor::row({0.2})),
            1e-6);
  EXPECT_LE(test::central_diff_error(
                [&](Tape& tp, Var sg) {
                  return test::weighted(rhema::laplace_attn(tp.constant(s), tp.constant(Tensor::row({0.2})), sg, &m));
                },
                Tensor::row({0.8})),
            1e-6);
}

Tensor reduced(const Tensor& s, const Tensor& ctx, const Mask* m = nullptr, double mu = 0.1, double sigma = 0.7) {
  Tape t(false);
  return rhema::reduced_laplace_attn(t.input(s), t.input(ctx), t.input(Tensor::row({mu})),
                                     t.input(Tensor::row({sigma})), m)
      .value();
}

TEST(ReducedLaplace, RowsNormalizeAndZeroContextReduces) {
  const Tensor s = test::randn(5, 5, 3);
  Mask m = rhema::attention_mask(5, 4, 2);
  const Tensor w = reduced(s, s, &m);
  for (std::size_t r = 0; r < 5; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 5; ++c) {
      total += w.at(r, c);
      if (!m(r, c)) EXPECT_EQ(w.at(r, c), 0.0);
      else EXPECT_GT(w.at(r, c), 0.0);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  const Tensor w0 = reduced(s, Tensor({5, 5}));
  for (std::size_t r = 0; r < 5; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 5; ++c) total += laplace_at(s.at(r, c), 0.1, 0.7);
    for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(w0.at(r, c), laplace_at(s.at(r, c), 0.1, 0.7) / total, 1e-14);
  }
}

TEST(ReducedLaplace, RaisingOneScoreRaisesItsWeight) {
  std::mt19937 gen(17);
  std::uniform_real_distribution<double> bump(0.01, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor s = test::randn(4, 4, 100 + trial);
    const Tensor w = reduced(s, s);
    const std::size_t r = trial % 4, c = (trial / 4) % 4;
    Tensor s2 = s;
    s2.at(r, c) += bump(gen);
    EXPECT_GT(reduced(s2, s2).at(r, c), w.at(r, c)) << "trial " << trial;
  }
}

TEST(ReducedLaplace, Gradients) {
  const Tensor s = test::randn(4, 4, 5);
  const Tensor ctx = test::randn(4, 4, 6);
  Mask m = rhema::attention_mask(4, 3, 0);
  auto consts = [](Tape& tp) {
    return std::pair{tp.constant(Tensor::row({0.1})), tp.constant(Tensor::row({0.7}))};
  };
  EXPECT_LE(test::central_diff_error(
                [&](Tape& tp, Var x) {
                  auto [mu, sg] = consts(tp);
                  return test::weighted(rhema::reduced_laplace_attn(x, x, mu, sg, &m));
                },
                s),
            1e-6);
  EXPECT_LE(test::central_diff_error(
                [&](Tape& tp, Var c) {
                  auto [mu, sg] = consts(tp);
                  return test::weighted(rhema::reduced_laplace_attn(tp.constant(s), c, mu, sg, &m));
                },
                ctx),
            1e-6);
  EXPECT_LE(test::central_diff_error(
                [&](Tape& tp, Var mu) {
                  return test::weighted(rhema::reduced_laplace_attn(tp.constant(s), tp.constant(ctx), mu,
                                                                    tp.constant(Tensor::row({0.7})), &m));
                },
                Tensor::row({0.1})),
            1e-6);
}

TEST(RelativeBias, ClippedOffsets) {
  Tape t(false);
  const Tensor b = Tensor::row({-2, -1, 0, 1, 2});  // window 2
  const Tensor m = rhema::relative_bias(t.input(b), 5, 2).value();
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) EXPECT_EQ(m.at(i, j), std::clamp(j - i, -2, 2));
}

TEST(AttentionMask, ChunkStructure) {
  const Mask m = rhema::attention_mask(4, 4, 2);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(m(i, j), i / 2 == j / 2) << i << "," << j;
  const Mask padded = rhema::attention_mask(5, 3, 0);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(padded(i, j), i < 3 ? j < 3 : i == j);
  const Mask wide = rhema::attention_mask(6, 6, 8), global = rhema::attention_mask(6, 6, 0);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(wide(i, j), global(i, j));
}

// Φ forced through its bias: σ(±1000) is exactly 1 or 0 in double precision.
TEST(GatedOutput, ForcedUpdateGate) {
  Fixture f(small_config());
  const Tensor x = test::randn(5, 4, 10), z = test::randn(5, 4, 11), o = test::randn(5, 6, 12);
  f.zero("blk.w_phi");
  f.ps.at("blk.b_phi").fill(-1000.0);
  {
    Tape t(false);
    const Tensor y = f.block.gated_output(t, f.ps, t.input(x), t.input(z), t.input(o)).value();
    EXPECT_EQ(y.vec(), x.vec());
  }
  f.ps.at("blk.b_phi").fill(1000.0);
  Tape t(false);
  const Tensor y = f.block.gated_output(t, f.ps, t.input(x), t.input(z), t.input(o)).value();
  // Candidate computed directly: silu(Z·W_h + (γ⊙O)·U_h + b_h).
  const Tensor gamma_pre = matmul(z, f.ps.at("blk.w_gamma"));
  const Tensor zh = matmul(z, f.ps.at("blk.w_h"));
  Tensor go({5, 6});
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 6; ++c)
      go.at(r, c) = o.at(r, c) / (1.0 + std::exp(-(gamma_pre.at(r, c) + f.ps.at("blk.b_gamma")[c])));
  const Tensor gu = matmul(go, f.ps.at("blk.u_h"));
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 4; ++c) {
      const double a = zh.at(r, c) + gu.at(r, c) + f.ps.at("blk.b_h")[c];
      const double s = 1.0 / (1.0 + std::exp(-a));
      EXPECT_NEAR(y.at(r, c), s + a * s * (1 - s), 1e-14);
    }
}

TEST(GatedOutput, AllSignalGatedOff) {
  Fixture f(small_config());
  for (const char* n : {"blk.w_gamma", "blk.w_h"}) f.zero(n);
  f.ps.at("blk.b_gamma").fill(-1000.0);
  f.zero("blk.b_h");
  f.zero("blk.w_phi");
  f.ps.at("blk.b_phi").fill(1000.0);
  Tape t(false);
  const Tensor y = f.block
                       .gated_output(t, f.ps, t.input(test::randn(5, 4, 1)), t.input(test::randn(5, 4, 2)),
                                     t.input(test::randn(5, 6, 3)))
                       .value();
  for (double v : y.vec()) EXPECT_EQ(v, 0.5);
}

TEST(RhemaBlock, ShapeAndSkipOnlyIdentity) {
  RhemaConfig c = small_config(AttnFn::kReducedLaplace, rb::ResidualMode::kStatic);
  c.d_model = c.z_dim = 16;
  c.n_ema_head = 4;
  c.static_alpha = 0.0;
  c.static_beta = 1.0;
  Fixture f(c);
  for (auto& g : f.gates) {
    g.static_alpha = 0.0;
    g.static_beta = 1.0;
  }
  const Tensor x = test::randn(9, 16, 4);
  Tape t(false);
  const Tensor y = f.block.forward(t, f.ps, f.gates, t.input(x), rhema::attention_mask(9, 9, 0), 9, 0).value();
  EXPECT_EQ(y.shape(), (Shape{9, 16}));
  EXPECT_EQ(y.vec(), x.vec());
}

class BlockGradient : public ::testing::TestWithParam<std::tuple<AttnFn, rb::ResidualMode>> {};

TEST_P(BlockGradient, AllParametersMatchCentralDifference) {
  auto [fn, mode] = GetParam();
  RhemaConfig c = small_config(fn, mode);
  c.d_model = c.z_dim = 8;
  c.v_dim = 16;
  Fixture f(c);
  for (auto& g : f.gates) {
    g.static_alpha = 0.8;
    g.static_beta = 1.1;
    g.cache_f = test::randn(1, 8, 40, 0.5);
    g.cache_x = test::randn(1, 8, 41, 0.5);
  }
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  for (auto& [name, p] : f.ps)
    for (auto& v : p.vec()) v += jitter(gen);
  const Tensor x = test::randn(5, 8, 6);
  const Mask mask = rhema::attention_mask(5, 5, 2);
  auto loss = [&](Tape& t) { return test::weighted(f.block.forward(t, f.ps, f.gates, t.constant(x), mask, 5, 2)); };
  for (const auto& name : f.ps.names()) EXPECT_LE(test::param_diff_error(loss, f.ps, name), 1e-4) << name;
}

INSTANTIATE_TEST_SUITE_P(
    Matrix, BlockGradient,
    ::testing::Combine(::testing::Values(AttnFn::kSoftmax, AttnFn::kLaplace, AttnFn::kReducedLaplace),
                       ::testing::Values(rb::ResidualMode::kClassic, rb::ResidualMode::kStatic,
                                         rb::ResidualMode::kDynamic)),
    [](const auto& info) {
      return rhema::attn_fn_name(std::get<0>(info.param)) + "_" + rb::mode_name(std::get<1>(info.param));
    });

struct EncoderFixture {
  RhemaConfig cfg = small_config();
  rhema::HierarchicalEncoder enc{"enc", cfg};
  ParamStore ps;
  std::vector<rb::GateState> gates;
  EncoderFixture() {
    Rng rng(9);
    enc.init(ps, rng);
    for (int i = 0; i < 4; ++i) gates.emplace_back(cfg.residual, cfg.d_model);
  }
};

TEST(HierarchicalEncoder, LocalTraceHasZeroWeightAcrossChunks) {
  EncoderFixture f;
  Tape t(false);
  std::vector<rhema::AttentionTrace> traces;
  f.enc.forward(t, f.ps, f.gates, t.input(test::randn(4, 4, 1)), 4, nullptr, &traces);
  ASSERT_EQ(traces.size(), 2u);
  EXPECT_EQ(traces[0].stage, "local");
  EXPECT_EQ(traces[1].stage, "global");
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      if (i / 2 != j / 2) EXPECT_EQ(traces[0].weights.at(i, j), 0.0);
      nonzero += traces[0].weights.at(i, j) != 0.0;
      EXPECT_GT(traces[1].weights.at(i, j), 0.0);
    }
  EXPECT_EQ(nonzero, 8u);
}

TEST(HierarchicalEncoder, FirstTokenReachesLastOnlyThroughGlobalStage) {
  EncoderFixture f;
  const Tensor x = test::randn(4, 4, 2);
  // Gradient of the last output row with respect to the first input row.
  auto probe = [&](bool local_only) {
    Tape t;
    Var in = t.input(x);
    Var y;
    if (local_only) {
      rhema::RhemaBlock local("enc.local", f.cfg);
      y = local.forward(t, f.ps, std::span<const rb::GateState>(f.gates).subspan(0, 2), in,
                        rhema::attention_mask(4, 4, 2), 4, 2);
    } else {
      y = f.enc.forward(t, f.ps, f.gates, in, 4);
    }
    t.backward(test::weighted(slice_rows(y, 3, 4)));
    double total = 0;
    for (std::size_t c = 0; c < 4; ++c) total += std::abs(t.grad(in.id).at(0, c));
    return total;
  };
  EXPECT_EQ(probe(true), 0.0);
  EXPECT_GT(probe(false), 1e-6);
}

TEST(NaiveAttention, SoftmaxRowsAndParameterCensus) {
  RhemaConfig c = small_config();
  rhema::NaiveAttentionBlock blk("naive", c);
  ParamStore ps;
  Rng rng(1);
  blk.init(ps, rng);
  for (const char* n : {"naive.w_q", "naive.w_k", "naive.w_v", "naive.w_o"}) EXPECT_TRUE(ps.contains(n)) << n;
  for (const auto& n : ps.names()) {
    EXPECT_EQ(n.find("ema"), std::string::npos) << n;
    EXPECT_EQ(n.find("kappa"), std::string::npos) << n;
  }
  std::vector<rb::GateState> gates(2, rb::GateState(c.residual, c.d_model));
  Tape t(false);
  std::vector<rhema::AttentionTrace> traces;
  blk.forward(t, ps, gates, t.input(test::randn(6, 4, 3)), 4, nullptr, &traces);
  ASSERT_EQ(traces.size(), 1u);
  for (std::size_t r = 0; r < 6; ++r) {
    double total = 0;
    for (std::size_t j = 0; j < 6; ++j) total += traces[0].weights.at(r, j);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

}  // namespace
}  // namespace hreb
