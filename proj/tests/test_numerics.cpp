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
#include "hreb/gradcheck.hpp"
#include "hreb/ops.hpp"
#include "hreb/params.hpp"
#include "support.hpp"

namespace hreb {
namespace {

using test::central_diff_error;
using test::randn;
using test::weighted;

double eval_unary(Var (*op)(Var), double x) {
  Tape t(false);
  return op(t.input(Tensor::row({x}))).value()[0];
}

TEST(Matmul, IdentityAndProjector) {
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  const Tensor id = matmul(Tensor::identity(2), a);
  EXPECT_EQ(id.vec(), a.vec());
  const Tensor p = matmul(Tensor::matrix({{1, 0}, {0, 0}}), Tensor::matrix({{5, 6}, {7, 8}}));
  EXPECT_EQ(p.vec(), (std::vector<double>{5, 6, 0, 0}));
}

TEST(Matmul, ShapeMismatchIsDimensionError) {
  Tape t;
  try {
    matmul(t.input(Tensor({2, 3})), t.input(Tensor({2, 3})));
    FAIL() << "expected a dimension error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
  }
}

TEST(Matmul, SumGradientMatchesCentralDifference) {
  const Tensor b = randn(4, 2, 7);
  const double err = central_diff_error(
      [&](Tape& t, Var a) { return sum(matmul(a, t.constant(b))); }, randn(3, 4, 8), 1e-5);
  EXPECT_LE(err, 1e-6);
}

TEST(Scalar, SigmoidValuesAndSymmetry) {
  EXPECT_DOUBLE_EQ(eval_unary(sigmoid, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(eval_unary(sigmoid, 1e6), 1.0);
  EXPECT_DOUBLE_EQ(eval_unary(sigmoid, -1e6), 0.0);
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> u(-30, 30);
  for (int i = 0; i < 100; ++i) {
    const double x = u(gen);
    EXPECT_NEAR(eval_unary(sigmoid, x) + eval_unary(sigmoid, -x), 1.0, 1e-15);
  }
}

TEST(Scalar, SiluVariants) {
  const long double s1 = 1.0L / (1.0L + std::exp(-1.0L));
  EXPECT_DOUBLE_EQ(eval_unary(silu_paper, 0.0), 0.5);
  EXPECT_NEAR(eval_unary(silu_paper, 1.0), static_cast<double>(s1 + s1 * (1 - s1)), 1e-15);
  EXPECT_NEAR(eval_unary(silu_paper, 1.0), 0.92767, 1e-5);
  EXPECT_NEAR(eval_unary(silu_paper, 800.0), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(eval_unary(silu_standard, 0.0), 0.0);
  EXPECT_NEAR(eval_unary(silu_standard, 1.0), static_cast<double>(s1), 1e-15);
  EXPECT_NEAR(eval_unary(silu_standard, 1.0), 0.73106, 1e-5);
  EXPECT_NEAR(eval_unary(silu_standard, 60.0), 60.0, 1e-12);
}

// erf by its Maclaurin series in long double.
double erf_series(double x) {
  long double term = x, total = 0;
  for (int n = 0; n < 200; ++n) {
    total += term / (2 * n + 1);
    term *= -static_cast<long double>(x) * x / (n + 1);
  }
  return static_cast<double>(2 / std::sqrt(static_cast<long double>(M_PI)) * total);
}

TEST(Scalar, ErfAgainstSeries) {
  EXPECT_EQ(eval_unary(erf, 0.0), 0.0);
  EXPECT_NEAR(eval_unary(erf, 1.0), 0.8427008, 1e-7);
  for (double x : {-2.5, -1.0, -0.3, 0.1, 0.7, 1.0, 2.0}) {
    EXPECT_NEAR(eval_unary(erf, x), erf_series(x), 1e-14) << x;
    EXPECT_EQ(eval_unary(erf, -x), -eval_unary(erf, x));
  }
}

TEST(Scalar, SoftplusStable) {
  EXPECT_NEAR(eval_unary(softplus, 0.0), std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(eval_unary(softplus, 1000.0), 1000.0);
  EXPECT_GE(eval_unary(softplus, -1000.0), 0.0);
}

TEST(Softmax, UniformShiftAndNormalization) {
  const Tensor u = softmax_lastdim(Tensor::row({0, 0, 0}));
  for (double v : u.vec()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  const Tensor x = randn(5, 7, 11, 3.0);
  const Tensor s = softmax_lastdim(x);
  Tensor shifted = x;
  for (auto& v : shifted.vec()) v += 123.25;
  const Tensor s2 = softmax_lastdim(shifted);
  for (std::size_t r = 0; r < 5; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 7; ++c) {
      total += s.at(r, c);
      EXPECT_NEAR(s.at(r, c), s2.at(r, c), 1e-14);
    }
    EXPECT_NEAR(total, 1.0, 1e-14);
  }
}

TEST(Softmax, MaskedEntriesAreZero) {
  Mask m(2, 3);
  m.set(0, 1, false);
  m.set(1, 0, false);
  m.set(1, 2, false);
  const Tensor s = softmax_lastdim(randn(2, 3, 5), &m);
  EXPECT_EQ(s.at(0, 1), 0.0);
  EXPECT_NEAR(s.at(0, 0) + s.at(0, 2), 1.0, 1e-15);
  EXPECT_EQ(s.at(1, 1), 1.0);
}

TEST(Logsumexp, ValuesAgainstLongDouble) {
  Tape t(false);
  EXPECT_NEAR(logsumexp(t.input(Tensor::row({0, 0})), 1).value().item(), std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(logsumexp(t.input(Tensor::row({-4.25})), 1).value().item(), -4.25);
  std::mt19937 gen(5);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x({1, 9});
    long double acc = 0;
    for (auto& v : x.vec()) {
      v = u(gen);
      acc += std::exp(static_cast<long double>(v));
    }
    const double want = static_cast<double>(std::log(acc));
    const double got = logsumexp(t.input(x), 1).value().item();
    EXPECT_LE(std::abs(got - want), 1e-12 * std::max(1.0, std::abs(want)));
  }
}

TEST(Backward, SumAndSquare) {
  Tape t;
  const Tensor xv = randn(3, 4, 2);
  Var x = t.input(xv);
  t.backward(sum(x));
  for (double g : t.grad(x.id).vec()) EXPECT_EQ(g, 1.0);
  Tape t2;
  Var y = t2.input(xv);
  t2.backward(sum(mul(y, y)));
  for (std::size_t i = 0; i < xv.size(); ++i) EXPECT_DOUBLE_EQ(t2.grad(y.id)[i], 2 * xv[i]);
}

TEST(Backward, NonScalarLossIsRejected) {
  Tape t;
  Var x = t.input(Tensor({2, 2}, 1.0));
  EXPECT_THROW(t.backward(x), Error);
}

TEST(Backward, ParamBindingIsDeduplicated) {
  Tensor p = Tensor::row({1.5, -2.0});
  Tape t;
  Var a = t.param(p);
  Var b = t.param(p);
  EXPECT_EQ(a.id, b.id);
  t.backward(sum(mul(a, b)));
  EXPECT_DOUBLE_EQ(t.param_grad(p)[0], 3.0);
  EXPECT_DOUBLE_EQ(t.param_grad(p)[1], -4.0);
}

// Every differentiable op against the independent central difference.
struct OpCase {
  const char* name;
  std::function<Var(Tape&, Var)> f;
  Tensor x;
};

class OpGradient : public ::testing::TestWithParam<int> {};

std::vector<OpCase> op_cases() {
  const Tensor b34 = randn(3, 4, 21), b43 = randn(4, 3, 22), r4 = randn(1, 4, 23);
  const Tensor pos = [] {
    Tensor t = randn(3, 4, 24);
    for (auto& v : t.vec()) v = 0.5 + std::abs(v);
    return t;
  }();
  Mask mask(3, 4);
  mask.set(0, 3, false);
  mask.set(2, 0, false);
  std::vector<OpCase> cs = {
      {"matmul_left", [=](Tape& t, Var x) { return weighted(matmul(x, t.constant(b43))); }, randn(3, 4, 1)},
      {"matmul_right", [=](Tape& t, Var x) { return weighted(matmul(t.constant(b34), x)); }, randn(4, 2, 2)},
      {"transpose", [](Tape&, Var x) { return weighted(transpose(x)); }, randn(3, 4, 3)},
      {"add", [=](Tape& t, Var x) { return weighted(add(x, mul(x, t.constant(b34)))); }, randn(3, 4, 4)},
      {"sub", [=](Tape& t, Var x) { return weighted(sub(t.constant(b34), mul(x, x))); }, randn(3, 4, 5)},
      {"add_row", [=](Tape& t, Var x) { return weighted(add_row(t.constant(b34), x)); }, randn(1, 4, 6)},
      {"mul_row", [=](Tape& t, Var x) { return weighted(mul_row(t.constant(b34), x)); }, randn(1, 4, 7)},
      {"scale", [](Tape&, Var x) { return weighted(scale(x, -2.5)); }, randn(3, 4, 8)},
      {"add_scalar", [](Tape&, Var x) { return weighted(mul(add_scalar(x, 0.3), x)); }, randn(3, 4, 9)},
      {"one_minus", [](Tape&, Var x) { return weighted(mul(one_minus(x), x)); }, randn(3, 4, 10)},
      {"sigmoid", [](Tape&, Var x) { return weighted(sigmoid(x)); }, randn(3, 4, 11)},
      {"tanh", [](Tape&, Var x) { return weighted(tanh(x)); }, randn(3, 4, 12)},
      {"exp", [](Tape&, Var x) { return weighted(exp(x)); }, randn(3, 4, 13)},
      {"log", [](Tape&, Var x) { return weighted(log(x)); }, pos},
      {"softplus", [](Tape&, Var x) { return weighted(softplus(x)); }, randn(3, 4, 14)},
      {"erf", [](Tape&, Var x) { return weighted(erf(x)); }, randn(3, 4, 15)},
      {"silu_paper", [](Tape&, Var x) { return weighted(silu_paper(x)); }, randn(3, 4, 16)},
      {"silu_standard", [](Tape&, Var x) { return weighted(silu_standard(x)); }, randn(3, 4, 17)},
      {"mean", [](Tape&, Var x) { return mean(mul(x, x)); }, randn(3, 4, 18)},
      {"logsumexp_rows", [](Tape&, Var x) { return weighted(logsumexp(x, 1)); }, randn(3, 4, 19)},
      {"logsumexp_cols", [](Tape&, Var x) { return weighted(logsumexp(x, 0)); }, randn(3, 4, 20)},
      {"softmax", [](Tape&, Var x) { return weighted(softmax_lastdim(x)); }, randn(3, 4, 25)},
      {"softmax_masked", [=](Tape&, Var x) { return weighted(softmax_lastdim(x, &mask)); }, randn(3, 4, 26)},
      {"concat_cols", [=](Tape& t, Var x) { return weighted(concat_cols(x, t.constant(b34))); }, randn(3, 2, 27)},
      {"slice_rows", [](Tape&, Var x) { return weighted(slice_rows(x, 1, 3)); }, randn(3, 4, 28)},
      {"repeat_cols", [](Tape&, Var x) { return weighted(repeat_cols(x, 3)); }, randn(1, 4, 29)},
      {"gather_rows",
       [](Tape&, Var x) {
         const std::vector<int> ids = {2, 0, 2, 1};
         return weighted(gather_rows(x, ids));
       },
       randn(3, 4, 30)},
      {"layer_norm",
       [=](Tape& t, Var x) { return weighted(layer_norm(x, t.constant(r4), t.constant(randn(1, 4, 31)))); },
       randn(3, 4, 32)},
      {"batch_norm",
       [=](Tape& t, Var x) {
         return weighted(masked_batch_norm(x, t.constant(r4), t.constant(randn(1, 4, 33)), 2));
       },
       randn(3, 4, 34)},
  };
  return cs;
}

TEST_P(OpGradient, MatchesCentralDifference) {
  const auto cs = op_cases();
  const auto& c = cs.at(static_cast<std::size_t>(GetParam()));
  EXPECT_LE(central_diff_error(c.f, c.x), 1e-6) << c.name;
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::Range(0, static_cast<int>(op_cases().size())),
                         [](const auto& info) { return std::string(op_cases()[info.param].name); });

TEST(GatherRows, SkippedRowGetsNoGradient) {
  Tape t;
  Var table = t.input(randn(3, 2, 1));
  const std::vector<int> ids = {0, 1, 0, 2};
  t.backward(sum(gather_rows(table, ids, 0)));
  EXPECT_EQ(t.grad(table.id).at(0, 0), 0.0);
  EXPECT_EQ(t.grad(table.id).at(0, 1), 0.0);
  EXPECT_EQ(t.grad(table.id).at(1, 0), 1.0);
}

TEST(FiniteDiffCheck, SensitivityAndBaseline) {
  const Tensor x = randn(2, 3, 4);
  EXPECT_LE(finite_diff_check([](Tape&, Var v) { return sum(v); }, x), 1e-9);
  EXPECT_LE(finite_diff_check([](Tape&, Var v) { return sum(sigmoid(v)); }, x), 1e-6);
  const Tensor b = randn(3, 2, 5);
  auto f = [&](Tape& t, Var v) { return weighted(matmul(v, t.constant(b))); };
  testing::set_matmul_grad_fault(1.1);
  const double broken = finite_diff_check(f, x);
  testing::set_matmul_grad_fault(1.0);
  EXPECT_GE(broken, 1e-2);
  EXPECT_LE(finite_diff_check(f, x), 1e-6);
}

TEST(Adam, ZeroGradientLeavesParams) {
  ParamStore ps;
  ps.add("w", Tensor::row({1.0, -2.0}));
  AdamState st;
  GradMap g{{"w", Tensor::row({0.0, 0.0})}};
  adam_step(ps, g, st);
  EXPECT_EQ(st.t, 1);
  EXPECT_EQ(ps.at("w").vec(), (std::vector<double>{1.0, -2.0}));
}

TEST(Adam, MomentFreeFirstStep) {
  ParamStore ps;
  ps.add("w", Tensor::row({1.0, -2.0, 0.5}));
  AdamState st;
  st.config = {0.1, 0.0, 0.0, 1e-8};
  const std::vector<double> g = {0.3, -4.0, 1e-3};
  adam_step(ps, GradMap{{"w", Tensor::row(g)}}, st);
  const std::vector<double> p0 = {1.0, -2.0, 0.5};
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_NEAR(ps.at("w")[i], p0[i] - 0.1 * g[i] / (std::abs(g[i]) + 1e-8), 1e-15);
}

TEST(Adam, ConstantGradientApproachesSignDescent) {
  ParamStore ps;
  ps.add("w", Tensor::row({0.0}));
  AdamState st;
  st.config.lr = 0.01;
  double prev = 0.0, step = 0.0;
  for (int i = 0; i < 500; ++i) {
    adam_step(ps, GradMap{{"w", Tensor::row({2.5})}}, st);
    step = prev - ps.at("w")[0];
    prev = ps.at("w")[0];
  }
  EXPECT_NEAR(step, 0.01, 1e-8);
}

TEST(Adam, NonFiniteGradientIsDivergence) {
  ParamStore ps;
  ps.add("w", Tensor::row({1.0}));
  AdamState st;
  try {
    adam_step(ps, GradMap{{"w", Tensor::row({std::nan("")})}}, st);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDivergence);
  }
  EXPECT_EQ(ps.at("w")[0], 1.0);
}

TEST(ClipGradNorm, RescalesToLimit) {
  GradMap g{{"a", Tensor::row({3.0})}, {"b", Tensor::row({4.0})}};
  EXPECT_DOUBLE_EQ(clip_grad_norm(g, 1.0), 5.0);
  EXPECT_NEAR(g["a"][0], 0.6, 1e-15);
  EXPECT_NEAR(g["b"][0], 0.8, 1e-15);
}

}  // namespace
}  // namespace hreb
