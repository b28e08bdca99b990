// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "bridgekit/ad/tape.hpp"
#include "bridgekit/core/rng.hpp"
#include "test_seeds.hpp"

using namespace bridgekit;
using ad::Tape;
using ad::Var;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(lo, hi);
  return m;
}

// Builds a scalar from leaves; central differences against backward().
using Builder = std::function<Var(Tape&, std::vector<Var>&)>;

void gradient_check(const std::vector<Matrix>& inputs, const Builder& build, const char* label) {
  Tape tape;
  std::vector<Var> leaves;
  for (const auto& m : inputs) leaves.push_back(tape.input(m, true));
  Var out = build(tape, leaves);
  auto g = ad::backward(tape, out);

  const double h = 1e-5;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Matrix analytic = g.wrt(leaves[k]);
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      auto eval = [&](double delta) {
        auto perturbed = inputs;
        perturbed[k][i] += delta;
        Tape t2;
        std::vector<Var> l2;
        for (const auto& m : perturbed) l2.push_back(t2.input(m, true));
        return t2.value(build(t2, l2))[0];
      };
      const double fd = (eval(h) - eval(-h)) / (2.0 * h);
      const double scale = std::max({std::abs(fd), std::abs(analytic[i]), 1e-3});
      EXPECT_LE(std::abs(analytic[i] - fd) / scale, 1e-4)
          << label << " input " << k << " entry " << i << ": analytic " << analytic[i] << " fd " << fd;
    }
  }
}

}  // namespace

TEST(AdBackward, SquareAtThree) {
  Tape tape;
  Var x = tape.input(Matrix{{3.0}}, true);
  auto g = ad::backward(tape, ad::square(x));
  EXPECT_DOUBLE_EQ(g.wrt(x)[0], 6.0);
}

TEST(AdBackward, ProductRule) {
  Tape tape;
  Var x = tape.input(Matrix{{2.0}}, true);
  Var y = tape.input(Matrix{{5.0}}, true);
  auto g = ad::backward(tape, x * y);
  EXPECT_DOUBLE_EQ(g.wrt(x)[0], 5.0);
  EXPECT_DOUBLE_EQ(g.wrt(y)[0], 2.0);
}

TEST(AdBackward, TanhSlopeAtZero) {
  Tape tape;
  Var x = tape.input(Matrix{{0.0}}, true);
  EXPECT_DOUBLE_EQ(ad::backward(tape, ad::tanh(x)).wrt(x)[0], 1.0);
}

TEST(AdBackward, NonScalarLossIsContractViolation) {
  Tape tape;
  Var x = tape.input(Matrix(2, 1, 1.0), true);
  EXPECT_THROW(ad::backward(tape, ad::square(x)), ContractViolation);
}

TEST(AdBackward, ParameterGradientsByName) {
  ad::ParamSet ps;
  ps.add("w", Matrix{{2.0}});
  ps.add("unused", Matrix{{1.0, 1.0}});
  Tape tape;
  Var x = tape.input(Matrix{{3.0}});
  Var loss = ad::square(ad::matmul(x, tape.param(ps, 0)));
  auto g = ad::backward(tape, loss).by_name(ps);
  EXPECT_DOUBLE_EQ(g.at("w")[0], 2.0 * 6.0 * 3.0);
  EXPECT_EQ(g.at("unused").shape(), (Shape{1, 2}));
  EXPECT_DOUBLE_EQ(g.at("unused")[1], 0.0);
}

TEST(AdParamSet, DuplicateNamesRejected) {
  ad::ParamSet ps;
  ps.add("a", Matrix(1, 1));
  EXPECT_THROW(ps.add("a", Matrix(1, 1)), ContractViolation);
  EXPECT_EQ(ps.total_count(), 1u);
  EXPECT_THROW(ps.assign(0, Matrix(2, 2)), ContractViolation);
}

TEST(AdJvp, LinearMap) {
  Tape tape;
  Var x = tape.input(Matrix{{0.3, -0.7}});
  Var a = tape.constant(Matrix{{1.0, 3.0}, {2.0, 4.0}});  // x A^T with A = [[1,2],[3,4]]
  Var y = ad::matmul(x, a);
  auto j = ad::jvp(tape, x, Matrix{{1.0, 0.0}});
  const Matrix& t = tape.value(j.tangent(y));
  EXPECT_DOUBLE_EQ(t[0], 1.0);
  EXPECT_DOUBLE_EQ(t[1], 3.0);
}

TEST(AdJvp, IdentityAndTanh) {
  Tape tape;
  Var x = tape.input(Matrix{{0.0, 0.0}});
  Var y = ad::tanh(x);
  auto j = ad::jvp(tape, x, Matrix{{1.0, 1.0}});
  EXPECT_EQ(tape.value(j.tangent(x)), (Matrix{{1.0, 1.0}}));
  EXPECT_EQ(tape.value(j.tangent(y)), (Matrix{{1.0, 1.0}}));
}

TEST(AdJvp, ShapeMismatchIsContractViolation) {
  Tape tape;
  Var x = tape.input(Matrix(2, 3));
  EXPECT_THROW(ad::jvp(tape, x, Matrix(3, 2)), ContractViolation);
}

TEST(AdJvp, IndependentNodesHaveZeroTangent) {
  Tape tape;
  Var c = tape.constant(Matrix{{4.0}});
  Var x = tape.input(Matrix{{1.0}});
  Var y = ad::square(c) + x;
  auto j = ad::jvp(tape, x, Matrix{{2.0}});
  EXPECT_FALSE(j.depends(c));
  EXPECT_DOUBLE_EQ(tape.value(j.tangent(y))[0], 2.0);
  EXPECT_DOUBLE_EQ(tape.value(j.tangent(c))[0], 0.0);
}

class AdProperty : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(AdProperty, EveryPrimitivePassesGradientCheck) {
  Rng rng(GetParam());
  auto R = [&](std::size_t r, std::size_t c) { return random_matrix(r, c, rng); };
  const Matrix w34 = R(3, 4), w31 = R(3, 1), w14 = R(1, 4);
  auto weigh = [](Tape& t, Var v, const Matrix& w) { return ad::sum(v * t.constant(w)); };

  gradient_check({R(3, 4), R(3, 4)}, [&](Tape& t, auto& l) { return weigh(t, l[0] + l[1], w34); }, "add");
  gradient_check({R(3, 4), R(1, 4)}, [&](Tape& t, auto& l) { return weigh(t, l[0] - l[1], w34); }, "sub-row");
  gradient_check({R(3, 4), R(3, 1)}, [&](Tape& t, auto& l) { return weigh(t, l[0] * l[1], w34); }, "mul-col");
  gradient_check({R(3, 4), R(3, 4)}, [&](Tape& t, auto& l) { return weigh(t, l[0] * l[1], w34); }, "mul");
  gradient_check({R(3, 2), R(2, 4)}, [&](Tape& t, auto& l) { return weigh(t, ad::matmul(l[0], l[1]), w34); },
                 "matmul");
  gradient_check({R(3, 4)}, [&](Tape& t, auto& l) { return weigh(t, ad::tanh(l[0]), w34); }, "tanh");
  gradient_check({R(3, 4)}, [&](Tape& t, auto& l) { return weigh(t, ad::square(l[0]), w34); }, "square");
  gradient_check({random_matrix(3, 4, rng, 0.5, 2.0)},
                 [&](Tape& t, auto& l) { return weigh(t, ad::rsqrt(l[0]), w34); }, "rsqrt");
  gradient_check({R(3, 4)}, [&](Tape& t, auto& l) { return weigh(t, ad::affine(l[0], -1.7, 0.4), w34); },
                 "affine");
  gradient_check({R(3, 4)}, [&](Tape&, auto& l) { return ad::square(ad::sum(l[0])); }, "sum");
  gradient_check({R(3, 4)}, [&](Tape& t, auto& l) { return weigh(t, ad::row_sum(l[0]), w31); }, "row_sum");
  gradient_check({R(3, 4)}, [&](Tape& t, auto& l) { return weigh(t, ad::row_mean(l[0]), w31); }, "row_mean");
  gradient_check({R(3, 4)}, [&](Tape& t, auto& l) { return weigh(t, ad::gather_col(l[0], 2), w31); },
                 "gather_col");
  gradient_check({R(3, 4), R(1, 4), R(1, 4)},
                 [&](Tape& t, auto& l) { return weigh(t, ad::layer_norm(l[0], l[1], l[2]), w34); }, "layer_norm");
  (void)w14;
}

// Second derivatives: parameter gradient of a directional derivative.
TEST_P(AdProperty, ReverseOverForwardMatchesFiniteDifferences) {
  Rng rng(GetParam());
  const Matrix x = random_matrix(5, 3, rng), dir = random_matrix(5, 3, rng), u = random_matrix(5, 3, rng);
  auto build = [&](Tape& t, std::vector<Var>& l) {
    Var xin = t.input(x);
    Var h = ad::tanh(ad::matmul(xin, l[0]) + l[1]);
    Var y = ad::matmul(ad::layer_norm(h, l[2], l[3]), l[4]);
    auto j = ad::jvp(t, xin, dir, y);
    return ad::sum(j.tangent(y) * t.constant(u));
  };
  gradient_check({random_matrix(3, 4, rng), random_matrix(1, 4, rng), random_matrix(1, 4, rng),
                  random_matrix(1, 4, rng), random_matrix(4, 3, rng)},
                 build, "reverse-over-forward");
}

TEST_P(AdProperty, ForwardAndReverseModesAgree) {
  Rng rng(GetParam());
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = random_matrix(4, 3, rng), v = random_matrix(4, 3, rng), u = random_matrix(4, 3, rng);
    const Matrix w1 = random_matrix(3, 6, rng), b1 = random_matrix(1, 6, rng), w2 = random_matrix(6, 3, rng);
    const Matrix gain = random_matrix(1, 6, rng), bias = random_matrix(1, 6, rng);
    Tape tape;
    Var xin = tape.input(x, true);
    Var h = ad::tanh(ad::matmul(xin, tape.constant(w1)) + tape.constant(b1));
    h = h + ad::square(ad::layer_norm(h, tape.constant(gain), tape.constant(bias)));
    Var y = ad::affine(ad::matmul(h, tape.constant(w2)), 0.5, 1.0) * xin;

    const Matrix jv = tape.value(ad::jvp(tape, xin, v, y).tangent(y));
    double fwd = 0.0;
    for (std::size_t i = 0; i < jv.size(); ++i) fwd += u[i] * jv[i];

    const Matrix jtu = ad::backward(tape, ad::sum(y * tape.constant(u))).wrt(xin);
    double rev = 0.0;
    for (std::size_t i = 0; i < jtu.size(); ++i) rev += jtu[i] * v[i];
    EXPECT_NEAR(fwd, rev, 1e-10 * std::max(1.0, std::abs(fwd)));
  }
}

TEST_P(AdProperty, GradientsAreDeterministic) {
  Rng rng(GetParam());
  ad::ParamSet ps;
  ps.add("w", random_matrix(3, 3, rng));
  const Matrix x = random_matrix(8, 3, rng);
  auto run = [&] {
    Tape tape;
    Var xin = tape.input(x);
    Var y = ad::tanh(ad::matmul(xin, tape.param(ps, 0)));
    Var t = ad::jvp(tape, xin, x, y).tangent(y);
    return ad::backward(tape, ad::sum(ad::square(t) + y)).for_params(ps);
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

INSTANTIATE_TEST_SUITE_P(Seeds, AdProperty, ::testing::ValuesIn(bridgekit::test::kPropertySeeds));
