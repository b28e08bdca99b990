// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "bridgekit/sde/buffer.hpp"
#include "bridgekit/sde/simulate.hpp"
#include "bridgekit/sde/trajectory_io.hpp"
#include "test_seeds.hpp"

using namespace bridgekit;

namespace {

DriftFn constant_drift(std::vector<double> c) {
  return [c](const Matrix& x, double) {
    Matrix m(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t d = 0; d < x.cols(); ++d) m(r, d) = c[d];
    return m;
  };
}

DriftFn linear_drift(double a) {
  return [a](const Matrix& x, double) {
    Matrix m = x;
    for (std::size_t i = 0; i < m.size(); ++i) m[i] *= a;
    return m;
  };
}

struct Moments {
  double mean, var;
};

Moments moments(const Matrix& col) {
  double m = 0.0;
  for (std::size_t i = 0; i < col.size(); ++i) m += col[i];
  m /= static_cast<double>(col.size());
  double v = 0.0;
  for (std::size_t i = 0; i < col.size(); ++i) v += (col[i] - m) * (col[i] - m);
  return {m, v / static_cast<double>(col.size() - 1)};
}

TrajectoryBatch tagged_batch(std::size_t n, std::size_t dim, double tag) {
  TrajectoryBatch b;
  b.grid.n_steps = 2;
  for (std::size_t i = 0; i < n; ++i) b.paths.emplace_back(3, dim, tag + static_cast<double>(i));
  return b;
}

}  // namespace

TEST(EmStep, Examples) {
  const std::vector<double> x{1.0}, zero{0.0};
  EXPECT_EQ(em_step(x, zero, 1.0, 0.01, zero), x);
  EXPECT_DOUBLE_EQ(em_step(x, std::vector<double>{-1.0}, 1.0, 0.01, zero)[0], 0.99);
  EXPECT_DOUBLE_EQ(em_step(x, zero, 1.0, 0.01, std::vector<double>{0.7})[0], 1.0 + 0.1 * 0.7);
}

TEST(EmStep, ContractViolations) {
  const std::vector<double> x{1.0}, zero{0.0}, nan{std::nan("")};
  EXPECT_THROW(em_step(nan, zero, 1.0, 0.01, zero), ContractViolation);
  EXPECT_THROW(em_step(x, zero, 1.0, 0.0, zero), ContractViolation);
  EXPECT_THROW(em_step(x, zero, -1.0, 0.01, zero), ContractViolation);
}

TEST(TimeGrid, DefaultsNormalizeToUnitHorizon) {
  TimeGrid g;
  EXPECT_EQ(g.n_steps, 100u);
  EXPECT_DOUBLE_EQ(g.dt, 0.01);
  EXPECT_DOUBLE_EQ(g.horizon(), 1.0);
  EXPECT_DOUBLE_EQ(g.default_sigma(), 1.0);
  EXPECT_DOUBLE_EQ(g.clock(100), 1.0);
  g.direction = Direction::Backward;
  EXPECT_DOUBLE_EQ(g.reference_time(0), 1.0);
  EXPECT_DOUBLE_EQ(g.reference_time(100), 0.0);
}

TEST(Simulate, ConstantDriftWithoutNoise) {
  const auto b = simulate(constant_drift({0.5, -2.0}), point_mass({1.0, 1.0}), 0.0, TimeGrid{}, 3, 1);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(b.paths[i](100, 0), 1.5, 1e-12);
    EXPECT_NEAR(b.paths[i](100, 1), -1.0, 1e-12);
    EXPECT_EQ(b.paths[i](0, 0), 1.0);
  }
}

TEST(Simulate, ZeroDiffusionLinearDriftMatchesEulerRecursion) {
  const double a = -0.7, dt = 0.01;
  const auto b = simulate(linear_drift(a), point_mass({2.0}), 0.0, TimeGrid{}, 1, 0);
  double x = 2.0;
  for (std::size_t k = 1; k <= 100; ++k) {
    x = x + (a * x) * dt + 0.0;
    EXPECT_EQ(b.paths[0](k, 0), x) << "step " << k;
  }
}

TEST(Simulate, WienerVarianceFromPointMass) {
  const auto b = simulate(constant_drift({0.0}), point_mass({0.0}), 1.0, TimeGrid{}, 10000, 5);
  EXPECT_NEAR(moments(b.terminal()).var, 1.0, 0.05);
}

TEST(Simulate, OrnsteinUhlenbeckStationaryVariance) {
  const auto b = simulate(linear_drift(-1.0), isotropic_gaussian({0.0}, 1.0), std::sqrt(2.0), TimeGrid{}, 10000, 6);
  EXPECT_NEAR(moments(b.terminal()).var, 1.0, 0.05);
}

TEST(Simulate, DivergenceGuardAborts) {
  EXPECT_THROW(simulate(constant_drift({1e9}), point_mass({0.0}), 0.0, TimeGrid{}, 2, 0), SimulationDiverged);
}

TEST(Simulate, NetworkDimensionMustMatchSampler) {
  auto net = build_drift_network(2, 0);
  EXPECT_THROW(simulate(net, point_mass({0.0}), 1.0, TimeGrid{}, 2, 0), ContractViolation);
}

TEST(Simulate, NetworkDriftWithZeroHeadIsWiener) {
  auto net = build_drift_network(1, 0, true);
  const auto a = simulate(net, point_mass({0.0}), 1.0, TimeGrid{}, 4, 9);
  const auto b = simulate(constant_drift({0.0}), point_mass({0.0}), 1.0, TimeGrid{}, 4, 9);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.paths[i], b.paths[i]);
}

class SdeProperty : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(SdeProperty, SeedDeterminismAndStreamIndependence) {
  auto net = build_drift_network(2, GetParam(), false);
  const auto init = isotropic_gaussian({0.0, 1.0}, 1.0);
  const auto a = simulate(net, init, 1.0, TimeGrid{}, 50, GetParam());
  const auto b = simulate(net, init, 1.0, TimeGrid{}, 50, GetParam());
  const auto threaded = simulate(net, init, 1.0, TimeGrid{}, 200, GetParam(), 3);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(a.paths[i], b.paths[i]);
    EXPECT_EQ(a.paths[i], threaded.paths[i]) << "path " << i << " depends on N_x or threads";
  }
  const auto other = simulate(net, init, 1.0, TimeGrid{}, 50, GetParam() + 1);
  EXPECT_NE(a.paths[0], other.paths[0]);
}

// mean(t) = x0 e^{-t}, var(t) = (sigma^2/2)(1 - e^{-2t}) within 3 standard errors.
TEST_P(SdeProperty, OrnsteinUhlenbeckMarginalMoments) {
  const double x0 = 2.0, sigma = std::sqrt(2.0);
  const std::size_t n = 10000;
  const auto b = simulate(linear_drift(-1.0), point_mass({x0}), sigma, TimeGrid{}, n, GetParam());
  for (std::size_t k : {25u, 50u, 100u}) {
    const double t = b.grid.clock(k);
    const double mean = x0 * std::exp(-t), var = 0.5 * sigma * sigma * (1.0 - std::exp(-2.0 * t));
    const Moments m = moments(b.states_at(k));
    EXPECT_NEAR(m.mean, mean, 3.0 * std::sqrt(var / n)) << "t=" << t;
    EXPECT_NEAR(m.var, var, 3.0 * var * std::sqrt(2.0 / (n - 1))) << "t=" << t;
  }
}

TEST_P(SdeProperty, BufferHoldsContiguousSuffix) {
  Rng rng(GetParam());
  TrajectoryBuffer buf(37);
  double next_tag = 0.0;
  for (int round = 0; round < 30; ++round) {
    const std::size_t n = rng.below(20);
    buf.push(tagged_batch(n, 2, next_tag));
    next_tag += static_cast<double>(n);
    ASSERT_LE(buf.size(), buf.capacity());
    for (std::size_t i = 0; i < buf.size(); ++i)
      ASSERT_EQ(buf.entries()[i](0, 0), static_cast<double>(buf.first_index() + i));
    ASSERT_EQ(buf.first_index() + buf.size(), static_cast<std::uint64_t>(next_tag));
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, SdeProperty, ::testing::ValuesIn(bridgekit::test::kPropertySeeds));

TEST(TrajectoryBuffer, FifoArithmetic) {
  TrajectoryBuffer buf(512);
  buffer_push(buf, tagged_batch(128, 1, 0));
  EXPECT_EQ(buf.size(), 128u);
  for (int i = 1; i < 4; ++i) buffer_push(buf, tagged_batch(128, 1, 128.0 * i));
  EXPECT_EQ(buf.size(), 512u);
  buffer_push(buf, tagged_batch(128, 1, 512));
  EXPECT_EQ(buf.size(), 512u);
  EXPECT_EQ(buf.entries().front()(0, 0), 128.0);  // the 128 oldest are gone
  EXPECT_EQ(buf.entries().back()(0, 0), 639.0);
}

TEST(TrajectoryBuffer, DimensionMismatchAndEmptySampling) {
  TrajectoryBuffer buf(8);
  Rng rng(0);
  EXPECT_THROW(buf.sample(4, rng), ContractViolation);
  buf.push(tagged_batch(2, 2, 0));
  EXPECT_THROW(buf.push(tagged_batch(2, 3, 0)), ContractViolation);
  const auto mb = buf.sample(16, rng);
  EXPECT_EQ(mb.x.shape(), (Shape{16, 2}));
  for (double c : mb.clock) EXPECT_LT(c, 1.0);
}

TEST(TrajectoryCsv, ColumnsAndRows) {
  const auto b = simulate(constant_drift({1.0, 2.0}), point_mass({0.0, 0.0}), 0.0, TimeGrid{4, 0.25}, 2, 0);
  std::stringstream ss;
  write_trajectory_csv(ss, b);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "traj_id,step,t,x_1,x_2");
  std::getline(ss, line);
  EXPECT_EQ(line, "0,0,0,0,0");
  std::size_t rows = 1;
  std::string last;
  while (std::getline(ss, line)) {
    ++rows;
    last = line;
  }
  EXPECT_EQ(rows, 2u * 5u);
  EXPECT_EQ(last, "1,4,1,1,2");
}
