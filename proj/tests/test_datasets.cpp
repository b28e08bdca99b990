// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "bridgekit/data/csv.hpp"
#include "bridgekit/data/empirical.hpp"
#include "bridgekit/data/gmm.hpp"
#include "bridgekit/data/manifold.hpp"
#include "test_seeds.hpp"

using namespace bridgekit;

namespace {

double column_mean_of(const Matrix& m, std::size_t c) {
  double s = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) s += m(r, c);
  return s / static_cast<double>(m.rows());
}

EmpiricalDistribution parse(const std::string& text, bool normalize = false) {
  std::istringstream is(text);
  return parse_csv(is, normalize);
}

std::size_t parse_error_line(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(Gmm, SingleModeMean) {
  Rng rng(1);
  const auto d = sample_gmm(GmmSpec::standard_normal(1), 10000, rng);
  EXPECT_EQ(d.samples.shape(), (Shape{10000, 1}));
  EXPECT_NEAR(column_mean_of(d.samples, 0), 0.0, 3.0 / 100.0);
}

TEST(Gmm, SymmetricTwoModesMean) {
  Rng rng(2);
  const GmmSpec spec{{{{-2.0}, 1.0}, {{2.0}, 1.0}}, {0.5, 0.5}};
  const auto d = sample_gmm(spec, 10000, rng);
  // Mixture variance 1 + 4 = 5.
  EXPECT_NEAR(column_mean_of(d.samples, 0), 0.0, 3.0 * std::sqrt(5.0 / 10000.0));
}

TEST(Gmm, ZeroWeightModeNeverDrawn) {
  Rng rng(3);
  const GmmSpec spec{{{{-100.0}, 1.0}, {{100.0}, 1.0}}, {1.0, 0.0}};
  const auto d = sample_gmm(spec, 5000, rng);
  for (std::size_t i = 0; i < d.samples.size(); ++i) EXPECT_LT(d.samples[i], 0.0);
}

TEST(Gmm, InvalidSpecsRejected) {
  Rng rng(0);
  EXPECT_THROW(sample_gmm(GmmSpec{}, 10, rng), ContractViolation);
  EXPECT_THROW(sample_gmm(GmmSpec{{{{0.0}, 1.0}}, {0.9}}, 10, rng), ContractViolation);
  EXPECT_THROW(sample_gmm(GmmSpec{{{{0.0}, 0.0}}, {1.0}}, 10, rng), ContractViolation);
  EXPECT_THROW(sample_gmm(GmmSpec::standard_normal(1), 0, rng), ContractViolation);
}

TEST(Gmm, RandomMeansInRange) {
  const auto spec = GmmSpec::random_means(4, 3, 9);
  EXPECT_NO_THROW(spec.validate());
  for (const auto& m : spec.modes)
    for (double v : m.mean) {
      EXPECT_GE(v, -2.5);
      EXPECT_LE(v, 2.5);
    }
  EXPECT_EQ(spec.modes.front().mean, GmmSpec::random_means(4, 3, 9).modes.front().mean);
}

TEST(Manifold, MoonsPointFormula) {
  EXPECT_EQ(moons_point(0, 0.0), (std::array<double, 2>{1.0, 0.0}));
  const auto b = moons_point(1, std::numbers::pi / 2);
  EXPECT_NEAR(b[0], 1.0, 1e-15);
  EXPECT_NEAR(b[1], -0.5, 1e-15);
}

TEST(Manifold, SwissRollRadiusIdentity) {
  Rng rng(4);
  const auto d = make_manifold(ManifoldKind::SwissRoll, 2000, 0.0, rng);
  const double pi = std::numbers::pi;
  for (std::size_t r = 0; r < d.size(); ++r) {
    const double r2 = d.samples(r, 0) * d.samples(r, 0) + d.samples(r, 2) * d.samples(r, 2);
    EXPECT_GE(r2, (1.5 * pi) * (1.5 * pi) - 1e-9);
    EXPECT_LE(r2, (4.5 * pi) * (4.5 * pi) + 1e-9);
    EXPECT_GE(d.samples(r, 1), 0.0);
    EXPECT_LE(d.samples(r, 1), 21.0);
  }
}

TEST(Manifold, SCurveSineBound) {
  Rng rng(5);
  const auto d = make_manifold(ManifoldKind::SCurve, 2000, 0.0, rng);
  for (std::size_t r = 0; r < d.size(); ++r) {
    EXPECT_LE(std::abs(d.samples(r, 0)), 1.0);
    EXPECT_GE(d.samples(r, 1), 0.0);
    EXPECT_LE(d.samples(r, 1), 2.0);
  }
}

TEST(Manifold, UnknownKindIsConfigError) {
  Rng rng(0);
  EXPECT_THROW(make_manifold("torus", 10, 0.0, rng), ConfigError);
  EXPECT_EQ(make_manifold("moons", 10, 0.0, rng).dim(), 2u);
}

TEST(Manifold, ConcatShapes) {
  Rng rng(6);
  const std::vector<EmpiricalDistribution> parts{make_manifold(ManifoldKind::SwissRoll, 100, 0.1, rng),
                                                 make_manifold(ManifoldKind::Moons, 100, 0.1, rng)};
  EXPECT_EQ(concat_manifolds(parts).samples.shape(), (Shape{100, 5}));
  EXPECT_EQ(concat_manifolds(std::span(parts).first(1)).samples, parts[0].samples);
  EXPECT_EQ(concat_manifolds(parts, 2, &rng).dim(), 7u);
  const std::vector<EmpiricalDistribution> uneven{parts[0], make_manifold(ManifoldKind::Moons, 99, 0.0, rng)};
  EXPECT_THROW(concat_manifolds(uneven), ContractViolation);
}

TEST(Csv, NormalizeHandExample) {
  const auto d = parse("1\n2\n3\n", true);
  const double z = std::sqrt(1.5);  // 1 / sqrt(2/3)
  EXPECT_NEAR(d.samples[0], -z, 1e-12);
  EXPECT_NEAR(d.samples[1], 0.0, 1e-12);
  EXPECT_NEAR(d.samples[2], z, 1e-12);
  ASSERT_TRUE(d.normalization.has_value());
  EXPECT_DOUBLE_EQ(d.normalization->shift[0], 2.0);
  EXPECT_NEAR(d.normalization->scale[0], std::sqrt(2.0 / 3.0), 1e-15);
}

TEST(Csv, HeaderSkippedAndRaggedRowsReported) {
  const auto d = parse("x,y\n1,2\n3,4\n");
  EXPECT_EQ(d.samples, (Matrix{{1, 2}, {3, 4}}));
  EXPECT_FALSE(d.normalization.has_value());
  EXPECT_EQ(parse_error_line("1,2\n3\n"), 2u);
  EXPECT_EQ(parse_error_line("a,b\n1,2\n3,x\n"), 3u);
  EXPECT_EQ(parse_error_line("1,2\n3,4\n5,6,7\n"), 3u);
}

TEST(Csv, EmptyInputIsParseError) {
  EXPECT_THROW(parse(""), ParseError);
  EXPECT_THROW(parse("x,y\n"), ParseError);
  EXPECT_THROW(load_csv("/nonexistent/samples.csv", false), std::exception);
}

TEST(Csv, WriteThenLoadRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "bridgekit_dataset_roundtrip.csv";
  const Matrix m{{0.125, -3.5}, {1e-7, 42.0}};
  write_csv(path.string(), m, {"a", "b"});
  EXPECT_EQ(load_csv(path.string(), false).samples, m);
  std::filesystem::remove(path);
}

TEST(Empirical, SamplerDrawsStoredRows) {
  Rng rng(7);
  const auto s = empirical_sampler({Matrix{{1.0, 10.0}, {2.0, 20.0}}, std::nullopt});
  const Matrix draws = s(100, rng);
  for (std::size_t r = 0; r < 100; ++r) EXPECT_DOUBLE_EQ(draws(r, 1), 10.0 * draws(r, 0));
  EXPECT_THROW(empirical_sampler({Matrix{{std::nan("")}}, std::nullopt}), ContractViolation);
}

class DatasetProperty : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(DatasetProperty, NormalizationRoundTrip) {
  Rng rng(GetParam());
  Matrix x(50, 4);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1e3, 1e3) * (1 + i % 4);
  const EmpiricalDistribution d{x, std::nullopt};
  const auto n = d.normalized();
  const Matrix back = n.denormalized();
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back[i], x[i], 1e-10 * std::max(1.0, std::abs(x[i])));
  const auto std_ = column_std(n.samples);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(std_[c], 1.0, 1e-12);
}

TEST_P(DatasetProperty, GeneratorsAreSeedDeterministic) {
  for (auto kind : {ManifoldKind::SwissRoll, ManifoldKind::SCurve, ManifoldKind::Moons}) {
    Rng a(GetParam()), b(GetParam());
    EXPECT_EQ(make_manifold(kind, 64, 0.1, a).samples, make_manifold(kind, 64, 0.1, b).samples);
  }
  Rng a(GetParam()), b(GetParam());
  const auto spec = GmmSpec::random_means(3, 2, GetParam());
  EXPECT_EQ(sample_gmm(spec, 64, a).samples, sample_gmm(spec, 64, b).samples);
}

TEST_P(DatasetProperty, MoonsClassBalance) {
  Rng rng(GetParam());
  for (std::size_t n : {1u, 2u, 7u, 100u, 101u}) {
    std::vector<int> labels;
    make_manifold(ManifoldKind::Moons, n, 0.0, rng, &labels);
    const auto ones = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    EXPECT_EQ(n - ones, n / 2);
    EXPECT_EQ(ones, (n + 1) / 2);
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, DatasetProperty, ::testing::ValuesIn(bridgekit::test::kPropertySeeds));
