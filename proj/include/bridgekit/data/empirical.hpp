// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "bridgekit/core/errors.hpp"
#include "bridgekit/core/matrix.hpp"
#include "bridgekit/core/rng.hpp"
#include "bridgekit/sde/simulate.hpp"

namespace bridgekit {

// Per-dimension affine map z = (x - shift) / scale.
struct Normalization {
  std::vector<double> shift;
  std::vector<double> scale;

  Matrix apply(const Matrix& x) const {
    check(x);
    Matrix out = x;
    for (std::size_t r = 0; r < out.rows(); ++r)
      for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = (out(r, c) - shift[c]) / scale[c];
    return out;
  }
  Matrix invert(const Matrix& z) const {
    check(z);
    Matrix out = z;
    for (std::size_t r = 0; r < out.rows(); ++r)
      for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = out(r, c) * scale[c] + shift[c];
    return out;
  }

  // Zero mean, unit population std per column. Constant columns keep scale 1.
  static Normalization fit(const Matrix& x) {
    Normalization n{column_mean(x), column_std(x)};
    for (auto& s : n.scale)
      if (!(s > 0.0)) s = 1.0;
    return n;
  }

 private:
  void check(const Matrix& x) const {
    detail::require(x.cols() == shift.size() && x.cols() == scale.size(), "Normalization: dimension mismatch");
  }
};

// n x D sample matrix standing in for a density.
struct EmpiricalDistribution {
  Matrix samples;
  std::optional<Normalization> normalization;  // set when `samples` are normalized

  std::size_t size() const { return samples.rows(); }
  std::size_t dim() const { return samples.cols(); }

  void validate() const {
    detail::require(samples.rows() >= 1, "EmpiricalDistribution: needs at least one sample");
    detail::require(samples.all_finite(), "EmpiricalDistribution: non-finite sample");
    if (normalization)
      for (double s : normalization->scale) detail::require(s > 0.0, "EmpiricalDistribution: scale must be > 0");
  }

  EmpiricalDistribution normalized() const {
    auto n = Normalization::fit(samples);
    return {n.apply(samples), n};
  }

  // Samples mapped back to the original units.
  Matrix denormalized() const { return normalization ? normalization->invert(samples) : samples; }
};

// Draws rows uniformly with replacement.
inline Sampler empirical_sampler(EmpiricalDistribution dist) {
  dist.validate();
  const std::size_t d = dist.dim();
  return {d, [m = std::move(dist.samples)](std::size_t n, Rng& rng) {
            Matrix out(n, m.cols());
            for (std::size_t r = 0; r < n; ++r) {
              auto src = m.row(rng.below(m.rows()));
              std::copy(src.begin(), src.end(), out.row(r).begin());
            }
            return out;
          }};
}

// Draws min(a, b) rows from each without replacement so counts match.
inline std::pair<Matrix, Matrix> match_counts(const Matrix& a, const Matrix& b, std::uint64_t seed) {
  const std::size_t n = std::min(a.rows(), b.rows());
  Rng rng(seed);
  auto pick = [&](const Matrix& m) {
    if (m.rows() == n) return m;
    std::vector<std::size_t> idx(m.rows());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    idx.resize(n);
    return take_rows(m, idx);
  };
  return {pick(a), pick(b)};
}

}  // namespace bridgekit
