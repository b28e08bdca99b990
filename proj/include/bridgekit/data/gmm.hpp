// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "bridgekit/core/errors.hpp"
#include "bridgekit/core/rng.hpp"
#include "bridgekit/data/empirical.hpp"
#include "bridgekit/sde/simulate.hpp"

namespace bridgekit {

struct GmmSpec {
  struct Mode {
    std::vector<double> mean;
    double std = 1.0;
  };
  std::vector<Mode> modes;
  std::vector<double> weights;

  std::size_t dim() const { return modes.empty() ? 0 : modes.front().mean.size(); }

  void validate() const {
    detail::require(!modes.empty(), "GmmSpec: no modes");
    detail::require(weights.size() == modes.size(), "GmmSpec: one weight per mode required");
    const std::size_t d = dim();
    detail::require(d >= 1, "GmmSpec: zero-dimensional mode");
    for (const auto& m : modes) {
      detail::require(m.mean.size() == d, "GmmSpec: modes disagree on dimension");
      detail::require(m.std > 0.0, "GmmSpec: std must be > 0");
    }
    for (double w : weights) detail::require(w >= 0.0, "GmmSpec: negative weight");
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    detail::require(std::abs(total - 1.0) <= 1e-12, "GmmSpec: weights must sum to 1");
  }

  static GmmSpec standard_normal(std::size_t dim) { return {{{std::vector<double>(dim, 0.0), 1.0}}, {1.0}}; }

  // Equal-weight modes with every mean coordinate ~ U(lo, hi).
  static GmmSpec random_means(std::size_t n_modes, std::size_t dim, std::uint64_t seed, double std = 1.0,
                              double lo = -2.5, double hi = 2.5) {
    Rng rng(seed);
    GmmSpec s;
    for (std::size_t k = 0; k < n_modes; ++k) {
      Mode m{std::vector<double>(dim), std};
      for (auto& v : m.mean) v = rng.uniform(lo, hi);
      s.modes.push_back(std::move(m));
    }
    s.weights.assign(n_modes, 1.0 / static_cast<double>(n_modes));
    return s;
  }
};

namespace gmm_detail {
inline std::size_t pick_mode(const GmmSpec& spec, Rng& rng) {
  const double u = rng.uniform();
  double c = 0.0;
  for (std::size_t k = 0; k < spec.weights.size(); ++k) {
    c += spec.weights[k];
    if (u < c) return k;
  }
  // u landed in rounding slack above the cumulative sum: take the last mode with mass.
  for (std::size_t k = spec.weights.size(); k-- > 0;)
    if (spec.weights[k] > 0.0) return k;
  return 0;
}
}  // namespace gmm_detail

inline Matrix sample_gmm_matrix(const GmmSpec& spec, std::size_t n, Rng& rng) {
  Matrix out(n, spec.dim());
  for (std::size_t r = 0; r < n; ++r) {
    const auto& m = spec.modes[gmm_detail::pick_mode(spec, rng)];
    for (std::size_t c = 0; c < m.mean.size(); ++c) out(r, c) = m.mean[c] + m.std * rng.normal();
  }
  return out;
}

inline EmpiricalDistribution sample_gmm(const GmmSpec& spec, std::size_t n, Rng& rng) {
  spec.validate();
  detail::require(n >= 1, "sample_gmm: n must be >= 1");
  return {sample_gmm_matrix(spec, n, rng), std::nullopt};
}

inline Sampler gmm_sampler(GmmSpec spec) {
  spec.validate();
  const std::size_t d = spec.dim();
  return {d, [spec = std::move(spec)](std::size_t n, Rng& rng) { return sample_gmm_matrix(spec, n, rng); }};
}

}  // namespace bridgekit
