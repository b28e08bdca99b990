// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic manifolds with the usual generator conventions:
//
//   swiss_roll  u ~ U(1.5pi, 4.5pi), y ~ U(0, 21)      -> (u cos u, y, u sin u)
//   s_curve     u ~ U(-1.5pi, 1.5pi), y' ~ U(0, 1)     -> (sin u, 2y', sign(u)(cos u - 1))
//   moons       theta ~ U(0, pi); first floor(n/2) rows -> (cos t, sin t),
//               remaining ceil(n/2) rows               -> (1 - cos t, 0.5 - sin t)
//
// plus isotropic N(0, noise_std^2) noise on every coordinate.

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "bridgekit/core/errors.hpp"
#include "bridgekit/core/rng.hpp"
#include "bridgekit/data/empirical.hpp"

namespace bridgekit {

enum class ManifoldKind { SwissRoll, SCurve, Moons };

inline ManifoldKind parse_manifold_kind(const std::string& s) {
  if (s == "swiss_roll") return ManifoldKind::SwissRoll;
  if (s == "s_curve") return ManifoldKind::SCurve;
  if (s == "moons") return ManifoldKind::Moons;
  throw ConfigError("unknown manifold kind: " + s);
}

inline std::size_t manifold_dim(ManifoldKind k) { return k == ManifoldKind::Moons ? 2 : 3; }

// Noise-free point on moon 0 or moon 1 at angle theta.
inline std::array<double, 2> moons_point(int moon, double theta) {
  if (moon == 0) return {std::cos(theta), std::sin(theta)};
  return {1.0 - std::cos(theta), 0.5 - std::sin(theta)};
}

// `labels`, when given, receives the moon index (0 or 1) per row; zeros otherwise.
inline EmpiricalDistribution make_manifold(ManifoldKind kind, std::size_t n, double noise_std, Rng& rng,
                                           std::vector<int>* labels = nullptr) {
  detail::require(n >= 1, "make_manifold: n must be >= 1");
  detail::require(noise_std >= 0.0, "make_manifold: noise_std must be >= 0");
  constexpr double pi = std::numbers::pi;
  Matrix m(n, manifold_dim(kind));
  if (labels) labels->assign(n, 0);
  for (std::size_t r = 0; r < n; ++r) {
    switch (kind) {
      case ManifoldKind::SwissRoll: {
        const double u = rng.uniform(1.5 * pi, 4.5 * pi);
        const double y = rng.uniform(0.0, 21.0);
        m(r, 0) = u * std::cos(u);
        m(r, 1) = y;
        m(r, 2) = u * std::sin(u);
        break;
      }
      case ManifoldKind::SCurve: {
        const double u = rng.uniform(-1.5 * pi, 1.5 * pi);
        const double y = rng.uniform();
        m(r, 0) = std::sin(u);
        m(r, 1) = 2.0 * y;
        m(r, 2) = (u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0)) * (std::cos(u) - 1.0);
        break;
      }
      case ManifoldKind::Moons: {
        const double t = rng.uniform(0.0, pi);
        const int moon = r < n / 2 ? 0 : 1;
        const auto pt = moons_point(moon, t);
        m(r, 0) = pt[0];
        m(r, 1) = pt[1];
        if (labels) (*labels)[r] = moon;
        break;
      }
    }
  }
  if (noise_std > 0.0)
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += noise_std * rng.normal();
  return {std::move(m), std::nullopt};
}

inline EmpiricalDistribution make_manifold(const std::string& kind, std::size_t n, double noise_std, Rng& rng) {
  return make_manifold(parse_manifold_kind(kind), n, noise_std, rng);
}

// Column-wise concatenation, optionally followed by `pad_dims` N(0,1) columns.
inline EmpiricalDistribution concat_manifolds(std::span<const EmpiricalDistribution> parts,
                                              std::size_t pad_dims = 0, Rng* rng = nullptr) {
  detail::require(!parts.empty(), "concat_manifolds: no parts");
  const std::size_t n = parts.front().size();
  std::vector<Matrix> cols;
  for (const auto& p : parts) {
    detail::require(p.size() == n, "concat_manifolds: parts have different sample counts");
    cols.push_back(p.samples);
  }
  if (pad_dims > 0) {
    detail::require(rng != nullptr, "concat_manifolds: padding needs an rng");
    Matrix pad(n, pad_dims);
    for (std::size_t i = 0; i < pad.size(); ++i) pad[i] = rng->normal();
    cols.push_back(std::move(pad));
  }
  return {hconcat(cols), std::nullopt};
}

}  // namespace bridgekit
