// SPDX-License-Identifier: Apache-2.0
#pragma once

// Jacobian-trace backends. Each returns a (batch x 1) node holding one trace
// value per row of the input, differentiable w.r.t. parameters on the tape.

#include <optional>
#include <string>

#include "bridgekit/ad/tape.hpp"
#include "bridgekit/core/errors.hpp"
#include "bridgekit/core/rng.hpp"

namespace bridgekit {

struct TraceEstimator {
  enum class Kind { ExactDiagonal, Hutchinson, Stein };

  Kind kind = Kind::ExactDiagonal;
  std::size_t probes = 1;
  std::optional<double> sigma_z;

  static TraceEstimator exact() { return {Kind::ExactDiagonal, 1, std::nullopt}; }
  static TraceEstimator hutchinson(std::size_t probes = 1) { return {Kind::Hutchinson, probes, std::nullopt}; }
  static TraceEstimator stein(std::optional<double> sigma_z) { return {Kind::Stein, 1, sigma_z}; }

  // Exact diagonal up to D = 8, single-probe Hutchinson above.
  static TraceEstimator default_for(std::size_t dim) { return dim <= 8 ? exact() : hutchinson(1); }

  void validate() const {
    if (kind == Kind::Hutchinson && probes < 1) throw ConfigError("Hutchinson estimator needs probes >= 1");
    if (kind == Kind::Stein) {
      if (!sigma_z) throw ConfigError("Stein estimator requires sigma_z");
      if (!(*sigma_z > 0.0)) throw ConfigError("Stein estimator requires sigma_z > 0");
    }
  }
};

inline const char* to_string(TraceEstimator::Kind k) {
  switch (k) {
    case TraceEstimator::Kind::ExactDiagonal: return "exact";
    case TraceEstimator::Kind::Hutchinson: return "hutchinson";
    case TraceEstimator::Kind::Stein: return "stein";
  }
  return "?";
}

inline constexpr std::size_t kExactTraceMaxDim = 64;

// sum_d (J e_d)_d via one forward-mode pass per output dimension. `y = f(x)`
// must already be recorded.
inline ad::Var trace_exact(ad::Tape& tape, ad::Var x, ad::Var y) {
  const Shape xs = tape.shape(x.id);
  detail::require(tape.shape(y.id) == xs, "trace_exact: f must map R^D to R^D");
  detail::require(xs.cols <= kExactTraceMaxDim, "trace_exact: dimension above the exact-trace limit of 64");
  ad::Var acc;
  for (std::size_t d = 0; d < xs.cols; ++d) {
    Matrix e(xs);
    for (std::size_t r = 0; r < xs.rows; ++r) e(r, d) = 1.0;
    ad::Var diag = ad::gather_col(ad::jvp(tape, x, e, y).tangent(y), d);
    acc = d == 0 ? diag : acc + diag;
  }
  return acc;
}

// Mean over probes of z^T (J z), z i.i.d. Rademacher, fresh per row and probe.
inline ad::Var trace_hutchinson(ad::Tape& tape, ad::Var x, ad::Var y, Rng& rng, std::size_t probes) {
  const Shape xs = tape.shape(x.id);
  detail::require(tape.shape(y.id) == xs, "trace_hutchinson: f must map R^D to R^D");
  detail::require(probes >= 1, "trace_hutchinson: probes must be >= 1");
  ad::Var acc;
  for (std::size_t p = 0; p < probes; ++p) {
    Matrix z(xs);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = rng.rademacher();
    ad::Var jz = ad::jvp(tape, x, z, y).tangent(y);
    ad::Var est = ad::row_sum(jz * tape.constant(std::move(z)));
    acc = p == 0 ? est : acc + est;
  }
  return probes == 1 ? acc : ad::affine(acc, 1.0 / static_cast<double>(probes), 0.0);
}

// Same estimator with caller-provided probe vectors (one row per input row).
inline ad::Var trace_hutchinson_with(ad::Tape& tape, ad::Var x, ad::Var y, const Matrix& z) {
  ad::Var jz = ad::jvp(tape, x, z, y).tangent(y);
  return ad::row_sum(jz * tape.constant(z));
}

// f(x + z)^T z / sigma_z^2 for the given perturbations z; `f` records
// itself on the tape: f(Tape&, Var input) -> Var.
template <typename F>
ad::Var stein_term(ad::Tape& tape, F&& f, const Matrix& x, const Matrix& z, double sigma_z) {
  detail::require(x.shape() == z.shape(), "stein_term: perturbation shape mismatch");
  detail::require(sigma_z > 0.0, "stein_term: sigma_z must be positive");
  Matrix xz = x;
  for (std::size_t i = 0; i < xz.size(); ++i) xz[i] += z[i];
  ad::Var fz = f(tape, tape.input(std::move(xz)));
  return ad::affine(ad::row_sum(fz * tape.constant(z)), 1.0 / (sigma_z * sigma_z), 0.0);
}

// One z ~ N(0, sigma_z^2 I) per row. Needs only forward evaluations of f.
template <typename F>
ad::Var trace_stein(ad::Tape& tape, F&& f, const Matrix& x, Rng& rng, double sigma_z) {
  detail::require(sigma_z > 0.0, "trace_stein: sigma_z must be positive");
  Matrix z(x.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = sigma_z * rng.normal();
  return stein_term(tape, std::forward<F>(f), x, z, sigma_z);
}

}  // namespace bridgekit
