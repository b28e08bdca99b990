// SPDX-License-Identifier: Apache-2.0
#pragma once

// Score matching against a reference drift. For points x ~ p and a fixed
// drift mu, the per-point cost
//
//   phi^T phi + 2 mu^T phi + 2 sigma^2 Tr[J_phi]
//
// is minimized in expectation by phi = -mu + sigma^2 grad log p, i.e. the
// reverse-time drift, without ever evaluating the score. The estimate here is
// the minibatch mean (normalized by the number of points).

#include <span>

#include "bridgekit/ad/tape.hpp"
#include "bridgekit/core/errors.hpp"
#include "bridgekit/core/matrix.hpp"
#include "bridgekit/core/rng.hpp"
#include "bridgekit/drift/network.hpp"
#include "bridgekit/loss/trace.hpp"

namespace bridgekit {

struct LossBreakdown {
  double total = 0.0;
  double quad = 0.0;   // mean phi^T phi
  double cross = 0.0;  // mean 2 mu^T phi
  double trace = 0.0;  // mean 2 sigma^2 Tr[J_phi]
};

struct LossResult {
  ad::Var total;
  LossBreakdown values;
};

// `f(Tape&, Var x) -> Var` records phi on the tape; `mu` holds the reference
// drift at the same rows of `x` and is treated as a constant.
template <typename F>
LossResult score_matching_loss(ad::Tape& tape, F&& f, const Matrix& x, const Matrix& mu, double sigma,
                               const TraceEstimator& est, Rng& rng) {
  est.validate();
  detail::require(x.rows() >= 1, "score_matching_loss: empty minibatch");
  detail::require(mu.shape() == x.shape(), "score_matching_loss: reference drift shape " + mu.shape().str() +
                                                " does not match points " + x.shape().str());
  const double inv_n = 1.0 / static_cast<double>(x.rows());

  ad::Var xin = tape.input(x);
  ad::Var phi = f(tape, xin);
  detail::require(tape.shape(phi.id) == x.shape(), "score_matching_loss: phi must map R^D to R^D");

  ad::Var trace_col;
  switch (est.kind) {
    case TraceEstimator::Kind::ExactDiagonal: trace_col = trace_exact(tape, xin, phi); break;
    case TraceEstimator::Kind::Hutchinson: trace_col = trace_hutchinson(tape, xin, phi, rng, est.probes); break;
    case TraceEstimator::Kind::Stein: trace_col = trace_stein(tape, f, x, rng, *est.sigma_z); break;
  }

  ad::Var quad = ad::affine(ad::sum(ad::square(phi)), inv_n, 0.0);
  ad::Var cross = ad::affine(ad::sum(tape.constant(mu) * phi), 2.0 * inv_n, 0.0);
  ad::Var trace = ad::affine(ad::sum(trace_col), 2.0 * sigma * sigma * inv_n, 0.0);
  ad::Var total = quad + cross + trace;

  LossBreakdown b;
  b.quad = tape.value(quad)[0];
  b.cross = tape.value(cross)[0];
  b.trace = tape.value(trace)[0];
  b.total = tape.value(total)[0];
  return {total, b};
}

// Loss for a trainee network evaluated on its own clock `t`.
inline LossResult half_bridge_loss(ad::Tape& tape, const DriftNetwork& phi, const Matrix& x,
                                   std::span<const double> t, const Matrix& mu, double sigma,
                                   const TraceEstimator& est, Rng& rng) {
  auto f = [&phi, t](ad::Tape& tp, ad::Var in) { return drift_forward(phi, tp, in, t); };
  return score_matching_loss(tape, f, x, mu, sigma, est, rng);
}

}  // namespace bridgekit
