// SPDX-License-Identifier: Apache-2.0
#pragma once

// Iterative proportional fitting with learned drifts.
//
// Two networks: the forward drift runs pi0 -> pi1 on clock t, the backward
// drift runs pi1 -> pi0 on clock tau = 1 - t. A half-bridge freezes one of
// them, fills a buffer with its paths, and fits the other with the
// score-matching loss so it becomes the time reversal of the frozen process.
// Iteration i trains the backward drift against the forward one (end
// marginal pi1 fixed), then the forward drift against the new backward one
// (start marginal pi0 fixed).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "bridgekit/ad/tape.hpp"
#include "bridgekit/core/errors.hpp"
#include "bridgekit/core/rng.hpp"
#include "bridgekit/drift/adam.hpp"
#include "bridgekit/drift/network.hpp"
#include "bridgekit/loss/score_loss.hpp"
#include "bridgekit/ot/wasserstein.hpp"
#include "bridgekit/sde/buffer.hpp"
#include "bridgekit/sde/simulate.hpp"

namespace bridgekit {

struct BridgeProblem {
  std::size_t dim = 0;
  Sampler pi0;
  Sampler pi1;
  double sigma = 1.0;
  TimeGrid grid;

  void validate() const {
    detail::require(dim >= 1, "BridgeProblem: dimension must be >= 1");
    detail::require(pi0.dim == dim && pi1.dim == dim, "BridgeProblem: boundary samplers must share dimension D");
    detail::require(sigma >= 0.0 && std::isfinite(sigma), "BridgeProblem: sigma must be finite and >= 0");
    grid.validate();
  }

  TimeGrid grid_for(Direction d) const {
    TimeGrid g = grid;
    g.direction = d;
    return g;
  }
};

struct HalfBridgeConfig {
  std::size_t steps = 1000;
  std::size_t batch_size = 256;
  std::size_t n_paths = 128;       // trajectories per buffer refresh (N_x)
  std::size_t refresh_every = 250; // push n_paths fresh paths every this many steps; 0 = never
  TraceEstimator estimator = TraceEstimator::exact();
  double lr_max = 1e-3;
  double lr_min = 1e-5;
  std::size_t threads = 1;
  std::size_t loss_trace_every = 10;
};

struct HalfBridgeStats {
  std::size_t steps = 0;
  LossBreakdown final_loss;
  std::vector<double> loss_trace;  // total loss every `loss_trace_every` steps
};

namespace ipf_detail {

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  return Rng(seed).split(a).split(b).split(c).next_u64();
}

// Reverse-time pairing: the trainee's left endpoint on its own grid, index
// j in 0..N-1, is the frozen process's state at index N - j.
inline Minibatch sample_reversed(const TrajectoryBuffer& buf, std::size_t n, Rng& rng,
                                 std::vector<double>& trainee_clock) {
  detail::require(!buf.empty(), "run_half_bridge: the frozen process buffer is empty");
  const TimeGrid& g = buf.grid();
  Minibatch mb{Matrix(n, buf.dim()), std::vector<double>(n)};
  trainee_clock.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& path = buf.entries()[rng.below(buf.size())];
    const std::size_t j = rng.below(g.n_steps);
    const std::size_t k = g.n_steps - j;
    auto src = path.row(k);
    std::copy(src.begin(), src.end(), mb.x.row(i).begin());
    mb.clock[i] = g.clock(k);
    trainee_clock[i] = g.clock(j);
  }
  return mb;
}

}  // namespace ipf_detail

// Trains `trainee` as the reversal of `fixed`. `buffer` holds paths of the
// frozen process; when cfg.refresh_every > 0 it is topped up from
// `fixed_start` during training. `fixed` is never modified.
inline HalfBridgeStats run_half_bridge(const DriftNetwork& fixed, DriftNetwork& trainee, const Sampler& fixed_start,
                                       TrajectoryBuffer& buffer, double sigma, const HalfBridgeConfig& cfg,
                                       std::uint64_t seed) {
  detail::require(fixed.dim() == trainee.dim(), "run_half_bridge: networks disagree on dimension");
  detail::require(!buffer.empty(), "run_half_bridge: the frozen process buffer is empty");
  detail::require(buffer.dim() == trainee.dim(), "run_half_bridge: buffer dimension mismatch");
  detail::require(cfg.batch_size >= 1, "run_half_bridge: batch_size must be >= 1");
  cfg.estimator.validate();

  AdamOptions adam;
  adam.schedule = {cfg.lr_max, cfg.lr_min, cfg.steps};
  AdamState opt(trainee.params, adam);
  Rng rng = Rng(seed).split(0);
  HalfBridgeStats stats;
  LossBreakdown last_finite;
  std::vector<double> trainee_clock;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    if (cfg.refresh_every > 0 && step > 0 && step % cfg.refresh_every == 0)
      buffer.push(simulate(fixed, fixed_start, sigma, buffer.grid(), cfg.n_paths,
                           ipf_detail::derive_seed(seed, 1, step), cfg.threads));

    const Minibatch mb = ipf_detail::sample_reversed(buffer, cfg.batch_size, rng, trainee_clock);
    const Matrix mu = drift_evaluate(fixed, mb.x, mb.clock);

    ad::Tape tape;
    const LossResult loss = half_bridge_loss(tape, trainee, mb.x, trainee_clock, mu, sigma, cfg.estimator, rng);
    if (!std::isfinite(loss.values.total))
      throw NumericalError("non-finite loss at step " + std::to_string(step) +
                           "; last finite loss total=" + std::to_string(last_finite.total) +
                           " quad=" + std::to_string(last_finite.quad) + " cross=" +
                           std::to_string(last_finite.cross) + " trace=" + std::to_string(last_finite.trace));
    last_finite = loss.values;
    optimizer_step(trainee.params, ad::backward(tape, loss.total).for_params(trainee.params), opt);

    stats.final_loss = loss.values;
    if (cfg.loss_trace_every > 0 && step % cfg.loss_trace_every == 0) stats.loss_trace.push_back(loss.values.total);
  }
  stats.steps = opt.step();
  return stats;
}

// Reverse-time drift from a drift and the score of its marginal: -mu + sigma^2 * score.
inline std::vector<double> nelson_reverse_drift(std::span<const double> mu, std::span<const double> score,
                                                double sigma) {
  detail::require(mu.size() == score.size(), "nelson_reverse_drift: size mismatch");
  std::vector<double> out(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    detail::require(std::isfinite(mu[i]) && std::isfinite(score[i]), "nelson_reverse_drift: non-finite input");
    out[i] = -mu[i] + sigma * sigma * score[i];
  }
  return out;
}

struct IpfConfig {
  std::size_t iterations = 10;
  HalfBridgeConfig half_bridge;
  std::size_t buffer_capacity = 512;
  std::size_t eval_n = 1024;  // samples per side for the endpoint W1
  Direction first_trained = Direction::Backward;
  std::uint64_t seed = 0;
};

struct HalfBridgeRecord {
  std::size_t ipf_iter = 0;  // 1-based
  Direction trained = Direction::Backward;
  HalfBridgeStats stats;
  double w1_forward_end = 0.0;   // W1(p_fwd at t=1, pi1)
  double w1_backward_end = 0.0;  // W1(pi0, p_bwd at tau=1)
  double wall_time_s = 0.0;
};

struct BridgeSolution {
  DriftNetwork forward_drift;
  DriftNetwork backward_drift;
  std::vector<HalfBridgeRecord> history;
};

// Endpoint W1 of both processes, each against a fresh draw of its target.
inline std::pair<double, double> evaluate_endpoints(const BridgeProblem& problem, const DriftNetwork& fwd,
                                                    const DriftNetwork& bwd, std::size_t n, std::uint64_t seed,
                                                    std::size_t threads = 1) {
  const auto f = simulate(fwd, problem.pi0, problem.sigma, problem.grid_for(Direction::Forward), n,
                          ipf_detail::derive_seed(seed, 1), threads);
  const auto b = simulate(bwd, problem.pi1, problem.sigma, problem.grid_for(Direction::Backward), n,
                          ipf_detail::derive_seed(seed, 2), threads);
  Rng r0(ipf_detail::derive_seed(seed, 3)), r1(ipf_detail::derive_seed(seed, 4));
  const Matrix target1 = problem.pi1(n, r1);
  const Matrix target0 = problem.pi0(n, r0);
  return {w1(f.terminal(), target1), w1(target0, b.terminal())};
}

using RecordSink = std::function<void(const HalfBridgeRecord&)>;

inline BridgeSolution run_ipf(const BridgeProblem& problem, const IpfConfig& cfg, const RecordSink& sink = {}) {
  problem.validate();
  cfg.half_bridge.estimator.validate();
  detail::require(problem.dim == 1 || cfg.eval_n <= kMaxAssignmentSize,
                  "run_ipf: eval_n above the assignment limit for D > 1");
  using ipf_detail::derive_seed;

  // Reference process: zero-output heads, so the first frozen process is a
  // pure Wiener process started from its boundary.
  BridgeSolution sol{build_drift_network(problem.dim, derive_seed(cfg.seed, 10), true),
                     build_drift_network(problem.dim, derive_seed(cfg.seed, 11), true),
                     {}};
  TrajectoryBuffer fwd_buf(cfg.buffer_capacity), bwd_buf(cfg.buffer_capacity);

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    for (int half = 0; half < 2; ++half) {
      const auto clock_start = std::chrono::steady_clock::now();
      const Direction trained =
          (half == 0) == (cfg.first_trained == Direction::Backward) ? Direction::Backward : Direction::Forward;
      const bool train_bwd = trained == Direction::Backward;
      const DriftNetwork& fixed = train_bwd ? sol.forward_drift : sol.backward_drift;
      DriftNetwork& trainee = train_bwd ? sol.backward_drift : sol.forward_drift;
      const Sampler& fixed_start = train_bwd ? problem.pi0 : problem.pi1;
      TrajectoryBuffer& buf = train_bwd ? fwd_buf : bwd_buf;
      const Direction fixed_dir = train_bwd ? Direction::Forward : Direction::Backward;
      const std::uint64_t hb_seed = derive_seed(cfg.seed, 20, it, static_cast<std::uint64_t>(half));

      buf.push(simulate(fixed, fixed_start, problem.sigma, problem.grid_for(fixed_dir), cfg.half_bridge.n_paths,
                        derive_seed(hb_seed, 1), cfg.half_bridge.threads));

      HalfBridgeRecord rec;
      rec.ipf_iter = it;
      rec.trained = trained;
      rec.stats = run_half_bridge(fixed, trainee, fixed_start, buf, problem.sigma, cfg.half_bridge,
                                  derive_seed(hb_seed, 2));
      std::tie(rec.w1_forward_end, rec.w1_backward_end) =
          evaluate_endpoints(problem, sol.forward_drift, sol.backward_drift, cfg.eval_n, derive_seed(hb_seed, 3),
                             cfg.half_bridge.threads);
      rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
      sol.history.push_back(rec);
      if (sink) sink(rec);
    }
  }
  return sol;
}

}  // namespace bridgekit
