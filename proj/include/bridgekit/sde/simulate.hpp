// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <exception>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "bridgekit/core/errors.hpp"
#include "bridgekit/core/matrix.hpp"
#include "bridgekit/core/rng.hpp"
#include "bridgekit/drift/network.hpp"

namespace bridgekit {

enum class Direction { Forward, Backward };

inline const char* to_string(Direction d) { return d == Direction::Forward ? "forward" : "backward"; }

// N_t Euler steps of physical size dt. Drifts always see the normalized clock
// k / N_t in [0, 1]; for a backward process that clock is tau = 1 - t.
struct TimeGrid {
  std::size_t n_steps = 100;
  double dt = 0.01;
  Direction direction = Direction::Forward;

  double horizon() const { return static_cast<double>(n_steps) * dt; }
  double clock(std::size_t k) const { return static_cast<double>(k) / static_cast<double>(n_steps); }
  // Position of step k on the forward (reference) time axis.
  double reference_time(std::size_t k) const {
    return direction == Direction::Forward ? clock(k) : clock(n_steps - k);
  }
  // Default diffusion rule sigma = 1 / (N_t * dt).
  double default_sigma() const { return 1.0 / horizon(); }

  void validate() const {
    detail::require(n_steps >= 1, "TimeGrid: need at least one step");
    detail::require(dt > 0.0 && std::isfinite(dt), "TimeGrid: dt must be positive");
  }
};

// Draws n points of a boundary distribution.
struct Sampler {
  std::size_t dim = 0;
  std::function<Matrix(std::size_t n, Rng& rng)> draw;

  Matrix operator()(std::size_t n, Rng& rng) const {
    Matrix m = draw(n, rng);
    detail::require(m.rows() == n && m.cols() == dim, "Sampler: returned wrong shape");
    return m;
  }
};

inline Sampler point_mass(std::vector<double> at) {
  const std::size_t d = at.size();
  return {d, [at = std::move(at)](std::size_t n, Rng&) {
            Matrix m(n, at.size());
            for (std::size_t r = 0; r < n; ++r) std::copy(at.begin(), at.end(), m.row(r).begin());
            return m;
          }};
}

inline Sampler isotropic_gaussian(std::vector<double> mean, double stddev) {
  const std::size_t d = mean.size();
  return {d, [mean = std::move(mean), stddev](std::size_t n, Rng& rng) {
            Matrix m(n, mean.size());
            for (std::size_t r = 0; r < n; ++r)
              for (std::size_t c = 0; c < mean.size(); ++c) m(r, c) = mean[c] + stddev * rng.normal();
            return m;
          }};
}

// N_x paths of N_t + 1 states each; paths[i] is (N_t + 1) x D.
struct TrajectoryBatch {
  std::vector<Matrix> paths;
  TimeGrid grid;
  double sigma = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return paths.size(); }
  std::size_t dim() const { return paths.empty() ? 0 : paths.front().cols(); }

  Matrix states_at(std::size_t step) const {
    Matrix m(paths.size(), dim());
    for (std::size_t i = 0; i < paths.size(); ++i) {
      auto src = paths[i].row(step);
      std::copy(src.begin(), src.end(), m.row(i).begin());
    }
    return m;
  }
  Matrix terminal() const { return states_at(grid.n_steps); }
};

inline constexpr double kDivergenceBound = 1e6;

// x + drift * dt + sigma * sqrt(dt) * noise
inline std::vector<double> em_step(std::span<const double> x, std::span<const double> drift, double sigma,
                                   double dt, std::span<const double> noise) {
  detail::require(dt > 0.0, "em_step: dt must be positive");
  detail::require(sigma >= 0.0, "em_step: sigma must be non-negative");
  detail::require(x.size() == drift.size() && x.size() == noise.size(), "em_step: size mismatch");
  const double sq = std::sqrt(dt);
  std::vector<double> out(x.size());
  for (std::size_t d = 0; d < x.size(); ++d) {
    detail::require(std::isfinite(x[d]) && std::isfinite(drift[d]) && std::isfinite(noise[d]),
                    "em_step: non-finite input");
    out[d] = x[d] + drift[d] * dt + sigma * sq * noise[d];
  }
  return out;
}

// Batched drift: rows of `x` at the shared clock value, returns same shape.
using DriftFn = std::function<Matrix(const Matrix& x, double clock)>;

inline DriftFn network_drift(const DriftNetwork& net) {
  return [&net](const Matrix& x, double clock) { return drift_evaluate(net, x, clock); };
}

namespace sde_detail {

inline void simulate_range(const DriftFn& drift, const Sampler& init, double sigma, const TimeGrid& grid,
                           std::uint64_t seed, std::size_t begin, std::size_t end,
                           std::vector<Matrix>& paths) {
  const std::size_t n = end - begin, D = init.dim;
  if (n == 0) return;
  const Rng root(seed);
  std::vector<Rng> noise;
  noise.reserve(n);
  Matrix x(n, D);
  for (std::size_t i = 0; i < n; ++i) {
    const Rng traj = root.split(begin + i);
    Rng start = traj.split(0);
    const Matrix x0 = init(1, start);
    std::copy(x0.row(0).begin(), x0.row(0).end(), x.row(i).begin());
    noise.push_back(traj.split(1));
    paths[begin + i] = Matrix(grid.n_steps + 1, D);
  }
  auto record = [&](std::size_t k) {
    for (std::size_t i = 0; i < n; ++i) {
      auto src = x.row(i);
      for (double v : src)
        if (!std::isfinite(v) || std::abs(v) > kDivergenceBound)
          throw SimulationDiverged("simulation diverged at step " + std::to_string(k) + " of trajectory " +
                                   std::to_string(begin + i) + " (|x| > 1e6 or non-finite)");
      std::copy(src.begin(), src.end(), paths[begin + i].row(k).begin());
    }
  };
  record(0);
  const double sq = sigma * std::sqrt(grid.dt);
  for (std::size_t k = 0; k < grid.n_steps; ++k) {
    const Matrix mu = drift(x, grid.clock(k));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t d = 0; d < D; ++d) x(i, d) += mu(i, d) * grid.dt + sq * noise[i].normal();
    record(k + 1);
  }
}

}  // namespace sde_detail

// Each trajectory i uses its own stream Rng(seed).split(i), so a path depends
// only on (seed, i) and never on n_paths or the thread split.
inline TrajectoryBatch simulate(const DriftFn& drift, const Sampler& init, double sigma, const TimeGrid& grid,
                                std::size_t n_paths, std::uint64_t seed, std::size_t threads = 1) {
  grid.validate();
  detail::require(sigma >= 0.0 && std::isfinite(sigma), "simulate: sigma must be finite and >= 0");
  TrajectoryBatch batch{std::vector<Matrix>(n_paths), grid, sigma, seed};
  threads = std::max<std::size_t>(1, std::min(threads, n_paths / 64 + 1));
  if (threads == 1) {
    sde_detail::simulate_range(drift, init, sigma, grid, seed, 0, n_paths, batch.paths);
    return batch;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n_paths + threads - 1) / threads;
  for (std::size_t w = 0; w < threads; ++w) {
    const std::size_t b = w * chunk, e = std::min(n_paths, b + chunk);
    pool.emplace_back([&, w, b, e] {
      try {
        sde_detail::simulate_range(drift, init, sigma, grid, seed, b, e, batch.paths);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
  return batch;
}

inline TrajectoryBatch simulate(const DriftNetwork& net, const Sampler& init, double sigma, const TimeGrid& grid,
                                std::size_t n_paths, std::uint64_t seed, std::size_t threads = 1) {
  detail::require(net.dim() == init.dim, "simulate: drift dimension " + std::to_string(net.dim()) +
                                             " does not match sampler dimension " + std::to_string(init.dim));
  return simulate(network_drift(net), init, sigma, grid, n_paths, seed, threads);
}

}  // namespace bridgekit
