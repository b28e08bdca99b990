// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "bridgekit/core/errors.hpp"
#include "bridgekit/core/matrix.hpp"
#include "bridgekit/core/rng.hpp"
#include "bridgekit/sde/simulate.hpp"

namespace bridgekit {

// (x, clock) pairs drawn from buffered paths.
struct Minibatch {
  Matrix x;
  std::vector<double> clock;
};

// Bounded FIFO of single trajectories of one process; oldest evicted first.
class TrajectoryBuffer {
 public:
  explicit TrajectoryBuffer(std::size_t capacity = 512) : capacity_(capacity) {
    detail::require(capacity >= 1, "TrajectoryBuffer: capacity must be >= 1");
  }

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  const TimeGrid& grid() const noexcept { return grid_; }

  // Sequence number (0-based over all pushes) of entries()[0].
  std::uint64_t first_index() const noexcept { return pushed_ - entries_.size(); }
  std::uint64_t total_pushed() const noexcept { return pushed_; }
  const std::deque<Matrix>& entries() const noexcept { return entries_; }

  void push(const TrajectoryBatch& batch) {
    if (batch.paths.empty()) return;
    if (entries_.empty() && pushed_ == 0) {
      dim_ = batch.dim();
      grid_ = batch.grid;
    }
    detail::require(batch.dim() == dim_, "TrajectoryBuffer: batch dimension " + std::to_string(batch.dim()) +
                                             " does not match buffer dimension " + std::to_string(dim_));
    detail::require(batch.grid.n_steps == grid_.n_steps, "TrajectoryBuffer: time grid mismatch");
    for (const auto& p : batch.paths) {
      entries_.push_back(p);
      ++pushed_;
      if (entries_.size() > capacity_) entries_.pop_front();
    }
  }

  void clear() { entries_.clear(); }

  // Uniform over buffered trajectories and over left-endpoint grid indices 0..N_t-1.
  Minibatch sample(std::size_t n, Rng& rng) const {
    detail::require(!entries_.empty(), "TrajectoryBuffer: cannot sample from an empty buffer");
    Minibatch mb{Matrix(n, dim_), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
      const auto& path = entries_[rng.below(entries_.size())];
      const std::size_t k = rng.below(grid_.n_steps);
      auto src = path.row(k);
      std::copy(src.begin(), src.end(), mb.x.row(i).begin());
      mb.clock[i] = grid_.clock(k);
    }
    return mb;
  }

 private:
  std::size_t capacity_;
  std::size_t dim_ = 0;
  TimeGrid grid_;
  std::deque<Matrix> entries_;
  std::uint64_t pushed_ = 0;
};

inline void buffer_push(TrajectoryBuffer& buf, const TrajectoryBatch& batch) { buf.push(batch); }

}  // namespace bridgekit
