// SPDX-License-Identifier: Apache-2.0
#pragma once

// Exact Wasserstein-1 between equal-size empirical measures under the
// Euclidean ground metric.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "bridgekit/core/errors.hpp"
#include "bridgekit/core/matrix.hpp"

namespace bridgekit {

inline constexpr std::size_t kMaxAssignmentSize = 2048;

// Sorted matching is the optimal coupling on the line.
inline double w1_1d(std::span<const double> a, std::span<const double> b) {
  detail::require(a.size() == b.size(), "w1_1d: sample counts differ (" + std::to_string(a.size()) + " vs " +
                                            std::to_string(b.size()) + ")");
  detail::require(!a.empty(), "w1_1d: empty samples");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double s = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) s += std::abs(sa[i] - sb[i]);
  return s / static_cast<double>(sa.size());
}

// Pairwise Euclidean distances, n_a x n_b.
inline Matrix cost_matrix(const Matrix& a, const Matrix& b) {
  detail::require(a.cols() == b.cols(), "cost_matrix: dimension mismatch");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto bj = b.row(j);
      double s = 0.0;
      for (std::size_t d = 0; d < ai.size(); ++d) {
        const double t = ai[d] - bj[d];
        s += t * t;
      }
      c(i, j) = std::sqrt(s);
    }
  }
  return c;
}

// Min-cost perfect matching on a square cost matrix (Hungarian method with
// shortest augmenting paths and dual potentials, O(n^3)). Returns row -> column.
inline std::vector<std::size_t> solve_assignment(const Matrix& cost) {
  detail::require(cost.rows() == cost.cols(), "solve_assignment: cost matrix must be square");
  const std::size_t n = cost.rows();
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based with a virtual column 0, following the classical formulation.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

inline double w1_assignment(const Matrix& a, const Matrix& b) {
  detail::require(a.cols() == b.cols(), "w1_assignment: dimension mismatch (" + std::to_string(a.cols()) +
                                            " vs " + std::to_string(b.cols()) + ")");
  detail::require(a.rows() == b.rows(), "w1_assignment: sample counts differ");
  detail::require(a.rows() >= 1, "w1_assignment: empty samples");
  detail::require(a.rows() <= kMaxAssignmentSize, "w1_assignment: n = " + std::to_string(a.rows()) +
                                                      " exceeds the assignment limit of 2048");
  const Matrix c = cost_matrix(a, b);
  const auto match = solve_assignment(c);
  double s = 0.0;
  for (std::size_t i = 0; i < match.size(); ++i) s += c(i, match[i]);
  return s / static_cast<double>(a.rows());
}

// Sorted method in one dimension, assignment otherwise.
inline double w1(const Matrix& a, const Matrix& b) {
  detail::require(a.cols() == b.cols(), "w1: dimension mismatch");
  if (a.cols() == 1) return w1_1d(a.storage(), b.storage());
  return w1_assignment(a, b);
}

}  // namespace bridgekit
