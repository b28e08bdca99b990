// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>

#include "bridgekit/core/errors.hpp"
#include "bridgekit/sde/simulate.hpp"

namespace bridgekit {

// CSV columns traj_id,step,t,x_1..x_D. `t` is on the forward (reference)
// axis for both directions so the two files share a time axis.
inline void write_trajectory_csv(std::ostream& os, const TrajectoryBatch& batch) {
  os << "traj_id,step,t";
  for (std::size_t d = 0; d < batch.dim(); ++d) os << ",x_" << d + 1;
  os << '\n';
  char buf[32];
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Matrix& p = batch.paths[i];
    for (std::size_t k = 0; k < p.rows(); ++k) {
      std::snprintf(buf, sizeof buf, "%.10g", batch.grid.reference_time(k));
      os << i << ',' << k << ',' << buf;
      for (double v : p.row(k)) {
        std::snprintf(buf, sizeof buf, "%.10g", v);
        os << ',' << buf;
      }
      os << '\n';
    }
  }
}

inline void write_trajectory_csv(const std::string& path, const TrajectoryBatch& batch) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write '" + path + "'");
  write_trajectory_csv(os, batch);
}

}  // namespace bridgekit
