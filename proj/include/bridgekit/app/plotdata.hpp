// SPDX-License-Identifier: Apache-2.0
#pragma once

// Tidy CSVs from a finished run directory.
//
//   plotdata.csv  series,t,dim,value   series in {forward,backward}_{mean,std},
//                                      one row per dimension at each time
//   w1.csv        ipf_iter,direction,w1_forward_end,w1_backward_end

#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "bridgekit/app/experiment.hpp"
#include "bridgekit/data/csv.hpp"

namespace bridgekit::app {

inline constexpr const char* kPlotDataFile = "plotdata.csv";
inline constexpr const char* kW1File = "w1.csv";

namespace plot_detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Mean and std over trajectories at every step of a trajectory CSV.
inline void append_series(std::ostringstream& os, const std::string& direction, const std::string& path) {
  const Matrix m = load_csv(path, false).samples;
  if (m.cols() < 4) throw ParseError("'" + path + "' has no state columns");
  const std::size_t dim = m.cols() - 3;
  struct Acc {
    double t = 0.0;
    std::size_t n = 0;
    std::vector<double> sum, sq;
  };
  std::map<std::size_t, Acc> by_step;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double step = m(r, 1);
    if (step < 0 || step != std::floor(step)) throw ParseError("'" + path + "': bad step value", r + 2);
    Acc& a = by_step[static_cast<std::size_t>(step)];
    if (a.n == 0) {
      a.t = m(r, 2);
      a.sum.assign(dim, 0.0);
      a.sq.assign(dim, 0.0);
    }
    ++a.n;
    for (std::size_t d = 0; d < dim; ++d) {
      a.sum[d] += m(r, 3 + d);
      a.sq[d] += m(r, 3 + d) * m(r, 3 + d);
    }
  }
  std::vector<std::pair<double, std::vector<double>>> means, stds;
  for (const auto& [step, a] : by_step) {
    std::vector<double> mu(dim), sd(dim);
    const double n = static_cast<double>(a.n);
    for (std::size_t d = 0; d < dim; ++d) {
      mu[d] = a.sum[d] / n;
      sd[d] = std::sqrt(std::max(0.0, a.sq[d] / n - mu[d] * mu[d]));
    }
    means.emplace_back(a.t, std::move(mu));
    stds.emplace_back(a.t, std::move(sd));
  }
  for (const auto& [suffix, rows] : {std::pair{"_mean", &means}, std::pair{"_std", &stds}})
    for (const auto& [t, v] : *rows)
      for (std::size_t d = 0; d < dim; ++d)
        os << direction << suffix << ',' << fmt(t) << ',' << d + 1 << ',' << fmt(v[d]) << '\n';
}

}  // namespace plot_detail

// Writes plotdata.csv and w1.csv into `run_dir`. Output depends only on the
// input files.
inline void emit_plot_data(const std::filesystem::path& run_dir) {
  namespace fs = std::filesystem;
  const std::vector<std::string> expected{kMetricsFile, kForwardTrajFile, kBackwardTrajFile};
  std::string missing;
  for (const auto& f : expected)
    if (!fs::is_regular_file(run_dir / f)) missing += (missing.empty() ? "" : ", ") + (run_dir / f).string();
  if (!missing.empty()) throw IoError("missing run artifacts: " + missing);

  Json metrics;
  try {
    metrics = Json::parse(read_text_file((run_dir / kMetricsFile).string()));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("metrics.json: ") + e.what());
  }
  if (!metrics.contains("records") || !metrics.at("records").is_array())
    throw ParseError("metrics.json: no records array");

  std::ostringstream w1;
  w1 << "ipf_iter,direction,w1_forward_end,w1_backward_end\n";
  try {
    for (const auto& r : metrics.at("records"))
      w1 << r.at("ipf_iter").get<std::size_t>() << ',' << r.at("direction").get<std::string>() << ','
         << plot_detail::fmt(r.at("w1_forward_end").get<double>()) << ','
         << plot_detail::fmt(r.at("w1_backward_end").get<double>()) << '\n';
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("metrics.json: malformed record: ") + e.what());
  }

  std::ostringstream plot;
  plot << "series,t,dim,value\n";
  plot_detail::append_series(plot, "forward", (run_dir / kForwardTrajFile).string());
  plot_detail::append_series(plot, "backward", (run_dir / kBackwardTrajFile).string());

  write_text_file(run_dir / kPlotDataFile, plot.str());
  write_text_file(run_dir / kW1File, w1.str());
}

}  // namespace bridgekit::app
