// SPDX-License-Identifier: Apache-2.0
// bridgekit: run, sweep and post-process Schrodinger bridge experiments.

#include <cstdio>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "bridgekit/app/config.hpp"
#include "bridgekit/app/experiment.hpp"
#include "bridgekit/app/plotdata.hpp"
#include "bridgekit/app/sweep.hpp"
#include "bridgekit/version.hpp"

namespace {

using namespace bridgekit::app;

int report(const ErrorInfo& info) {
  std::cerr << info.to_json().dump() << std::endl;
  return info.code;
}

void print_record(const bridgekit::HalfBridgeRecord& r) {
  std::printf("iter %zu %-8s loss %.6g  w1 fwd %.4f  bwd %.4f  (%.1fs)\n", r.ipf_iter, bridgekit::to_string(r.trained),
              r.stats.final_loss.total, r.w1_forward_end, r.w1_backward_end, r.wall_time_s);
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Schrodinger bridge experiments with learned drifts"};
  app.set_version_flag("--version", bridgekit::kVersion);
  app.require_subcommand(1);

  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  bool quiet = false;
  app.add_option("--threads", threads, "worker threads for trajectory simulation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("-q,--quiet", quiet, "no per-half-bridge progress on stdout");

  std::string config_path, grid, run_dir, out_dir;
  auto* run = app.add_subcommand("run", "run one experiment");
  run->add_option("config", config_path, "experiment config (JSON)")->required();
  run->add_option("-o,--output", out_dir, "override output.dir");

  auto* sweep = app.add_subcommand("sweep", "run the cartesian product of a parameter grid");
  sweep->add_option("config", config_path, "base experiment config (JSON)")->required();
  sweep->add_option("--grid", grid, "e.g. \"ipf.n_x=32,128,512;ipf.seed=0,1,2\"")->required();
  sweep->add_option("-o,--output", out_dir, "override output.dir");

  auto* plot = app.add_subcommand("plotdata", "write tidy CSVs for plotting from a run directory");
  plot->add_option("rundir", run_dir, "directory written by `run`")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report({kExitConfig, "usage", e.what()});
  }

  RunOptions opt;
  opt.threads = threads;
  if (!quiet) opt.on_record = print_record;

  try {
    if (*run) {
      Json j = Json::parse(read_text_file(config_path));
      if (!out_dir.empty()) set_path(j, "output.dir", out_dir);
      const auto result = run_experiment(parse_config(j), opt);
      if (!quiet) std::printf("wrote %s\n", (result.dir / kMetricsFile).string().c_str());
      return kExitOk;
    }
    if (*sweep) {
      Json j = Json::parse(read_text_file(config_path));
      if (!out_dir.empty()) set_path(j, "output.dir", out_dir);
      const auto outcome = run_sweep(j, parse_grid(grid), opt, &std::cerr);
      return outcome.failed ? outcome.first_error.code : kExitOk;
    }
    emit_plot_data(run_dir);
    return kExitOk;
  } catch (const nlohmann::json::parse_error& e) {
    return report({kExitConfig, "config", std::string("config is not valid JSON: ") + e.what()});
  } catch (const std::exception& e) {
    return report(classify(e));
  }
}
