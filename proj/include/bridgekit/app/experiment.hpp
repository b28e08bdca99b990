// SPDX-License-Identifier: Apache-2.0
#pragma once

// Config -> problem -> IPF -> metrics.json, trajectory CSVs, checkpoints.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "bridgekit/app/config.hpp"
#include "bridgekit/core/errors.hpp"
#include "bridgekit/data/csv.hpp"
#include "bridgekit/data/empirical.hpp"
#include "bridgekit/data/gmm.hpp"
#include "bridgekit/data/manifold.hpp"
#include "bridgekit/drift/checkpoint.hpp"
#include "bridgekit/ipf/bridge.hpp"
#include "bridgekit/sde/trajectory_io.hpp"
#include "bridgekit/version.hpp"

namespace bridgekit::app {

inline constexpr int kMetricsSchemaVersion = 1;

inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kForwardTrajFile = "trajectories_forward.csv";
inline constexpr const char* kBackwardTrajFile = "trajectories_backward.csv";
inline constexpr const char* kForwardCheckpoint = "checkpoints/forward_drift.txt";
inline constexpr const char* kBackwardCheckpoint = "checkpoints/backward_drift.txt";

// Process exit codes of the CLI.
enum ExitCode : int { kExitOk = 0, kExitInternal = 1, kExitConfig = 2, kExitNumerical = 3, kExitIo = 4 };

struct ErrorInfo {
  int code = kExitInternal;
  std::string kind = "internal";
  std::string message;

  Json to_json() const { return {{"error", kind}, {"message", message}, {"exit_code", code}}; }
};

inline ErrorInfo classify(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return {kExitConfig, "config", e.what()};
  if (dynamic_cast<const ContractViolation*>(&e)) return {kExitConfig, "invalid_argument", e.what()};
  if (dynamic_cast<const SimulationDiverged*>(&e)) return {kExitNumerical, "simulation_diverged", e.what()};
  if (dynamic_cast<const NumericalError*>(&e)) return {kExitNumerical, "numerical", e.what()};
  if (dynamic_cast<const ParseError*>(&e)) return {kExitIo, "parse", e.what()};
  if (dynamic_cast<const IoError*>(&e)) return {kExitIo, "io", e.what()};
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return {kExitIo, "io", e.what()};
  return {kExitInternal, "internal", e.what()};
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  os << text;
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

inline ExperimentConfig load_config(const std::string& path) { return parse_config(read_text_file(path)); }

// Per-dimension standard deviation averaged over dimensions.
inline double mean_column_std(const Matrix& m) {
  const auto s = column_std(m);
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

struct ResolvedExperiment {
  BridgeProblem problem;
  IpfConfig ipf;
};

inline BridgeProblem build_problem(const ExperimentConfig& cfg) {
  BridgeProblem p;
  p.sigma = cfg.sigma();
  p.grid = TimeGrid{cfg.ipf.n_t, cfg.ipf.dt, Direction::Forward};
  switch (cfg.kind) {
    case ProblemKind::GmmBridge:
      p.dim = cfg.gmm.dim;
      p.pi0 = gmm_sampler(cfg.gmm.pi0);
      p.pi1 = gmm_sampler(cfg.gmm.pi1);
      break;
    case ProblemKind::ManifoldBridge: {
      const auto& m = cfg.manifold;
      Rng rng(m.data_seed);
      std::vector<EmpiricalDistribution> parts;
      for (std::size_t k = 0; k < m.manifolds.size(); ++k) {
        Rng part_rng = rng.split(k);
        parts.push_back(make_manifold(m.manifolds[k], m.n_samples, m.noise, part_rng));
      }
      Rng pad_rng = rng.split(m.manifolds.size());
      EmpiricalDistribution data = concat_manifolds(parts, m.pad_dims, &pad_rng);
      if (m.normalize) data = data.normalized();
      p.dim = data.dim();
      p.pi1 = empirical_sampler(std::move(data));
      p.pi0 = isotropic_gaussian(std::vector<double>(p.dim, 0.0), 1.0);
      break;
    }
    case ProblemKind::CsvBridge: {
      EmpiricalDistribution target = load_csv(cfg.csv.pi1_csv, cfg.csv.normalize);
      p.dim = target.dim();
      p.pi1 = empirical_sampler(std::move(target));
      if (cfg.csv.pi0_csv.empty()) {
        p.pi0 = isotropic_gaussian(std::vector<double>(p.dim, 0.0), 1.0);
      } else {
        EmpiricalDistribution source = load_csv(cfg.csv.pi0_csv, cfg.csv.normalize);
        if (source.dim() != p.dim)
          throw ConfigError("problem: pi0_csv has " + std::to_string(source.dim()) + " columns, pi1_csv has " +
                            std::to_string(p.dim));
        p.pi0 = empirical_sampler(std::move(source));
      }
      break;
    }
  }
  p.validate();
  if (p.dim > 1 && cfg.output.eval_n > kMaxAssignmentSize)
    throw ConfigError("output.eval_n must be <= " + std::to_string(kMaxAssignmentSize) + " when D > 1");
  return p;
}

inline TraceEstimator resolve_estimator(const ExperimentConfig& cfg, const BridgeProblem& problem) {
  const auto& e = cfg.ipf.estimator;
  if (e.kind == "auto") return TraceEstimator::default_for(problem.dim);
  if (e.kind == "exact") {
    if (problem.dim > kExactTraceMaxDim)
      throw ConfigError("ipf.estimator.kind exact supports D <= " + std::to_string(kExactTraceMaxDim));
    return TraceEstimator::exact();
  }
  if (e.kind == "hutchinson") return TraceEstimator::hutchinson(e.probes);
  if (e.sigma_z) return TraceEstimator::stein(*e.sigma_z);
  // Pilot draw from both boundaries sets the smoothing scale.
  Rng r0 = Rng(cfg.ipf.seed).split(90), r1 = Rng(cfg.ipf.seed).split(91);
  const double scale = 0.5 * (mean_column_std(problem.pi0(1024, r0)) + mean_column_std(problem.pi1(1024, r1)));
  return TraceEstimator::stein(0.05 * (scale > 0.0 ? scale : 1.0));
}

inline ResolvedExperiment resolve(const ExperimentConfig& cfg, std::size_t threads) {
  ResolvedExperiment r;
  r.problem = build_problem(cfg);
  auto& ipf = r.ipf;
  ipf.iterations = cfg.ipf.iterations;
  ipf.buffer_capacity = cfg.ipf.buffer_capacity;
  ipf.eval_n = cfg.output.eval_n;
  ipf.first_trained = cfg.ipf.first_trained == "forward" ? Direction::Forward : Direction::Backward;
  ipf.seed = cfg.ipf.seed;
  auto& hb = ipf.half_bridge;
  hb.steps = cfg.ipf.steps;
  hb.batch_size = cfg.ipf.batch_size;
  hb.n_paths = cfg.ipf.n_x;
  hb.refresh_every = cfg.ipf.refresh_every;
  hb.estimator = resolve_estimator(cfg, r.problem);
  hb.lr_max = cfg.ipf.lr_max;
  hb.lr_min = cfg.ipf.lr_min;
  hb.threads = std::max<std::size_t>(1, threads);
  return r;
}

// W1 between two independent draws of the same boundary: the level below
// which endpoint W1 values carry no signal at this sample size.
inline std::pair<double, double> w1_noise_floor(const BridgeProblem& p, std::size_t n, std::uint64_t seed) {
  Rng r(seed);
  Rng a = r.split(0), b = r.split(1), c = r.split(2), d = r.split(3);
  return {w1(p.pi0(n, a), p.pi0(n, b)), w1(p.pi1(n, c), p.pi1(n, d))};
}

inline Json loss_to_json(const LossBreakdown& l) {
  return {{"total", l.total}, {"quad", l.quad}, {"cross", l.cross}, {"trace", l.trace}};
}

inline Json record_to_json(const HalfBridgeRecord& r) {
  return {{"ipf_iter", r.ipf_iter},
          {"direction", to_string(r.trained)},
          {"steps", r.stats.steps},
          {"final_loss", loss_to_json(r.stats.final_loss)},
          {"w1_forward_end", r.w1_forward_end},
          {"w1_backward_end", r.w1_backward_end},
          {"wall_time_s", r.wall_time_s}};
}

// Summary figures derived from the record stream alone.
inline Json summarize_records(const Json& records) {
  Json s{{"half_bridges", records.size()}};
  if (records.empty()) {
    s["final_w1_forward"] = nullptr;
    s["final_w1_backward"] = nullptr;
    s["mean_w1"] = nullptr;
    return s;
  }
  const double f = records.back().at("w1_forward_end").get<double>();
  const double b = records.back().at("w1_backward_end").get<double>();
  s["final_w1_forward"] = f;
  s["final_w1_backward"] = b;
  s["mean_w1"] = 0.5 * (f + b);
  return s;
}

inline Json versions_json() {
  return {{"bridgekit", kVersion}, {"metrics_schema", kMetricsSchemaVersion}, {"json", "nlohmann " +
          std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
          std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

struct RunOptions {
  std::size_t threads = 1;
  // Called after each half-bridge; for progress output.
  std::function<void(const HalfBridgeRecord&)> on_record;
};

struct RunResult {
  Json metrics;
  std::filesystem::path dir;
};

namespace experiment_detail {

inline Json metrics_document(const std::string& status, const Json& records, const Json& echo,
                             const Json& resolved) {
  Json summary = summarize_records(records);
  summary["config_echo"] = echo;
  summary["resolved"] = resolved;
  summary["versions"] = versions_json();
  return {{"schema_version", kMetricsSchemaVersion}, {"status", status}, {"records", records}, {"summary", summary}};
}

inline void write_metrics(const std::filesystem::path& dir, const Json& doc) {
  write_text_file(dir / kMetricsFile, doc.dump(2) + "\n");
}

}  // namespace experiment_detail

// Runs one experiment into cfg.output.dir. On failure a partial
// metrics.json (status "failed", with the error record) is left behind and
// the exception is rethrown.
inline RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  namespace fs = std::filesystem;
  using experiment_detail::metrics_document;
  using experiment_detail::write_metrics;

  const fs::path dir(cfg.output.dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");

  const Json echo = to_json(cfg);
  Json records = Json::array();
  Json resolved = Json::object();
  try {
    const ResolvedExperiment rx = resolve(cfg, opt.threads);
    const auto& est = rx.ipf.half_bridge.estimator;
    resolved = {{"dim", rx.problem.dim},
                {"sigma", rx.problem.sigma},
                {"estimator", {{"kind", to_string(est.kind)}, {"probes", est.probes}}}};
    resolved["estimator"]["sigma_z"] = est.sigma_z ? Json(*est.sigma_z) : Json(nullptr);
    const auto [floor0, floor1] =
        w1_noise_floor(rx.problem, cfg.output.eval_n, ipf_detail::derive_seed(cfg.ipf.seed, 40));
    resolved["w1_noise_floor"] = {{"pi0", floor0}, {"pi1", floor1}};

    for (const char* stale : {kForwardTrajFile, kBackwardTrajFile}) fs::remove(dir / stale);
    write_metrics(dir, metrics_document("running", records, echo, resolved));

    const BridgeSolution sol = run_ipf(rx.problem, rx.ipf, [&](const HalfBridgeRecord& r) {
      records.push_back(record_to_json(r));
      write_metrics(dir, metrics_document("running", records, echo, resolved));
      if (opt.on_record) opt.on_record(r);
    });

    if (cfg.output.dump_trajectories && cfg.output.trajectory_count > 0) {
      const std::uint64_t s = ipf_detail::derive_seed(cfg.ipf.seed, 30);
      const auto& pb = rx.problem;
      write_trajectory_csv((dir / kForwardTrajFile).string(),
                           simulate(sol.forward_drift, pb.pi0, pb.sigma, pb.grid_for(Direction::Forward),
                                    cfg.output.trajectory_count, ipf_detail::derive_seed(s, 1), opt.threads));
      write_trajectory_csv((dir / kBackwardTrajFile).string(),
                           simulate(sol.backward_drift, pb.pi1, pb.sigma, pb.grid_for(Direction::Backward),
                                    cfg.output.trajectory_count, ipf_detail::derive_seed(s, 2), opt.threads));
    }
    if (cfg.output.checkpoints) {
      fs::create_directories(dir / "checkpoints");
      save_checkpoint((dir / kForwardCheckpoint).string(), sol.forward_drift);
      save_checkpoint((dir / kBackwardCheckpoint).string(), sol.backward_drift);
    }

    Json doc = metrics_document("ok", records, echo, resolved);
    write_metrics(dir, doc);
    return {std::move(doc), dir};
  } catch (const std::exception& e) {
    Json doc = metrics_document("failed", records, echo, resolved);
    doc["error"] = classify(e).to_json();
    try {
      write_metrics(dir, doc);
    } catch (const std::exception&) {
      // The original error is the one worth reporting.
    }
    throw;
  }
}

}  // namespace bridgekit::app
