// SPDX-License-Identifier: Apache-2.0
#pragma once

// Experiment configuration (JSON). Every key is optional except
// problem.kind; unknown keys are rejected. See README for the schema.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "bridgekit/core/errors.hpp"
#include "bridgekit/data/gmm.hpp"
#include "bridgekit/data/manifold.hpp"
#include "bridgekit/loss/trace.hpp"
#include "bridgekit/sde/simulate.hpp"

namespace bridgekit::app {

using Json = nlohmann::ordered_json;

enum class ProblemKind { GmmBridge, ManifoldBridge, CsvBridge };

inline const char* to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::GmmBridge: return "gmm_bridge";
    case ProblemKind::ManifoldBridge: return "manifold_bridge";
    case ProblemKind::CsvBridge: return "csv_bridge";
  }
  return "?";
}

struct GmmParams {
  std::size_t dim = 1;  // inferred from pi1 (else pi0) when omitted
  GmmSpec pi0;  // empty -> standard normal in `dim`
  GmmSpec pi1;  // empty -> modes at -2 and +2 (first coordinate), std 1
};

struct ManifoldParams {
  std::vector<std::string> manifolds{"moons"};
  std::size_t n_samples = 10000;
  double noise = 0.05;
  std::size_t pad_dims = 0;
  bool normalize = true;
  std::uint64_t data_seed = 0;
};

struct CsvParams {
  std::string pi0_csv;  // empty -> standard normal
  std::string pi1_csv;
  bool normalize = true;
};

struct EstimatorConfig {
  std::string kind = "auto";  // auto | exact | hutchinson | stein
  std::size_t probes = 1;
  std::optional<double> sigma_z;  // stein only; unset -> 0.05 * mean per-dimension data std
};

struct IpfSettings {
  std::size_t iterations = 10;
  std::size_t n_x = 128;
  std::size_t steps = 1000;
  std::size_t batch_size = 256;
  std::size_t buffer_capacity = 512;
  std::size_t refresh_every = 250;
  std::size_t n_t = 100;
  double dt = 0.01;
  std::optional<double> sigma;  // unset -> 1 / (n_t * dt)
  double lr_max = 1e-3;
  double lr_min = 1e-5;
  EstimatorConfig estimator;
  std::string first_trained = "backward";
  std::uint64_t seed = 0;
};

struct OutputSettings {
  std::string dir = "run";
  bool dump_trajectories = true;
  std::size_t eval_n = 1024;
  std::size_t trajectory_count = 64;
  bool checkpoints = true;
};

struct ExperimentConfig {
  ProblemKind kind = ProblemKind::GmmBridge;
  GmmParams gmm;
  ManifoldParams manifold;
  CsvParams csv;
  IpfSettings ipf;
  OutputSettings output;

  double sigma() const { return ipf.sigma ? *ipf.sigma : 1.0 / (static_cast<double>(ipf.n_t) * ipf.dt); }
};

namespace config_detail {

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline const char* type_name(const Json& j) {
  if (j.is_null()) return "null";
  if (j.is_boolean()) return "boolean";
  if (j.is_number_integer() || j.is_number_unsigned()) return "integer";
  if (j.is_number()) return "number";
  if (j.is_string()) return "string";
  if (j.is_array()) return "array";
  return "object";
}

[[noreturn]] inline void type_error(const std::string& path, const char* expected, const Json& got) {
  throw ConfigError("type error at " + path + ": expected " + expected + ", got " + type_name(got));
}

// Typed access to one JSON object with unknown-key detection.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) type_error(path_.empty() ? "<root>" : path_, "object", j_);
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const Json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }
  std::string path(const std::string& key) const { return join(path_, key); }

  void read(const std::string& key, std::size_t& out) {
    if (!has(key)) return;
    const Json& v = j_.at(key);
    if (v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0))
      out = v.get<std::size_t>();
    else
      type_error(path(key), "non-negative integer", v);
  }
  void read(const std::string& key, double& out) {
    if (!has(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_number()) type_error(path(key), "number", v);
    out = v.get<double>();
  }
  void read(const std::string& key, std::optional<double>& out) {
    if (!has(key)) return;
    double d = 0.0;
    read(key, d);
    out = d;
  }
  void read(const std::string& key, bool& out) {
    if (!has(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_boolean()) type_error(path(key), "boolean", v);
    out = v.get<bool>();
  }
  void read(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_string()) type_error(path(key), "string", v);
    out = v.get<std::string>();
  }
  void read(const std::string& key, std::vector<double>& out) {
    if (!has(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_array()) type_error(path(key), "array of numbers", v);
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) type_error(path(key) + "[" + std::to_string(i) + "]", "number", v[i]);
      out.push_back(v[i].get<double>());
    }
  }
  void read(const std::string& key, std::vector<std::string>& out) {
    if (!has(key)) return;
    const Json& v = j_.at(key);
    if (!v.is_array()) type_error(path(key), "array of strings", v);
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) type_error(path(key) + "[" + std::to_string(i) + "]", "string", v[i]);
      out.push_back(v[i].get<std::string>());
    }
  }

  void finish() const {
    for (const auto& [k, _] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key: " + join(path_, k));
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline GmmSpec read_gmm(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  GmmSpec spec;
  if (r.has("random_modes")) {
    std::size_t n = 0, dim = 1;
    std::uint64_t seed = 0;
    double std = 1.0;
    r.read("random_modes", n);
    r.read("dim", dim);
    r.read("mode_seed", seed);
    r.read("mode_std", std);
    r.has("modes");
    r.has("weights");
    r.finish();
    if (n == 0) throw ConfigError(path + ".random_modes must be >= 1");
    return GmmSpec::random_means(n, dim, seed, std);
  }
  r.has("dim");
  r.has("mode_seed");
  r.has("mode_std");
  if (r.has("modes")) {
    const Json& modes = r.at("modes");
    if (!modes.is_array()) type_error(r.path("modes"), "array", modes);
    for (std::size_t i = 0; i < modes.size(); ++i) {
      ObjectReader m(modes[i], r.path("modes") + "[" + std::to_string(i) + "]");
      GmmSpec::Mode mode;
      m.read("mean", mode.mean);
      m.read("std", mode.std);
      m.finish();
      spec.modes.push_back(std::move(mode));
    }
  }
  r.read("weights", spec.weights);
  r.finish();
  if (spec.weights.empty() && !spec.modes.empty())
    spec.weights.assign(spec.modes.size(), 1.0 / static_cast<double>(spec.modes.size()));
  return spec;
}

inline Json gmm_to_json(const GmmSpec& s) {
  Json modes = Json::array();
  for (const auto& m : s.modes) modes.push_back({{"mean", m.mean}, {"std", m.std}});
  return {{"modes", modes}, {"weights", s.weights}};
}

}  // namespace config_detail

// Fills defaults that depend on other fields and checks value ranges.
inline void finalize(ExperimentConfig& c) {
  if (c.kind == ProblemKind::GmmBridge) {
    auto& g = c.gmm;
    if (g.dim == 0) throw ConfigError("problem.dim must be >= 1");
    if (g.pi0.modes.empty()) g.pi0 = GmmSpec::standard_normal(g.dim);
    if (g.pi1.modes.empty()) {
      std::vector<double> lo(g.dim, 0.0), hi(g.dim, 0.0);
      lo[0] = -2.0;
      hi[0] = 2.0;
      g.pi1 = GmmSpec{{{lo, 1.0}, {hi, 1.0}}, {0.5, 0.5}};
    }
    try {
      g.pi0.validate();
      g.pi1.validate();
    } catch (const ContractViolation& e) {
      throw ConfigError(std::string("problem: ") + e.what());
    }
    if (g.pi0.dim() != g.dim || g.pi1.dim() != g.dim)
      throw ConfigError("problem: pi0/pi1 mode dimension does not match problem.dim");
  }
  if (c.kind == ProblemKind::ManifoldBridge) {
    if (c.manifold.manifolds.empty()) throw ConfigError("problem.manifolds must not be empty");
    for (const auto& m : c.manifold.manifolds) parse_manifold_kind(m);
    if (c.manifold.n_samples == 0) throw ConfigError("problem.n_samples must be >= 1");
    if (c.manifold.noise < 0.0) throw ConfigError("problem.noise must be >= 0");
  }
  if (c.kind == ProblemKind::CsvBridge && c.csv.pi1_csv.empty())
    throw ConfigError("problem.pi1_csv is required for csv_bridge");

  auto& p = c.ipf;
  if (p.n_x == 0) throw ConfigError("ipf.n_x must be >= 1");
  if (p.batch_size == 0) throw ConfigError("ipf.batch_size must be >= 1");
  if (p.buffer_capacity == 0) throw ConfigError("ipf.buffer_capacity must be >= 1");
  if (p.n_t == 0) throw ConfigError("ipf.n_t must be >= 1");
  if (!(p.dt > 0.0)) throw ConfigError("ipf.dt must be > 0");
  if (p.sigma && !(*p.sigma >= 0.0)) throw ConfigError("ipf.sigma must be >= 0");
  if (!(p.lr_max > 0.0) || !(p.lr_min > 0.0) || p.lr_min > p.lr_max)
    throw ConfigError("ipf: need 0 < lr_min <= lr_max");
  const auto& e = p.estimator;
  if (e.kind != "auto" && e.kind != "exact" && e.kind != "hutchinson" && e.kind != "stein")
    throw ConfigError("ipf.estimator.kind must be one of auto, exact, hutchinson, stein");
  if (e.probes == 0) throw ConfigError("ipf.estimator.probes must be >= 1");
  if (e.sigma_z && !(*e.sigma_z > 0.0)) throw ConfigError("ipf.estimator.sigma_z must be > 0");
  if (p.first_trained != "backward" && p.first_trained != "forward")
    throw ConfigError("ipf.first_trained must be backward or forward");
  if (c.output.eval_n == 0) throw ConfigError("output.eval_n must be >= 1");
  if (c.output.dir.empty()) throw ConfigError("output.dir must not be empty");
}

inline ExperimentConfig parse_config(const Json& root) {
  using config_detail::ObjectReader;
  ExperimentConfig c;
  ObjectReader r(root, "");
  if (!r.has("problem")) throw ConfigError("missing required key: problem");
  {
    ObjectReader p(r.at("problem"), "problem");
    std::string kind;
    if (!p.has("kind")) throw ConfigError("missing required key: problem.kind");
    p.read("kind", kind);
    if (kind == "gmm_bridge") {
      c.kind = ProblemKind::GmmBridge;
      p.read("dim", c.gmm.dim);
      if (p.has("pi0")) c.gmm.pi0 = config_detail::read_gmm(p.at("pi0"), "problem.pi0");
      if (p.has("pi1")) c.gmm.pi1 = config_detail::read_gmm(p.at("pi1"), "problem.pi1");
      if (!p.has("dim")) {
        // Infer D from explicit boundary specs.
        if (!c.gmm.pi1.modes.empty()) c.gmm.dim = c.gmm.pi1.dim();
        else if (!c.gmm.pi0.modes.empty()) c.gmm.dim = c.gmm.pi0.dim();
      }
    } else if (kind == "manifold_bridge") {
      c.kind = ProblemKind::ManifoldBridge;
      p.read("manifolds", c.manifold.manifolds);
      p.read("n_samples", c.manifold.n_samples);
      p.read("noise", c.manifold.noise);
      p.read("pad_dims", c.manifold.pad_dims);
      p.read("normalize", c.manifold.normalize);
      p.read("data_seed", c.manifold.data_seed);
    } else if (kind == "csv_bridge") {
      c.kind = ProblemKind::CsvBridge;
      p.read("pi0_csv", c.csv.pi0_csv);
      p.read("pi1_csv", c.csv.pi1_csv);
      p.read("normalize", c.csv.normalize);
    } else {
      throw ConfigError("problem.kind must be one of gmm_bridge, manifold_bridge, csv_bridge (got \"" + kind +
                        "\")");
    }
    p.finish();
  }
  if (r.has("ipf")) {
    ObjectReader p(r.at("ipf"), "ipf");
    auto& s = c.ipf;
    p.read("iterations", s.iterations);
    p.read("n_x", s.n_x);
    p.read("steps", s.steps);
    p.read("batch_size", s.batch_size);
    p.read("buffer_capacity", s.buffer_capacity);
    p.read("refresh_every", s.refresh_every);
    p.read("n_t", s.n_t);
    p.read("dt", s.dt);
    p.read("sigma", s.sigma);
    p.read("lr_max", s.lr_max);
    p.read("lr_min", s.lr_min);
    p.read("first_trained", s.first_trained);
    p.read("seed", s.seed);
    if (p.has("estimator")) {
      const Json& ej = p.at("estimator");
      if (ej.is_string()) {
        s.estimator.kind = ej.get<std::string>();
      } else {
        ObjectReader e(ej, "ipf.estimator");
        e.read("kind", s.estimator.kind);
        e.read("probes", s.estimator.probes);
        e.read("sigma_z", s.estimator.sigma_z);
        e.finish();
      }
    }
    p.finish();
  }
  if (r.has("output")) {
    ObjectReader o(r.at("output"), "output");
    o.read("dir", c.output.dir);
    o.read("dump_trajectories", c.output.dump_trajectories);
    o.read("eval_n", c.output.eval_n);
    o.read("trajectory_count", c.output.trajectory_count);
    o.read("checkpoints", c.output.checkpoints);
    o.finish();
  }
  r.finish();
  finalize(c);
  return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(root);
}

inline ExperimentConfig parse_config(const char* text) { return parse_config(std::string(text)); }

// Fully defaulted config; parse_config(to_json(c)) reproduces c.
inline Json to_json(const ExperimentConfig& c) {
  Json problem{{"kind", to_string(c.kind)}};
  switch (c.kind) {
    case ProblemKind::GmmBridge:
      problem["dim"] = c.gmm.dim;
      problem["pi0"] = config_detail::gmm_to_json(c.gmm.pi0);
      problem["pi1"] = config_detail::gmm_to_json(c.gmm.pi1);
      break;
    case ProblemKind::ManifoldBridge:
      problem["manifolds"] = c.manifold.manifolds;
      problem["n_samples"] = c.manifold.n_samples;
      problem["noise"] = c.manifold.noise;
      problem["pad_dims"] = c.manifold.pad_dims;
      problem["normalize"] = c.manifold.normalize;
      problem["data_seed"] = c.manifold.data_seed;
      break;
    case ProblemKind::CsvBridge:
      problem["pi0_csv"] = c.csv.pi0_csv;
      problem["pi1_csv"] = c.csv.pi1_csv;
      problem["normalize"] = c.csv.normalize;
      break;
  }
  const auto& s = c.ipf;
  Json est{{"kind", s.estimator.kind}, {"probes", s.estimator.probes}};
  est["sigma_z"] = s.estimator.sigma_z ? Json(*s.estimator.sigma_z) : Json(nullptr);
  Json ipf{{"iterations", s.iterations},
           {"n_x", s.n_x},
           {"steps", s.steps},
           {"batch_size", s.batch_size},
           {"buffer_capacity", s.buffer_capacity},
           {"refresh_every", s.refresh_every},
           {"n_t", s.n_t},
           {"dt", s.dt},
           {"sigma", c.sigma()},
           {"lr_max", s.lr_max},
           {"lr_min", s.lr_min},
           {"estimator", est},
           {"first_trained", s.first_trained},
           {"seed", s.seed}};
  Json output{{"dir", c.output.dir},
              {"dump_trajectories", c.output.dump_trajectories},
              {"eval_n", c.output.eval_n},
              {"trajectory_count", c.output.trajectory_count},
              {"checkpoints", c.output.checkpoints}};
  return {{"problem", problem}, {"ipf", ipf}, {"output", output}};
}

}  // namespace bridgekit::app
