// SPDX-License-Identifier: Apache-2.0
#pragma once

// Cartesian parameter sweeps over a base config.
//
// Grid spec: "ipf.n_x=32,128,512;ipf.seed=0,1,2". Each axis is a dotted key
// path into the config JSON and a comma-separated value list; values are
// read as JSON literals, falling back to plain strings.

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "bridgekit/app/config.hpp"
#include "bridgekit/app/experiment.hpp"

namespace bridgekit::app {

struct GridAxis {
  std::string key;
  std::vector<Json> values;
};

namespace sweep_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline Json literal(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    return text;
  }
}

inline std::string value_label(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace sweep_detail

inline std::vector<GridAxis> parse_grid(const std::string& spec) {
  using namespace sweep_detail;
  std::vector<GridAxis> axes;
  for (const std::string& part : split(spec, ';')) {
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ConfigError("grid axis '" + part + "' needs key=v1,v2,...");
    GridAxis axis{trim(part.substr(0, eq)), {}};
    if (axis.key.empty()) throw ConfigError("grid axis '" + part + "' has an empty key");
    for (const auto& a : axes)
      if (a.key == axis.key) throw ConfigError("grid key repeated: " + axis.key);
    for (const std::string& v : split(part.substr(eq + 1), ',')) {
      if (v.empty()) throw ConfigError("grid axis " + axis.key + " has an empty value");
      axis.values.push_back(literal(v));
    }
    if (axis.values.empty()) throw ConfigError("grid axis " + axis.key + " has no values");
    axes.push_back(std::move(axis));
  }
  if (axes.empty()) throw ConfigError("grid spec is empty");
  return axes;
}

// Sets a dotted key path, creating intermediate objects.
inline void set_path(Json& root, const std::string& dotted, const Json& value) {
  Json* node = &root;
  const auto keys = sweep_detail::split(dotted, '.');
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (keys[i].empty()) throw ConfigError("grid key '" + dotted + "' has an empty segment");
    if (!node->is_object()) throw ConfigError("grid key '" + dotted + "' descends into a non-object");
    if (i + 1 == keys.size())
      (*node)[keys[i]] = value;
    else
      node = &(*node)[keys[i]];
  }
}

struct SweepCell {
  std::vector<Json> values;  // one per axis
  std::string name;
  ExperimentConfig config;
};

// Cells in row-major order (last axis fastest). Every cell is parsed and
// validated before anything runs.
inline std::vector<SweepCell> expand_grid(const Json& base, const std::vector<GridAxis>& axes,
                                          const std::filesystem::path& root_dir) {
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.values.size();
  std::vector<SweepCell> cells;
  for (std::size_t flat = 0; flat < total; ++flat) {
    SweepCell cell;
    cell.values.resize(axes.size());
    std::size_t rem = flat;
    for (std::size_t k = axes.size(); k-- > 0;) {
      cell.values[k] = axes[k].values[rem % axes[k].values.size()];
      rem /= axes[k].values.size();
    }
    Json j = base;
    std::string name;
    for (std::size_t k = 0; k < axes.size(); ++k) {
      set_path(j, axes[k].key, cell.values[k]);
      const auto dot = axes[k].key.rfind('.');
      name += (k ? "_" : "") + axes[k].key.substr(dot == std::string::npos ? 0 : dot + 1) + "-" +
              sweep_detail::value_label(cell.values[k]);
    }
    cell.name = name;
    set_path(j, "output.dir", (root_dir / name).string());
    try {
      cell.config = parse_config(j);
    } catch (const ConfigError& e) {
      throw ConfigError("sweep cell " + name + ": " + e.what());
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

struct SweepOutcome {
  std::size_t failed = 0;
  ErrorInfo first_error;
};

// Runs every cell into <output.dir>/<cell>/ and writes <output.dir>/summary.csv.
// A failing cell is recorded and the sweep continues.
inline SweepOutcome run_sweep(const Json& base, const std::vector<GridAxis>& axes, const RunOptions& opt,
                              std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  const ExperimentConfig base_cfg = parse_config(base);
  const fs::path root(base_cfg.output.dir);
  const auto cells = expand_grid(base, axes, root);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) throw IoError("cannot create output directory '" + root.string() + "'");

  std::ostringstream csv;
  csv << "cell";
  for (const auto& a : axes) csv << ',' << a.key;
  csv << ",status,final_w1_forward,final_w1_backward,mean_w1\n";

  SweepOutcome out;
  for (const auto& cell : cells) {
    std::string status = "ok";
    Json summary;
    try {
      summary = run_experiment(cell.config, opt).metrics.at("summary");
    } catch (const std::exception& e) {
      const ErrorInfo info = classify(e);
      if (out.failed++ == 0) out.first_error = info;
      status = info.kind;
      if (log) *log << info.to_json().dump() << '\n';
    }
    csv << cell.name;
    for (const auto& v : cell.values) csv << ',' << sweep_detail::value_label(v);
    csv << ',' << status;
    for (const char* key : {"final_w1_forward", "final_w1_backward", "mean_w1"}) {
      csv << ',';
      if (summary.is_object() && summary.contains(key) && summary.at(key).is_number()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.10g", summary.at(key).get<double>());
        csv << buf;
      }
    }
    csv << '\n';
    write_text_file(root / "summary.csv", csv.str());
  }
  return out;
}

}  // namespace bridgekit::app
