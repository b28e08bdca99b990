// SPDX-License-Identifier: Apache-2.0
#pragma once

// Plain-text checkpoint of a DriftNetwork:
//
//   bridgekit-drift 1
//   dim <D> width <W> depth <L> time_embed_dim <E> time_frequencies <F> seed <S> zero_final <0|1>
//   params <count>
//   <name> <rows> <cols>
//   <rows*cols values, row-major, %.17g, space separated>
//   ...
//
// %.17g round-trips every double exactly.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "bridgekit/core/errors.hpp"
#include "bridgekit/drift/network.hpp"

namespace bridgekit {

inline void write_checkpoint(std::ostream& os, const DriftNetwork& net) {
  const auto& o = net.options;
  os << "bridgekit-drift 1\n"
     << "dim " << o.dim << " width " << o.width << " depth " << o.depth << " time_embed_dim "
     << o.time_embed_dim << " time_frequencies " << o.time_frequencies << " seed " << o.seed
     << " zero_final " << (o.zero_final ? 1 : 0) << "\n"
     << "params " << net.params.size() << "\n";
  char buf[32];
  for (const auto& e : net.params) {
    os << e.name << ' ' << e.value.rows() << ' ' << e.value.cols() << '\n';
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", e.value[i]);
      os << (i ? " " : "") << buf;
    }
    os << '\n';
  }
}

inline DriftNetwork read_checkpoint(std::istream& is) {
  std::string magic;
  int version = 0;
  is >> magic >> version;
  if (magic != "bridgekit-drift" || version != 1) throw ParseError("not a bridgekit-drift v1 checkpoint", 1);

  DriftNetworkOptions o;
  std::string key;
  int zero_final = 0;
  auto expect = [&](const char* k) {
    is >> key;
    if (key != k) throw ParseError(std::string("checkpoint: expected '") + k + "', got '" + key + "'", 2);
  };
  expect("dim");
  is >> o.dim;
  expect("width");
  is >> o.width;
  expect("depth");
  is >> o.depth;
  expect("time_embed_dim");
  is >> o.time_embed_dim;
  expect("time_frequencies");
  is >> o.time_frequencies;
  expect("seed");
  is >> o.seed;
  expect("zero_final");
  is >> zero_final;
  o.zero_final = zero_final != 0;
  if (!is) throw ParseError("checkpoint: malformed header", 2);

  // Rebuild the layout, then overwrite every tensor from the file.
  DriftNetwork net = build_drift_network(o);
  std::size_t count = 0;
  expect("params");
  is >> count;
  if (count != net.params.size()) throw ParseError("checkpoint: parameter count does not match layout", 3);
  for (std::size_t i = 0; i < count; ++i) {
    std::string name;
    std::size_t rows = 0, cols = 0;
    is >> name >> rows >> cols;
    if (!is) throw ParseError("checkpoint: truncated parameter header");
    const std::size_t idx = net.params.index(name);
    Matrix m(rows, cols);
    for (std::size_t j = 0; j < m.size(); ++j)
      if (!(is >> m[j])) throw ParseError("checkpoint: truncated values for '" + name + "'");
    net.params.assign(idx, m);
  }
  return net;
}

inline void save_checkpoint(const std::string& path, const DriftNetwork& net) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write checkpoint '" + path + "'");
  write_checkpoint(os, net);
}

inline DriftNetwork load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read checkpoint '" + path + "'");
  return read_checkpoint(is);
}

}  // namespace bridgekit
