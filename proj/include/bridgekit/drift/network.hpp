// SPDX-License-Identifier: Apache-2.0
#pragma once

// Residual MLP drift mu(x, t): R^D x [0,1] -> R^D.
//
//   h_0     = x W_in + b_in
//   h_{i+1} = h_i + tanh(LayerNorm(h_i) W_i + e(t) T_i + b_i)
//   out     = h_L W_out + b_out
//
// e(t) = tanh(sinusoidal(t) W_emb + b_emb). LayerNorm only sees the spatial
// features; the time embedding enters through its own projection T_i.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "bridgekit/ad/tape.hpp"
#include "bridgekit/core/errors.hpp"
#include "bridgekit/core/matrix.hpp"
#include "bridgekit/core/rng.hpp"

namespace bridgekit {

struct DriftNetworkOptions {
  std::size_t dim = 0;
  std::size_t width = 0;  // 0 -> 10 * dim
  std::size_t depth = 0;  // 0 -> max(2, ceil(dim / 5))
  std::size_t time_embed_dim = 16;
  std::size_t time_frequencies = 16;
  std::uint64_t seed = 0;
  bool zero_final = true;
};

inline std::size_t default_width(std::size_t dim) { return 10 * dim; }
inline std::size_t default_depth(std::size_t dim) { return std::max<std::size_t>(2, (dim + 4) / 5); }

struct DriftNetwork {
  DriftNetworkOptions options;  // fully resolved (no zero placeholders)
  ad::ParamSet params;

  std::size_t dim() const { return options.dim; }
  std::size_t width() const { return options.width; }
  std::size_t depth() const { return options.depth; }
};

namespace drift_detail {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kMinFrequency = 1.0;
inline constexpr double kMaxFrequency = 32.0;

inline Matrix uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(-bound, bound);
  return m;
}

inline void check_times(std::span<const double> t, std::size_t rows) {
  detail::require(t.size() == rows, "drift: got " + std::to_string(t.size()) + " times for " +
                                        std::to_string(rows) + " points");
  for (double v : t)
    detail::require(v >= 0.0 && v <= 1.0, "drift: time " + std::to_string(v) + " outside [0,1]");
}

// [sin(w_k t), cos(w_k t)] with w_k geometric between kMinFrequency and kMaxFrequency.
inline Matrix sinusoidal_features(std::span<const double> t, std::size_t freqs) {
  Matrix f(t.size(), 2 * freqs);
  const double ratio =
      freqs > 1 ? std::pow(kMaxFrequency / kMinFrequency, 1.0 / static_cast<double>(freqs - 1)) : 1.0;
  for (std::size_t r = 0; r < t.size(); ++r) {
    double w = kMinFrequency;
    for (std::size_t k = 0; k < freqs; ++k, w *= ratio) {
      f(r, k) = std::sin(w * t[r]);
      f(r, freqs + k) = std::cos(w * t[r]);
    }
  }
  return f;
}

}  // namespace drift_detail

inline DriftNetwork build_drift_network(DriftNetworkOptions opt) {
  detail::require(opt.dim >= 1, "build_drift_network: dimension must be >= 1");
  if (opt.width == 0) opt.width = default_width(opt.dim);
  if (opt.depth == 0) opt.depth = default_depth(opt.dim);
  detail::require(opt.time_embed_dim >= 1 && opt.time_frequencies >= 1,
                  "build_drift_network: empty time embedding");

  using drift_detail::uniform_init;
  DriftNetwork net{opt, {}};
  Rng rng(opt.seed);
  const std::size_t D = opt.dim, W = opt.width, E = opt.time_embed_dim, F = 2 * opt.time_frequencies;

  auto& p = net.params;
  p.add("embed.w", uniform_init(F, E, F, rng));
  p.add("embed.b", uniform_init(1, E, F, rng));
  p.add("input.w", uniform_init(D, W, D, rng));
  p.add("input.b", uniform_init(1, W, D, rng));
  for (std::size_t i = 0; i < opt.depth; ++i) {
    const std::string b = "block" + std::to_string(i) + ".";
    p.add(b + "ln.gain", Matrix(1, W, 1.0));
    p.add(b + "ln.bias", Matrix(1, W, 0.0));
    p.add(b + "w", uniform_init(W, W, W + E, rng));
    p.add(b + "time.w", uniform_init(E, W, W + E, rng));
    p.add(b + "b", uniform_init(1, W, W + E, rng));
  }
  if (opt.zero_final) {
    p.add("output.w", Matrix(W, D));
    p.add("output.b", Matrix(1, D));
  } else {
    p.add("output.w", uniform_init(W, D, W, rng));
    p.add("output.b", uniform_init(1, D, W, rng));
  }
  return net;
}

inline DriftNetwork build_drift_network(std::size_t dim, std::uint64_t seed, bool zero_final = true) {
  DriftNetworkOptions opt;
  opt.dim = dim;
  opt.seed = seed;
  opt.zero_final = zero_final;
  return build_drift_network(opt);
}

// Records the network on `tape`; `x` is a (batch x D) node.
inline ad::Var drift_forward(const DriftNetwork& net, ad::Tape& tape, ad::Var x, std::span<const double> t) {
  const Shape xs = tape.shape(x.id);
  detail::require(xs.cols == net.dim(), "drift_forward: input has " + std::to_string(xs.cols) +
                                            " columns, network dimension is " + std::to_string(net.dim()));
  drift_detail::check_times(t, xs.rows);

  const auto& p = net.params;
  std::size_t k = 0;
  auto next = [&] { return tape.param(p, k++); };

  ad::Var feats = tape.constant(drift_detail::sinusoidal_features(t, net.options.time_frequencies));
  ad::Var ew = next(), eb = next();
  ad::Var emb = ad::tanh(ad::matmul(feats, ew) + eb);
  ad::Var iw = next(), ib = next();
  ad::Var h = ad::matmul(x, iw) + ib;
  for (std::size_t i = 0; i < net.depth(); ++i) {
    ad::Var gain = next(), bias = next(), w = next(), tw = next(), b = next();
    ad::Var normed = ad::layer_norm(h, gain, bias, drift_detail::kLayerNormEps);
    h = h + ad::tanh(ad::matmul(normed, w) + ad::matmul(emb, tw) + b);
  }
  ad::Var ow = next(), ob = next();
  return ad::matmul(h, ow) + ob;
}

// Tape-free evaluation with the same floating-point operations as
// drift_forward, so results agree bit for bit. The time path is computed once
// per distinct t value.
inline Matrix drift_evaluate(const DriftNetwork& net, const Matrix& x, std::span<const double> t) {
  detail::require(x.cols() == net.dim(), "drift_evaluate: input has " + std::to_string(x.cols()) +
                                             " columns, network dimension is " + std::to_string(net.dim()));
  drift_detail::check_times(t, x.rows());
  using ad::detail_ops::gemm;
  const auto& p = net.params;
  const std::size_t n = x.rows(), W = net.width(), L = net.depth();

  std::vector<double> distinct;
  std::vector<std::size_t> slot(n);
  for (std::size_t r = 0; r < n; ++r) {
    auto it = std::find(distinct.begin(), distinct.end(), t[r]);
    slot[r] = static_cast<std::size_t>(it - distinct.begin());
    if (it == distinct.end()) distinct.push_back(t[r]);
  }
  Matrix emb = gemm(drift_detail::sinusoidal_features(distinct, net.options.time_frequencies), p.value(0));
  const Matrix& eb = p.value(1);
  for (std::size_t r = 0; r < emb.rows(); ++r)
    for (std::size_t c = 0; c < emb.cols(); ++c) emb(r, c) = std::tanh(emb(r, c) + eb[c]);

  Matrix h = gemm(x, p.value(2));
  const Matrix& ib = p.value(3);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < W; ++c) h(r, c) = h(r, c) + ib[c];

  const double inv_w = 1.0 / static_cast<double>(W);
  Matrix normed(n, W);
  for (std::size_t i = 0; i < L; ++i) {
    const std::size_t base = 4 + 5 * i;
    const Matrix &gain = p.value(base), &bias = p.value(base + 1), &w = p.value(base + 2),
                 &tw = p.value(base + 3), &b = p.value(base + 4);
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < W; ++c) s += h(r, c);
      const double mean = s * inv_w;
      double sq = 0.0;
      for (std::size_t c = 0; c < W; ++c) {
        const double d = h(r, c) - mean;
        normed(r, c) = d;
        sq += d * d;
      }
      const double inv_std = 1.0 / std::sqrt(1.0 * (sq * inv_w) + drift_detail::kLayerNormEps);
      for (std::size_t c = 0; c < W; ++c) normed(r, c) = normed(r, c) * inv_std * gain[c] + bias[c];
    }
    const Matrix pre = gemm(normed, w);
    const Matrix et = gemm(emb, tw);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < W; ++c) h(r, c) = h(r, c) + std::tanh(pre(r, c) + et(slot[r], c) + b[c]);
  }
  Matrix out = gemm(h, p.value(4 + 5 * L));
  const Matrix& ob = p.value(5 + 5 * L);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = out(r, c) + ob[c];
  return out;
}

inline Matrix drift_evaluate(const DriftNetwork& net, const Matrix& x, double t) {
  std::vector<double> ts(x.rows(), t);
  return drift_evaluate(net, x, ts);
}

}  // namespace bridgekit
