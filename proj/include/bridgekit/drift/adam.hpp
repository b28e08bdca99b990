// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "bridgekit/ad/tape.hpp"
#include "bridgekit/core/errors.hpp"

namespace bridgekit {

// Cosine annealing from lr_max at step 0 to lr_min at `total_steps`, flat afterwards.
struct CosineSchedule {
  double lr_max = 1e-3;
  double lr_min = 1e-5;
  std::size_t total_steps = 1000;

  double operator()(std::size_t step) const {
    if (total_steps == 0 || step >= total_steps) return lr_min;
    const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
  }
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  CosineSchedule schedule;
};

class AdamState {
 public:
  AdamState(const ad::ParamSet& params, AdamOptions opt = {}) : opt_(opt) {
    for (const auto& e : params) {
      m_.emplace_back(e.value.shape());
      v_.emplace_back(e.value.shape());
    }
  }

  std::size_t step() const noexcept { return step_; }
  const AdamOptions& options() const noexcept { return opt_; }
  const std::vector<Matrix>& first_moment() const noexcept { return m_; }
  const std::vector<Matrix>& second_moment() const noexcept { return v_; }

  // Learning rate used by the update that brings the counter to `step`.
  double learning_rate(std::size_t step) const { return opt_.schedule(step); }

  // One bias-corrected Adam update. Throws NumericalError naming the first
  // parameter with a non-finite gradient; `params` is untouched in that case.
  void apply(ad::ParamSet& params, const std::vector<Matrix>& grads) {
    detail::require(grads.size() == params.size() && m_.size() == params.size(),
                    "Adam: gradient count does not match parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
      detail::require(grads[i].shape() == params.value(i).shape(),
                      "Adam: gradient shape mismatch for '" + params.name(i) + "'");
      if (!grads[i].all_finite())
        throw NumericalError("non-finite gradient for parameter '" + params.name(i) + "'");
    }
    ++step_;
    const double lr = learning_rate(step_);
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Matrix& w = params.mutable_value(i);
      Matrix& m = m_[i];
      Matrix& v = v_[i];
      const Matrix& g = grads[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        m[j] = opt_.beta1 * m[j] + (1.0 - opt_.beta1) * g[j];
        v[j] = opt_.beta2 * v[j] + (1.0 - opt_.beta2) * g[j] * g[j];
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        w[j] -= lr * mhat / (std::sqrt(vhat) + opt_.eps);
      }
    }
  }

 private:
  AdamOptions opt_;
  std::size_t step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

inline void optimizer_step(ad::ParamSet& params, const std::vector<Matrix>& grads, AdamState& state) {
  state.apply(params, grads);
}

}  // namespace bridgekit
