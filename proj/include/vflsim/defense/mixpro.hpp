/*
 * Copyright 2026 The vflsim Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "vflsim/errors.hpp"
#include "vflsim/nncore/rng.hpp"
#include "vflsim/nncore/tensor.hpp"

namespace vflsim {

// Cut-layer gradients of one batch, one row per sample (B x d).
struct GradBatch {
  Tensor grads;

  std::size_t batch() const { return grads.rows(); }
  std::size_t dim() const { return grads.cols(); }

  // Batch mean, recomputed from the rows.
  std::vector<double> mean() const {
    std::vector<double> m(dim(), 0.0);
    for (std::size_t i = 0; i < batch(); ++i)
      for (std::size_t k = 0; k < dim(); ++k) m[k] += grads(i, k);
    for (double& v : m) v /= static_cast<double>(batch());
    return m;
  }
};

struct MixProConfig {
  double alpha = 0.6;
  double phi_goal = std::sqrt(3.0) / 2.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(alpha > 0.0)) throw ValidationError("mixpro: alpha must be > 0");
    if (!(phi_goal > -1.0 && phi_goal < 1.0)) {
      throw ValidationError("mixpro: phi_goal must lie strictly inside (-1, 1)");
    }
  }
};

// lambda' ~ Beta(alpha, alpha) from two Gamma(alpha, 1) draws, reflected so
// the result is max(lambda', 1 - lambda').
inline double sample_lambda(double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw ValidationError("sample_lambda: alpha must be > 0");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  double x = 0.0, y = 0.0;
  // Both draws can underflow to zero for very small alpha.
  while (x + y == 0.0) {
    x = gamma(rng);
    y = gamma(rng);
  }
  const double lambda = x / (x + y);
  return std::max(lambda, 1.0 - lambda);
}

// Per-sample record of which partner and weight mixup used.
struct MixupChoice {
  std::size_t partner = 0;
  double lambda = 1.0;
};

// g_mixed_i = lambda_i g_i + (1 - lambda_i) g_r, r uniform over the batch
// without i, fresh lambda per sample. If forced_lambda is set it replaces
// the Beta draw.
inline GradBatch mixup(const GradBatch& batch, double alpha, Rng& rng,
                       std::vector<MixupChoice>* choices = nullptr,
                       std::optional<double> forced_lambda = std::nullopt) {
  const std::size_t b = batch.batch();
  if (b < 2) throw ValidationError("mixup: batch size must be >= 2");
  GradBatch out{Tensor(b, batch.dim())};
  if (choices != nullptr) choices->assign(b, {});
  std::uniform_int_distribution<std::size_t> pick(0, b - 2);
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t r = pick(rng);
    if (r >= i) ++r;
    const double lambda = forced_lambda ? *forced_lambda : sample_lambda(alpha, rng);
    for (std::size_t k = 0; k < batch.dim(); ++k)
      out.grads(i, k) = lambda * batch.grads(i, k) + (1.0 - lambda) * batch.grads(r, k);
    if (choices != nullptr) (*choices)[i] = {r, lambda};
  }
  return out;
}

enum class ProjectionOutcome { gate_passed, projected, degenerate };

// Pushes g_mixed towards g_bar until cos(out, g_bar) = phi_goal. Rows that
// already meet the goal, and zero vectors, are copied unchanged.
inline ProjectionOutcome project(std::span<const double> g_mixed, std::span<const double> g_bar,
                                 double phi_goal, std::span<double> out) {
  if (!(phi_goal > -1.0 && phi_goal < 1.0)) {
    throw ValidationError("project: |phi_goal| must be < 1");
  }
  if (g_mixed.size() != g_bar.size() || out.size() != g_mixed.size()) {
    throw DimensionError("project: length mismatch");
  }
  std::copy(g_mixed.begin(), g_mixed.end(), out.begin());
  const double norm_g = std::sqrt(squared_norm(g_mixed));
  const double norm_bar = std::sqrt(squared_norm(g_bar));
  if (norm_g == 0.0 || norm_bar == 0.0) return ProjectionOutcome::degenerate;
  const double phi = std::clamp(dot(g_mixed, g_bar) / (norm_g * norm_bar), -1.0, 1.0);
  if (phi >= phi_goal) return ProjectionOutcome::gate_passed;
  const double sin_goal = std::sqrt(1.0 - phi_goal * phi_goal);
  const double coef = norm_g * (phi_goal * std::sqrt(1.0 - phi * phi) - phi * sin_goal) /
                      (norm_bar * sin_goal);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += coef * g_bar[k];
  return ProjectionOutcome::projected;
}

struct MixProResult {
  GradBatch batch;
  std::size_t projected = 0;
  std::size_t degenerate = 0;
  bool flagged() const { return degenerate > 0; }
};

// Mixup followed by projection against the mean of the original gradients.
inline MixProResult mixpro(const GradBatch& batch, const MixProConfig& config, Rng& rng) {
  config.validate();
  const std::vector<double> g_bar = batch.mean();
  GradBatch mixed = mixup(batch, config.alpha, rng);
  MixProResult res{GradBatch{Tensor(batch.batch(), batch.dim())}};
  for (std::size_t i = 0; i < batch.batch(); ++i) {
    switch (project(mixed.grads.row(i), g_bar, config.phi_goal, res.batch.grads.row(i))) {
      case ProjectionOutcome::projected: ++res.projected; break;
      case ProjectionOutcome::degenerate: ++res.degenerate; break;
      case ProjectionOutcome::gate_passed: break;
    }
  }
  return res;
}

inline MixProResult mixpro(const GradBatch& batch, const MixProConfig& config) {
  Rng rng = make_rng(config.seed, 0x3190);
  return mixpro(batch, config, rng);
}

}  // namespace vflsim
