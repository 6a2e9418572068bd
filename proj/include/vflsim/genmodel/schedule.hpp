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
#include <vector>

#include "vflsim/errors.hpp"
#include "vflsim/nncore/rng.hpp"
#include "vflsim/nncore/tensor.hpp"

namespace vflsim {

inline constexpr double kMaxScaledBeta = 0.5;

// Linear beta schedule. Index 0 holds the conventions beta_0 = 0 and
// alpha_bar_0 = 1 so that t runs 1..T.
struct NoiseSchedule {
  std::size_t steps = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  std::vector<double> one_minus_alpha_bar;  // accumulated directly, not 1 - alpha_bar

  std::size_t T() const { return steps; }

  void check(std::size_t t) const {
    if (t < 1 || t > steps) {
      throw ValidationError("diffusion step " + std::to_string(t) + " outside [1, " +
                            std::to_string(steps) + "]");
    }
  }

  // The endpoints are given for a 1000-step chain; shorter chains scale them
  // by 1000/T so the chain still ends near pure noise, with the scale capped
  // to keep the last beta at or below 0.5.
  static NoiseSchedule linear(std::size_t T, double beta_start = 1e-4, double beta_end = 0.02) {
    if (T < 1) throw ValidationError("schedule: T must be >= 1");
    double scale = 1000.0 / static_cast<double>(T);
    if (beta_end > 0.0) scale = std::min(scale, std::max(1.0, kMaxScaledBeta / beta_end));
    const double lo = beta_start * scale;
    const double hi = beta_end * scale;
    if (!(lo > 0.0) || !(hi < 1.0) || !(lo <= hi)) {
      throw ValidationError("schedule: betas must satisfy 0 < start <= end < 1 after scaling");
    }
    NoiseSchedule s;
    s.steps = T;
    s.beta.assign(T + 1, 0.0);
    s.alpha.assign(T + 1, 1.0);
    s.alpha_bar.assign(T + 1, 1.0);
    s.one_minus_alpha_bar.assign(T + 1, 0.0);
    for (std::size_t t = 1; t <= T; ++t) {
      const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
      s.beta[t] = lo + (hi - lo) * frac;
      s.alpha[t] = 1.0 - s.beta[t];
      s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
      s.one_minus_alpha_bar[t] = s.one_minus_alpha_bar[t - 1] + s.alpha_bar[t - 1] * s.beta[t];
    }
    return s;
  }

  // mu~_t = coef_zt * z_t + coef_z0 * z_0
  double coef_zt(std::size_t t) const {
    check(t);
    return std::sqrt(alpha[t]) * one_minus_alpha_bar[t - 1] / one_minus_alpha_bar[t];
  }
  double coef_z0(std::size_t t) const {
    check(t);
    return std::sqrt(alpha_bar[t - 1]) * beta[t] / one_minus_alpha_bar[t];
  }
  // beta~_t, the reverse-step variance.
  double posterior_variance(std::size_t t) const {
    check(t);
    return one_minus_alpha_bar[t - 1] * beta[t] / one_minus_alpha_bar[t];
  }
};

// h_t = sqrt(alpha_bar_t) h_0 + sqrt(1 - alpha_bar_t) eps with eps given.
inline Tensor q_sample_with_noise(const Tensor& h0, std::size_t t, const NoiseSchedule& s,
                                  const Tensor& eps) {
  s.check(t);
  require_same_shape(h0, eps, "q_sample");
  const double a = std::sqrt(s.alpha_bar[t]);
  const double b = std::sqrt(s.one_minus_alpha_bar[t]);
  Tensor out(h0.rows(), h0.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * h0[i] + b * eps[i];
  return out;
}

inline Tensor q_sample(const Tensor& h0, std::size_t t, const NoiseSchedule& s, Rng& rng) {
  s.check(t);
  Tensor eps(h0.rows(), h0.cols());
  for (double& v : eps.values()) v = standard_normal(rng);
  return q_sample_with_noise(h0, t, s, eps);
}

// One forward transition h_t = sqrt(alpha_t) h_{t-1} + sqrt(beta_t) eps.
inline Tensor q_step(const Tensor& h_prev, std::size_t t, const NoiseSchedule& s, Rng& rng) {
  s.check(t);
  const double a = std::sqrt(s.alpha[t]);
  const double b = std::sqrt(s.beta[t]);
  Tensor out(h_prev.rows(), h_prev.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * h_prev[i] + b * standard_normal(rng);
  return out;
}

inline Tensor posterior_mean(const Tensor& z_t, const Tensor& z_0, std::size_t t, const NoiseSchedule& s) {
  require_same_shape(z_t, z_0, "posterior_mean");
  const double a = s.coef_zt(t);
  const double b = s.coef_z0(t);
  Tensor out(z_t.rows(), z_t.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * z_t[i] + b * z_0[i];
  return out;
}

// Sinusoidal encoding of t: [sin(t w_k), cos(t w_k)], w_k = 10000^(-k/half).
inline std::vector<double> timestep_encoding(std::size_t t, std::size_t dim) {
  if (dim < 2 || dim % 2 != 0) throw ValidationError("timestep encoding dim must be even and >= 2");
  const std::size_t half = dim / 2;
  std::vector<double> out(dim);
  for (std::size_t k = 0; k < half; ++k) {
    const double w = std::pow(10000.0, -static_cast<double>(k) / static_cast<double>(half));
    out[k] = std::sin(static_cast<double>(t) * w);
    out[half + k] = std::cos(static_cast<double>(t) * w);
  }
  return out;
}

}  // namespace vflsim
