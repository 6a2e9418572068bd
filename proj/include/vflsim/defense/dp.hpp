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

#include <cmath>
#include <cstdint>
#include <random>

#include "vflsim/defense/mixpro.hpp"

namespace vflsim {

struct DpConfig {
  double clip_norm = 1.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(clip_norm > 0.0)) throw ValidationError("dp: clip_norm must be > 0");
    if (!(noise_sigma >= 0.0)) throw ValidationError("dp: noise_sigma must be >= 0");
  }
};

// Per row: rescale to clip_norm if longer, then add N(0, (sigma * clip)^2)
// to every coordinate.
inline GradBatch dp_gaussian(const GradBatch& batch, const DpConfig& config, Rng& rng) {
  config.validate();
  GradBatch out = batch;
  std::normal_distribution<double> noise(0.0, config.noise_sigma * config.clip_norm);
  for (std::size_t i = 0; i < out.batch(); ++i) {
    auto row = out.grads.row(i);
    const double norm = std::sqrt(squared_norm(row));
    if (norm > config.clip_norm) {
      const double s = config.clip_norm / norm;
      for (double& v : row) v *= s;
    }
    if (config.noise_sigma > 0.0)
      for (double& v : row) v += noise(rng);
  }
  return out;
}

inline GradBatch dp_gaussian(const GradBatch& batch, const DpConfig& config) {
  Rng rng = make_rng(config.seed, 0xd9);
  return dp_gaussian(batch, config, rng);
}

}  // namespace vflsim
