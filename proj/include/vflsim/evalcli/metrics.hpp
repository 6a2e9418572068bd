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
#include <span>

#include "vflsim/attack/leak_auc.hpp"

namespace vflsim {

// Same contract as leak_auc.
inline double auc(std::span<const double> scores, std::span<const int> labels) {
  return rank_auc(scores, labels);
}

inline constexpr double kNllClamp = 1e-12;

// Mean binary negative log likelihood with probabilities clamped to
// [1e-12, 1 - 1e-12].
inline double nll(std::span<const double> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) throw ValidationError("nll: probs and labels differ in length");
  if (probs.empty()) throw ValidationError("nll: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kNllClamp, 1.0 - kNllClamp);
    s -= labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return s / static_cast<double>(probs.size());
}

// (exp - base) / base; negative means less leakage.
inline double delta_leak_auc(double leak_exp, double leak_base) {
  if (!(leak_base > 0.0)) throw ValidationError("delta_leak_auc: base LeakAUC must be positive");
  return (leak_exp - leak_base) / leak_base;
}

}  // namespace vflsim
