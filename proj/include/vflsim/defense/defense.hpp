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

#include <cstdint>
#include <functional>
#include <string>

#include "vflsim/defense/dp.hpp"
#include "vflsim/defense/mixpro.hpp"

namespace vflsim {

enum class DefenseKind { none, mixpro, dp };

inline DefenseKind parse_defense_kind(const std::string& s) {
  if (s == "none") return DefenseKind::none;
  if (s == "mixpro") return DefenseKind::mixpro;
  if (s == "dp") return DefenseKind::dp;
  throw ConfigError("unknown defense '" + s + "' (expected none|mixpro|dp)");
}

inline const char* to_string(DefenseKind k) {
  switch (k) {
    case DefenseKind::none: return "none";
    case DefenseKind::mixpro: return "mixpro";
    case DefenseKind::dp: return "dp";
  }
  return "?";
}

struct DefenseConfig {
  DefenseKind kind = DefenseKind::none;
  MixProConfig mixpro;
  DpConfig dp;
};

// Applied by the label party to the cut-gradient batch of training step
// `step` before it is sent.
using GradientDefense = std::function<GradBatch(const GradBatch&, std::uint64_t step)>;

// Each call draws from its own stream derived from (seed, step).
inline GradientDefense make_gradient_defense(const DefenseConfig& config) {
  switch (config.kind) {
    case DefenseKind::none:
      return {};
    case DefenseKind::mixpro: {
      config.mixpro.validate();
      return [cfg = config.mixpro](const GradBatch& g, std::uint64_t step) {
        Rng rng = make_rng(cfg.seed, step);
        return mixpro(g, cfg, rng).batch;
      };
    }
    case DefenseKind::dp: {
      config.dp.validate();
      return [cfg = config.dp](const GradBatch& g, std::uint64_t step) {
        Rng rng = make_rng(cfg.seed, step);
        return dp_gaussian(g, cfg, rng);
      };
    }
  }
  return {};
}

}  // namespace vflsim
