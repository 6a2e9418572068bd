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
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <vector>

#include "vflsim/data/dataset.hpp"
#include "vflsim/nncore/rng.hpp"

namespace vflsim {

struct GeneratorConfig {
  std::size_t n_samples = 100000;
  std::size_t n_users = 5000;
  std::size_t n_ads = 1000;
  double positive_rate = 0.05;
  double nonlabel_signal_strength = 1.0;
  std::uint64_t seed = 1;
  std::int64_t start_ts = 1700000000;
  std::int64_t span_days = 35;

  // Conversion rate of the production data the schema mirrors.
  static GeneratorConfig paper_scale_rates() {
    GeneratorConfig c;
    c.positive_rate = 0.006;
    return c;
  }

  void validate() const {
    if (n_samples == 0) throw ValidationError("generator: n_samples must be > 0");
    if (n_users == 0 || n_ads == 0) throw ValidationError("generator: zero vocabulary (users/ads)");
    if (!(positive_rate > 0.0 && positive_rate < 1.0))
      throw ValidationError("generator: positive_rate must be in (0,1)");
    if (!(nonlabel_signal_strength >= 0.0))
      throw ValidationError("generator: nonlabel_signal_strength must be >= 0");
    if (span_days <= 0) throw ValidationError("generator: span_days must be > 0");
  }
};

namespace detail {

enum class SlotSource { user, ad, context, hour, weekday, user_x_ad };

struct SlotSpec {
  SlotSource source;
  std::size_t cardinality;  // 0 = n_ads
  double weight_scale;
};

// Label party: user profile, ad side, context and one cross feature.
inline constexpr std::array<SlotSpec, kLabelSlots> kLabelSlotSpecs{{
    {SlotSource::user, 50, 0.35},     // user segment
    {SlotSource::user, 10, 0.20},     // age bucket
    {SlotSource::user, 3, 0.10},      // gender
    {SlotSource::user, 200, 0.25},    // city
    {SlotSource::user, 8, 0.20},      // purchase power
    {SlotSource::ad, 0, 0.45},        // ad id
    {SlotSource::ad, 100, 0.35},      // category
    {SlotSource::ad, 300, 0.25},      // brand
    {SlotSource::ad, 500, 0.20},      // shop
    {SlotSource::ad, 20, 0.15},       // price bucket
    {SlotSource::hour, 24, 0.10},
    {SlotSource::weekday, 7, 0.05},
    {SlotSource::context, 5, 0.10},   // device
    {SlotSource::context, 10, 0.15},  // position
    {SlotSource::user_x_ad, 1000, 0.20},
    {SlotSource::ad, 200, 0.20},      // campaign
}};

// Non-label (publisher) party: its own view of the user plus page context.
inline constexpr std::array<SlotSpec, kNonLabelSlots> kNonLabelSlotSpecs{{
    {SlotSource::user, 30, 0.40},     // interest cluster
    {SlotSource::user, 10, 0.30},     // activity level
    {SlotSource::user, 12, 0.25},     // tenure
    {SlotSource::context, 50, 0.30},  // media / app id
    {SlotSource::context, 8, 0.25},   // page type
    {SlotSource::context, 4, 0.15},   // network
    {SlotSource::user_x_ad, 60, 0.35},
}};

inline std::size_t slot_cardinality(const SlotSpec& s, const GeneratorConfig& c) {
  return s.cardinality == 0 ? c.n_ads : s.cardinality;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

// Synthetic clicks whose conversion labels follow a logistic model over latent
// per-id weights of both parties' features. The non-label party's
// contribution to the logit is scaled by nonlabel_signal_strength.
// If true_probability is given it receives each record's conversion
// probability, in output order.
inline Dataset generate(const GeneratorConfig& config,
                        std::vector<double>* true_probability = nullptr) {
  using detail::SlotSource;
  config.validate();
  Rng rng = make_rng(config.seed, 0x6e6e);
  std::normal_distribution<double> normal(0.0, 1.0);

  Dataset d;
  for (std::size_t s = 0; s < kLabelSlots; ++s)
    d.label_vocab[s] = detail::slot_cardinality(detail::kLabelSlotSpecs[s], config);
  for (std::size_t s = 0; s < kNonLabelSlots; ++s)
    d.nonlabel_vocab[s] = detail::slot_cardinality(detail::kNonLabelSlotSpecs[s], config);

  auto draw_weights = [&](std::size_t card, double scale) {
    std::vector<double> w(card);
    for (double& v : w) v = scale * normal(rng);
    return w;
  };
  std::array<std::vector<double>, kLabelSlots> label_w;
  std::array<std::vector<double>, kNonLabelSlots> nonlabel_w;
  for (std::size_t s = 0; s < kLabelSlots; ++s)
    label_w[s] = draw_weights(d.label_vocab[s], detail::kLabelSlotSpecs[s].weight_scale);
  for (std::size_t s = 0; s < kNonLabelSlots; ++s)
    nonlabel_w[s] = draw_weights(d.nonlabel_vocab[s], detail::kNonLabelSlotSpecs[s].weight_scale);

  // Entity attributes: a fixed id per (user, slot) and (ad, slot).
  auto attributes = [&](std::size_t entities, auto& specs, SlotSource source,
                        auto& vocab) {
    std::vector<std::uint32_t> table(entities * specs.size(), 0);
    for (std::size_t e = 0; e < entities; ++e)
      for (std::size_t s = 0; s < specs.size(); ++s)
        if (specs[s].source == source)
          table[e * specs.size() + s] = static_cast<std::uint32_t>(
              std::uniform_int_distribution<std::size_t>(0, vocab[s] - 1)(rng));
    return table;
  };
  const auto user_label = attributes(config.n_users, detail::kLabelSlotSpecs, SlotSource::user, d.label_vocab);
  const auto user_nonlabel =
      attributes(config.n_users, detail::kNonLabelSlotSpecs, SlotSource::user, d.nonlabel_vocab);
  const auto ad_label = attributes(config.n_ads, detail::kLabelSlotSpecs, SlotSource::ad, d.label_vocab);

  const std::int64_t span = config.span_days * 86400;
  std::vector<double> logits(config.n_samples);
  d.records.resize(config.n_samples);
  for (std::size_t i = 0; i < config.n_samples; ++i) {
    SampleRecord& r = d.records[i];
    const std::size_t user =
        std::uniform_int_distribution<std::size_t>(0, config.n_users - 1)(rng);
    // Skewed ad popularity.
    const double u = uniform01(rng);
    const std::size_t ad = std::min(config.n_ads - 1,
                                    static_cast<std::size_t>(u * u * static_cast<double>(config.n_ads)));
    r.user_id = static_cast<std::uint32_t>(user);
    r.click_ts = config.start_ts + std::uniform_int_distribution<std::int64_t>(0, span - 1)(rng);
    const std::uint32_t ad_category = ad_label[ad * kLabelSlots + 6];

    double logit = 0.0;
    for (std::size_t s = 0; s < kLabelSlots; ++s) {
      const auto& spec = detail::kLabelSlotSpecs[s];
      std::uint32_t id = 0;
      switch (spec.source) {
        case SlotSource::user: id = user_label[user * kLabelSlots + s]; break;
        case SlotSource::ad: id = s == 5 ? static_cast<std::uint32_t>(ad) : ad_label[ad * kLabelSlots + s]; break;
        case SlotSource::hour: id = static_cast<std::uint32_t>((r.click_ts / 3600) % 24); break;
        case SlotSource::weekday: id = static_cast<std::uint32_t>(((r.click_ts - config.start_ts) / 86400) % 7); break;
        case SlotSource::context:
          id = static_cast<std::uint32_t>(std::uniform_int_distribution<std::size_t>(0, d.label_vocab[s] - 1)(rng));
          break;
        case SlotSource::user_x_ad:
          id = static_cast<std::uint32_t>((user * 7919u + ad_category * 104729u) % d.label_vocab[s]);
          break;
      }
      r.label_features[s] = id;
      logit += label_w[s][id];
    }
    double nonlabel_logit = 0.0;
    for (std::size_t s = 0; s < kNonLabelSlots; ++s) {
      const auto& spec = detail::kNonLabelSlotSpecs[s];
      std::uint32_t id = 0;
      switch (spec.source) {
        case SlotSource::user: id = user_nonlabel[user * kNonLabelSlots + s]; break;
        case SlotSource::user_x_ad:
          id = static_cast<std::uint32_t>((user * 31u + ad_category * 17u) % d.nonlabel_vocab[s]);
          break;
        default:
          id = static_cast<std::uint32_t>(std::uniform_int_distribution<std::size_t>(0, d.nonlabel_vocab[s] - 1)(rng));
          break;
      }
      r.nonlabel_features[s] = id;
      nonlabel_logit += nonlabel_w[s][id];
    }
    logits[i] = logit + config.nonlabel_signal_strength * nonlabel_logit;
  }

  // Intercept so that the mean conversion probability hits positive_rate.
  double lo = -30.0, hi = 30.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    double mean = 0.0;
    for (double l : logits) mean += detail::sigmoid(l + mid);
    mean /= static_cast<double>(logits.size());
    (mean < config.positive_rate ? lo : hi) = mid;
  }
  const double bias = 0.5 * (lo + hi);
  std::exponential_distribution<double> delay(1.0 / 86400.0);
  for (std::size_t i = 0; i < config.n_samples; ++i) {
    SampleRecord& r = d.records[i];
    r.label = uniform01(rng) < detail::sigmoid(logits[i] + bias) ? 1 : 0;
    r.conv_ts = r.label == 1 ? r.click_ts + static_cast<std::int64_t>(delay(rng)) : -1;
  }

  std::vector<std::size_t> order(d.records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return d.records[a].click_ts < d.records[b].click_ts;
  });
  std::vector<SampleRecord> sorted;
  sorted.reserve(order.size());
  if (true_probability != nullptr) true_probability->clear();
  for (std::size_t i : order) {
    sorted.push_back(std::move(d.records[i]));
    if (true_probability != nullptr) true_probability->push_back(detail::sigmoid(logits[i] + bias));
  }
  d.records = std::move(sorted);
  char buf[32];
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "s%08zu", i);
    d.records[i].sample_id = buf;
  }
  d.role = DatasetRole::aligned;
  return d;
}

}  // namespace vflsim
