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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vflsim/data/dataset.hpp"
#include "vflsim/nncore/tower.hpp"

namespace vflsim {

// What the non-label party holds: ids and its own feature slots.
struct NonLabelView {
  std::vector<std::string> ids;
  std::vector<std::uint32_t> features;  // n x kNonLabelSlots, row-major
  std::array<std::size_t, kNonLabelSlots> vocab{};

  std::size_t size() const { return ids.size(); }

  FeatureBatch batch(std::span<const std::size_t> rows) const {
    FeatureBatch b{kNonLabelSlots, rows.size(), std::vector<std::uint32_t>(kNonLabelSlots * rows.size())};
    for (std::size_t s = 0; s < kNonLabelSlots; ++s)
      for (std::size_t j = 0; j < rows.size(); ++j)
        b.ids[s * rows.size() + j] = features[rows[j] * kNonLabelSlots + s];
    return b;
  }
};

// What the label party holds: ids, its feature slots, labels and user ids.
struct LabelView {
  std::vector<std::string> ids;
  std::vector<std::uint32_t> features;  // n x kLabelSlots, row-major
  std::vector<int> labels;
  std::vector<std::uint32_t> user_ids;
  std::array<std::size_t, kLabelSlots> vocab{};

  std::size_t size() const { return ids.size(); }

  FeatureBatch batch(std::span<const std::size_t> rows) const {
    FeatureBatch b{kLabelSlots, rows.size(), std::vector<std::uint32_t>(kLabelSlots * rows.size())};
    for (std::size_t s = 0; s < kLabelSlots; ++s)
      for (std::size_t j = 0; j < rows.size(); ++j)
        b.ids[s * rows.size() + j] = features[rows[j] * kLabelSlots + s];
    return b;
  }
  std::vector<int> batch_labels(std::span<const std::size_t> rows) const {
    std::vector<int> y;
    y.reserve(rows.size());
    for (auto r : rows) y.push_back(labels[r]);
    return y;
  }
};

namespace detail {
inline std::vector<const SampleRecord*> ordered_records(const Dataset& d,
                                                        std::span<const std::string> order) {
  std::vector<const SampleRecord*> out;
  if (order.empty()) {
    for (const auto& r : d.records) out.push_back(&r);
    return out;
  }
  std::unordered_map<std::string_view, const SampleRecord*> by_id;
  for (const auto& r : d.records) by_id.emplace(r.sample_id, &r);
  for (const auto& id : order) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw ValidationError("view: unknown sample id " + id);
    out.push_back(it->second);
  }
  return out;
}
}  // namespace detail

// Non-label view over `order` (or the dataset order when empty).
inline NonLabelView make_nonlabel_view(const Dataset& d, std::span<const std::string> order = {}) {
  NonLabelView v;
  v.vocab = d.nonlabel_vocab;
  for (const SampleRecord* r : detail::ordered_records(d, order)) {
    if (!r->has_nonlabel_features()) {
      throw ValidationError("non-label view: sample " + r->sample_id + " is not aligned");
    }
    v.ids.push_back(r->sample_id);
    for (const auto& f : r->nonlabel_features) v.features.push_back(*f);
  }
  return v;
}

inline LabelView make_label_view(const Dataset& d, std::span<const std::string> order = {}) {
  LabelView v;
  v.vocab = d.label_vocab;
  for (const SampleRecord* r : detail::ordered_records(d, order)) {
    v.ids.push_back(r->sample_id);
    v.features.insert(v.features.end(), r->label_features.begin(), r->label_features.end());
    v.labels.push_back(r->label);
    v.user_ids.push_back(r->user_id);
  }
  return v;
}

// Rows of `v` in the given order.
inline LabelView select_rows(const LabelView& v, std::span<const std::size_t> rows) {
  LabelView out;
  out.vocab = v.vocab;
  for (auto r : rows) {
    if (r >= v.size()) throw IndexError("label view: row out of range");
    out.ids.push_back(v.ids[r]);
    out.features.insert(out.features.end(), v.features.begin() + static_cast<std::ptrdiff_t>(r * kLabelSlots),
                        v.features.begin() + static_cast<std::ptrdiff_t>((r + 1) * kLabelSlots));
    out.labels.push_back(v.labels[r]);
    out.user_ids.push_back(v.user_ids[r]);
  }
  return out;
}

inline std::vector<std::string> sample_ids(const Dataset& d) {
  std::vector<std::string> ids;
  ids.reserve(d.size());
  for (const auto& r : d.records) ids.push_back(r.sample_id);
  return ids;
}

}  // namespace vflsim
