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
#include <numeric>
#include <vector>

#include "vflsim/data/generator.hpp"
#include "vflsim/data/views.hpp"

namespace fixture {

// A small fully aligned dataset and both parties' views of it.
struct Toy {
  vflsim::Dataset data;
  vflsim::NonLabelView nv;
  vflsim::LabelView lv;
};

inline Toy toy(std::uint64_t seed, std::size_t n, double positive_rate = 0.3) {
  vflsim::GeneratorConfig c;
  c.n_samples = n;
  c.n_users = 60;
  c.n_ads = 30;
  c.positive_rate = positive_rate;
  c.seed = seed;
  Toy t;
  t.data = vflsim::generate(c);
  t.nv = vflsim::make_nonlabel_view(t.data);
  t.lv = vflsim::make_label_view(t.data);
  return t;
}

inline std::vector<std::size_t> iota(std::size_t n, std::size_t start = 0) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), start);
  return v;
}

inline vflsim::NonLabelView nonlabel_rows(const vflsim::NonLabelView& v, const std::vector<std::size_t>& rows) {
  vflsim::NonLabelView out;
  out.vocab = v.vocab;
  for (auto r : rows) {
    out.ids.push_back(v.ids[r]);
    for (std::size_t s = 0; s < vflsim::kNonLabelSlots; ++s) out.features.push_back(v.features[r * vflsim::kNonLabelSlots + s]);
  }
  return out;
}

// The first n_aligned rows of a toy as aligned views, the rest as
// label-party-only samples.
struct Partitioned {
  vflsim::NonLabelView nv;
  vflsim::LabelView lv;
  vflsim::LabelView unaligned;
};

inline Partitioned partitioned(const Toy& t, std::size_t n_aligned) {
  const auto a = iota(n_aligned);
  const auto u = iota(t.lv.size() - n_aligned, n_aligned);
  return {nonlabel_rows(t.nv, a), vflsim::select_rows(t.lv, a), vflsim::select_rows(t.lv, u)};
}

}  // namespace fixture
