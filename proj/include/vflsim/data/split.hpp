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
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "vflsim/data/dataset.hpp"
#include "vflsim/nncore/rng.hpp"

namespace vflsim {

// click_ts < cutoff goes to train, everything else to test.
inline std::pair<Dataset, Dataset> split_by_timestamp(const Dataset& d, std::int64_t cutoff_ts) {
  Dataset train, test;
  train.nonlabel_vocab = test.nonlabel_vocab = d.nonlabel_vocab;
  train.label_vocab = test.label_vocab = d.label_vocab;
  train.role = d.role;
  test.role = DatasetRole::test;
  for (const auto& r : d.records) (r.click_ts < cutoff_ts ? train : test).records.push_back(r);
  return {std::move(train), std::move(test)};
}

struct AlignedPartition {
  Dataset aligned;
  Dataset unaligned;  // non-label features erased
};

// Seeded split of the training set into the aligned fraction and the
// label-party-only remainder. Both keep the input's record order.
inline AlignedPartition partition_aligned(const Dataset& train, double aligned_fraction,
                                          std::uint64_t seed) {
  if (!(aligned_fraction > 0.0 && aligned_fraction < 1.0)) {
    throw ValidationError("partition_aligned: fraction must be in (0,1)");
  }
  const std::size_t n = train.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(seed, 0xa119);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_aligned = static_cast<std::size_t>(std::llround(aligned_fraction * static_cast<double>(n)));
  std::vector<bool> is_aligned(n, false);
  for (std::size_t i = 0; i < n_aligned; ++i) is_aligned[idx[i]] = true;

  AlignedPartition p;
  for (Dataset* ds : {&p.aligned, &p.unaligned}) {
    ds->nonlabel_vocab = train.nonlabel_vocab;
    ds->label_vocab = train.label_vocab;
  }
  p.aligned.role = DatasetRole::aligned;
  p.unaligned.role = DatasetRole::unaligned_label_only;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_aligned[i]) {
      p.aligned.records.push_back(train.records[i]);
    } else {
      SampleRecord r = train.records[i];
      r.erase_nonlabel();
      p.unaligned.records.push_back(std::move(r));
    }
  }
  return p;
}

}  // namespace vflsim
