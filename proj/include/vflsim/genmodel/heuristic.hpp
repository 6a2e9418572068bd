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
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "vflsim/errors.hpp"
#include "vflsim/nncore/tensor.hpp"

namespace vflsim {

// Per-user running sum of federated embeddings over aligned samples.
class EmbeddingCache {
 public:
  struct Slot {
    std::vector<double> sum;
    std::size_t count = 0;
  };

  EmbeddingCache() = default;
  explicit EmbeddingCache(std::size_t dim) : dim_(dim) {}

  // h is dim x n, one column per user id.
  static EmbeddingCache build(std::span<const std::uint32_t> user_ids, const Tensor& h) {
    if (h.cols() != user_ids.size()) throw DimensionError("embedding cache: id count mismatch");
    EmbeddingCache c(h.rows());
    std::vector<double> col(h.rows());
    for (std::size_t j = 0; j < user_ids.size(); ++j) {
      for (std::size_t k = 0; k < h.rows(); ++k) col[k] = h(k, j);
      c.add(user_ids[j], col);
    }
    return c;
  }

  void add(std::uint32_t user, std::span<const double> h) {
    if (h.size() != dim_) throw DimensionError("embedding cache: wrong embedding width");
    Slot& s = slots_[user];
    if (s.sum.empty()) s.sum.assign(dim_, 0.0);
    for (std::size_t k = 0; k < dim_; ++k) s.sum[k] += h[k];
    ++s.count;
  }

  std::size_t dim() const { return dim_; }
  std::size_t users() const { return slots_.size(); }
  const Slot* find(std::uint32_t user) const {
    auto it = slots_.find(user);
    return it == slots_.end() ? nullptr : &it->second;
  }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::uint32_t, Slot> slots_;
};

// Mean embedding of the user's aligned samples, or nothing for an unseen user.
inline std::optional<std::vector<double>> heuristic_embedding(std::uint32_t user, const EmbeddingCache& cache) {
  const auto* s = cache.find(user);
  if (s == nullptr) return std::nullopt;
  std::vector<double> out(s->sum);
  for (double& v : out) v /= static_cast<double>(s->count);
  return out;
}

}  // namespace vflsim
