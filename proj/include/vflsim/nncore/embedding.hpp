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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include "vflsim/nncore/rng.hpp"
#include "vflsim/nncore/tensor.hpp"

namespace vflsim {

inline constexpr std::size_t kDefaultEmbeddingDim = 8;

struct EmbeddingTable {
  Tensor rows;  // vocab_size x dim

  std::size_t vocab_size() const { return rows.rows(); }
  std::size_t dim() const { return rows.cols(); }

  static EmbeddingTable glorot(std::size_t vocab, std::size_t dim, Rng& rng) {
    EmbeddingTable table{Tensor(vocab, dim)};
    const double limit = std::sqrt(6.0 / static_cast<double>(vocab + dim));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (double& v : table.rows.values()) v = u(rng);
    return table;
  }
};

namespace detail {
inline void check_index(const EmbeddingTable& table, std::uint32_t id) {
  if (id >= table.vocab_size()) {
    throw IndexError("embedding index " + std::to_string(id) +
                     " >= vocab size " + std::to_string(table.vocab_size()));
  }
}
}  // namespace detail

// Writes the looked-up rows as columns of out, starting at out row `offset`.
inline void embedding_forward_into(const EmbeddingTable& table,
                                   std::span<const std::uint32_t> ids, Tensor& out,
                                   std::size_t offset) {
  if (out.cols() != ids.size() || offset + table.dim() > out.rows()) {
    throw DimensionError("embedding_forward_into: output block out of range");
  }
  for (std::size_t j = 0; j < ids.size(); ++j) {
    detail::check_index(table, ids[j]);
    auto src = table.rows.row(ids[j]);
    for (std::size_t k = 0; k < table.dim(); ++k) out(offset + k, j) = src[k];
  }
}

// Gather: dim x B, column j is row ids[j] of the table.
inline Tensor embedding_forward(const EmbeddingTable& table,
                                std::span<const std::uint32_t> ids) {
  Tensor out(table.dim(), ids.size());
  embedding_forward_into(table, ids, out, 0);
  return out;
}

// Scatter-add rows [offset, offset + dim) of upstream into grad_table.
inline void embedding_backward_from(const EmbeddingTable& table,
                                    std::span<const std::uint32_t> ids,
                                    const Tensor& upstream, std::size_t offset,
                                    Tensor& grad_table) {
  if (!grad_table.same_shape(table.rows) || upstream.cols() != ids.size() ||
      offset + table.dim() > upstream.rows()) {
    throw DimensionError("embedding_backward: inconsistent shapes");
  }
  for (std::size_t j = 0; j < ids.size(); ++j) {
    detail::check_index(table, ids[j]);
    auto dst = grad_table.row(ids[j]);
    for (std::size_t k = 0; k < table.dim(); ++k) dst[k] += upstream(offset + k, j);
  }
}

inline void embedding_backward(const EmbeddingTable& table,
                               std::span<const std::uint32_t> ids,
                               const Tensor& upstream, Tensor& grad_table) {
  embedding_backward_from(table, ids, upstream, 0, grad_table);
}

}  // namespace vflsim
