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
#include <vector>

#include "vflsim/nncore/dense.hpp"
#include "vflsim/nncore/embedding.hpp"
#include "vflsim/nncore/tensor.hpp"

namespace vflsim {

// Categorical ids for a batch, slot-major: ids[slot * batch + j].
struct FeatureBatch {
  std::size_t slots = 0;
  std::size_t batch = 0;
  std::vector<std::uint32_t> ids;

  std::span<const std::uint32_t> slot(std::size_t s) const {
    return {ids.data() + s * batch, batch};
  }
};

// Embedding tables (one per slot) concatenated and fed through an MLP.
class FeatureTower {
 public:
  struct Cache {
    Tensor input;                // (slots * dim) x B
    std::vector<Tensor> outputs; // one per layer
  };
  struct Grads {
    std::vector<Tensor> tables;
    std::vector<DenseGrads> layers;
  };

  FeatureTower() = default;

  static FeatureTower make(std::span<const std::size_t> vocab_sizes, std::size_t embed_dim,
                           std::span<const std::size_t> hidden,
                           std::span<const Activation> activations, Rng& rng) {
    if (hidden.size() != activations.size()) {
      throw ValidationError("FeatureTower: one activation per layer required");
    }
    FeatureTower t;
    for (std::size_t v : vocab_sizes) {
      if (v == 0) throw ValidationError("FeatureTower: zero vocabulary");
      t.tables_.push_back(EmbeddingTable::glorot(v, embed_dim, rng));
    }
    std::size_t in = vocab_sizes.size() * embed_dim;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      t.layers_.push_back(DenseLayer::glorot(in, hidden[i], activations[i], rng));
      in = hidden[i];
    }
    return t;
  }

  std::size_t slots() const { return tables_.size(); }
  std::size_t embed_dim() const { return tables_.empty() ? 0 : tables_.front().dim(); }
  std::size_t input_dim() const { return slots() * embed_dim(); }
  std::size_t output_dim() const {
    return layers_.empty() ? input_dim() : layers_.back().out_dim();
  }

  std::vector<EmbeddingTable>& tables() { return tables_; }
  const std::vector<EmbeddingTable>& tables() const { return tables_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Tensor embed(const FeatureBatch& batch) const {
    if (batch.slots != slots()) throw DimensionError("FeatureTower: slot count mismatch");
    Tensor x(input_dim(), batch.batch);
    for (std::size_t s = 0; s < slots(); ++s)
      embedding_forward_into(tables_[s], batch.slot(s), x, s * embed_dim());
    return x;
  }

  Tensor forward(const FeatureBatch& batch, Cache* cache = nullptr) const {
    Tensor x = embed(batch);
    std::vector<Tensor> outs;
    const Tensor* cur = &x;
    for (const DenseLayer& layer : layers_) {
      outs.push_back(dense_forward(layer, *cur));
      cur = &outs.back();
    }
    Tensor result = outs.empty() ? x : outs.back();
    if (cache != nullptr) *cache = Cache{std::move(x), std::move(outs)};
    return result;
  }

  Grads backward(const FeatureBatch& batch, const Cache& cache, const Tensor& upstream) const {
    Grads g;
    g.layers.resize(layers_.size());
    Tensor grad = upstream;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const Tensor& in = i == 0 ? cache.input : cache.outputs[i - 1];
      g.layers[i] = dense_backward(layers_[i], in, cache.outputs[i], grad);
      grad = std::move(g.layers[i].input);
    }
    for (std::size_t s = 0; s < slots(); ++s) {
      g.tables.emplace_back(tables_[s].vocab_size(), tables_[s].dim());
      embedding_backward_from(tables_[s], batch.slot(s), grad, s * embed_dim(), g.tables[s]);
    }
    return g;
  }

  // Tables first, then (weight, bias) per layer. Order matches gradients().
  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> p;
    for (auto& t : tables_) p.push_back(&t.rows);
    for (auto& l : layers_) {
      p.push_back(&l.weight);
      p.push_back(&l.bias);
    }
    return p;
  }
  std::vector<const Tensor*> parameters() const {
    std::vector<const Tensor*> p;
    for (const auto& t : tables_) p.push_back(&t.rows);
    for (const auto& l : layers_) {
      p.push_back(&l.weight);
      p.push_back(&l.bias);
    }
    return p;
  }
  static std::vector<const Tensor*> gradients(const Grads& g) {
    std::vector<const Tensor*> p;
    for (const auto& t : g.tables) p.push_back(&t);
    for (const auto& l : g.layers) {
      p.push_back(&l.weight);
      p.push_back(&l.bias);
    }
    return p;
  }

 private:
  std::vector<EmbeddingTable> tables_;
  std::vector<DenseLayer> layers_;
};

}  // namespace vflsim
