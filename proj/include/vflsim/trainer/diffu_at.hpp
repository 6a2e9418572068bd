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
#include <optional>
#include <string>
#include <vector>

#include "vflsim/genmodel/diffusion.hpp"
#include "vflsim/genmodel/heuristic.hpp"
#include "vflsim/protocol/session.hpp"

namespace vflsim {

enum class Synthesizer { diffusion, heuristic };

inline Synthesizer parse_synthesizer(const std::string& s) {
  if (s == "diffusion") return Synthesizer::diffusion;
  if (s == "heuristic") return Synthesizer::heuristic;
  throw ConfigError("unknown synthesizer '" + s + "'");
}

// Label-party unaligned samples with a synthesized h_N attached.
struct AugmentedUnalignedSet {
  LabelView samples;
  Tensor h_nonlabel;  // cut_dim x n
  std::size_t dropped = 0;

  std::size_t size() const { return samples.size(); }
};

inline constexpr std::size_t kRepresentChunk = 4096;

// h_L over all rows of the view, in chunks.
inline Tensor represent_all(const LabelParty& label, const LabelView& v) {
  Tensor out(label.repr_dim(), v.size());
  for (std::size_t start = 0; start < v.size(); start += kRepresentChunk) {
    std::vector<std::size_t> rows(std::min(kRepresentChunk, v.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    const Tensor h = label.represent(v.batch(rows));
    for (std::size_t k = 0; k < h.rows(); ++k)
      for (std::size_t j = 0; j < rows.size(); ++j) out(k, start + j) = h(k, j);
  }
  return out;
}

// h_N over all aligned rows as received by the label party.
inline Tensor received_embeddings(const NonLabelParty& nonlabel, const NonLabelView& nv) {
  Tensor out(nonlabel.cut_dim(), nv.size());
  for (std::size_t start = 0; start < nv.size(); start += kRepresentChunk) {
    std::vector<std::size_t> rows(std::min(kRepresentChunk, nv.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    const Tensor h = transmit_embeddings(nonlabel, nv, rows);
    for (std::size_t k = 0; k < h.rows(); ++k)
      for (std::size_t j = 0; j < rows.size(); ++j) out(k, start + j) = h(k, j);
  }
  return out;
}

// (h_N, h_L, y) of the aligned samples under a pretrained model.
inline DiffusionPairs make_diffusion_pairs(const VflModel& pretrained, const NonLabelView& nv, const LabelView& lv) {
  return DiffusionPairs{received_embeddings(pretrained.nonlabel, nv), represent_all(pretrained.label, lv), lv.labels};
}

inline AugmentedUnalignedSet build_unaligned_set(const LabelView& unaligned, const LabelParty& pretrained_label,
                                                 const DiffusionModel& model, std::uint64_t seed) {
  AugmentedUnalignedSet s;
  s.samples = unaligned;
  if (unaligned.size() == 0) {
    s.h_nonlabel = Tensor(model.cut_dim, 0);
    return s;
  }
  s.h_nonlabel = sample_embeddings(model, unaligned.labels, represent_all(pretrained_label, unaligned), seed);
  return s;
}

// Samples whose user has no aligned sample are dropped and counted.
inline AugmentedUnalignedSet build_unaligned_set(const LabelView& unaligned, const EmbeddingCache& cache) {
  std::vector<std::size_t> keep;
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < unaligned.size(); ++i) {
    if (auto h = heuristic_embedding(unaligned.user_ids[i], cache)) {
      keep.push_back(i);
      rows.push_back(std::move(*h));
    }
  }
  AugmentedUnalignedSet s;
  s.samples = select_rows(unaligned, keep);
  s.dropped = unaligned.size() - keep.size();
  s.h_nonlabel = Tensor(cache.dim(), keep.size());
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (std::size_t k = 0; k < cache.dim(); ++k) s.h_nonlabel(k, j) = rows[j][k];
  return s;
}

inline double aligned_probability(std::size_t n_aligned, std::size_t n_unaligned) {
  if (n_aligned + n_unaligned == 0) throw ValidationError("aligned_probability: both sets empty");
  return static_cast<double>(n_aligned) / static_cast<double>(n_aligned + n_unaligned);
}

// Draws the branch for each iteration: aligned when u <= p, u ~ U(0,1).
class BranchSampler {
 public:
  BranchSampler(double p, std::uint64_t seed) : p_(p), rng_(make_rng(seed, 0xa17)) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("branch sampler: p must lie in [0, 1]");
  }
  bool next_is_aligned() { return uniform01(rng_) <= p_; }
  double p() const { return p_; }

 private:
  double p_;
  Rng rng_;
};

struct AlternativeLog {
  std::vector<double> federated_losses;
  std::vector<double> local_losses;
  std::size_t iterations = 0;
  std::size_t aligned_iterations = 0;
  double p = 1.0;
};

// Alternates federated protocol steps on aligned batches with local-branch
// steps on synthesized unaligned batches until the aligned stream of
// config.epochs is exhausted. The unaligned stream reshuffles and cycles.
inline AlternativeLog alternative_train(VflModel& model, const NonLabelView& nv, const LabelView& lv,
                                        const AugmentedUnalignedSet& unaligned, const TrainConfig& config,
                                        ProtocolSession::Observer observer = {}) {
  if (lv.size() == 0) throw ValidationError("alternative_train: empty aligned data");
  if (unaligned.h_nonlabel.cols() != unaligned.size()) {
    throw DimensionError("alternative_train: synthesized embeddings do not match the unaligned samples");
  }
  const bool use_unaligned = unaligned.size() >= 2;
  AlternativeLog log;
  log.p = use_unaligned ? aligned_probability(lv.size(), unaligned.size()) : 1.0;
  BranchSampler sampler(log.p, config.seed);
  ProtocolSession session(model.nonlabel, nv, model.label, lv, config, std::move(observer));

  std::vector<std::vector<std::size_t>> local_batches;
  std::size_t local_next = 0;
  std::size_t local_cycle = 0;
  while (!session.done()) {
    ++log.iterations;
    if (sampler.next_is_aligned()) {
      ++log.aligned_iterations;
      log.federated_losses.push_back(session.step());
      continue;
    }
    if (local_next == local_batches.size()) {
      local_batches = epoch_batches(unaligned.size(), config.batch_size, config.seed ^ 0x5eedu, local_cycle++);
      local_next = 0;
    }
    const auto& rows = local_batches[local_next++];
    const Tensor h = gather_columns(unaligned.h_nonlabel, rows);
    const auto labels = unaligned.samples.batch_labels(rows);
    LabelTape tape = model.label.forward(Branch::local, h, unaligned.samples.batch(rows), labels);
    model.label.apply(Branch::local, model.label.backward(tape));
    log.local_losses.push_back(tape.loss.loss);
    if (config.metrics_log != nullptr) {
      nlohmann::json line{{"step", log.iterations - 1}, {"branch", "local"}, {"loss", tape.loss.loss}};
      *config.metrics_log << line.dump() << '\n';
    }
  }
  session.finish();
  return log;
}

struct DiffuAtConfig {
  TrainConfig pretrain{};
  TrainConfig final{};
  DiffusionConfig diffusion{};
  Synthesizer synthesizer = Synthesizer::diffusion;
  // Start the final branches from fresh weights instead of the pretrained ones.
  bool fresh_init = false;
  std::uint64_t sample_seed = 7;
};

struct DiffuAtResult {
  VflModel model;  // federated branch only; the local head is dropped
  AlternativeLog alternative;
  std::vector<double> diffusion_losses;
  std::optional<DiffusionModel> diffusion;
  AugmentedUnalignedSet augmented;
};

// Lines after pretraining: synthesize h_N for the unaligned samples, then
// train alternately. `pretrained` is the vanilla model from the same
// aligned data.
inline DiffuAtResult diffu_at(const VflModel& pretrained, const NonLabelView& nv, const LabelView& lv,
                              const LabelView& unaligned, const DiffuAtConfig& config,
                              ProtocolSession::Observer observer = {}) {
  if (lv.size() == 0) throw ValidationError("diffu_at: empty aligned data");
  DiffuAtResult res{pretrained, {}, {}, std::nullopt, {}};
  AugmentedUnalignedSet& aug = res.augmented;
  if (unaligned.size() == 0) {
    aug.h_nonlabel = Tensor(pretrained.nonlabel.cut_dim(), 0);
  } else if (config.synthesizer == Synthesizer::diffusion) {
    const DiffusionPairs pairs = make_diffusion_pairs(pretrained, nv, lv);
    TrainedDiffusion td = train_diffusion(pairs, config.diffusion);
    aug = build_unaligned_set(unaligned, pretrained.label, td.model, config.sample_seed);
    res.diffusion_losses = std::move(td.losses);
    res.diffusion = std::move(td.model);
  } else {
    const EmbeddingCache cache = EmbeddingCache::build(lv.user_ids, received_embeddings(pretrained.nonlabel, nv));
    aug = build_unaligned_set(unaligned, cache);
  }

  if (config.fresh_init) res.model = make_vfl_model(nv, lv, config.final);
  res.model.label.copy_federated_head_to_local();
  res.alternative = alternative_train(res.model, nv, lv, aug, config.final, std::move(observer));
  res.model.label.drop_local_head();
  return res;
}

// Full pipeline including vanilla pretraining.
inline DiffuAtResult diffu_at(const NonLabelView& nv, const LabelView& lv, const LabelView& unaligned,
                              const DiffuAtConfig& config) {
  if (lv.size() == 0) throw ValidationError("diffu_at: empty aligned data");
  const TrainedVfl pre = train_vanilla(nv, lv, config.pretrain);
  return diffu_at(pre.model, nv, lv, unaligned, config);
}

}  // namespace vflsim
