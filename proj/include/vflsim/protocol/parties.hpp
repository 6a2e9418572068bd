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
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vflsim/data/dataset.hpp"
#include "vflsim/nncore/adam.hpp"
#include "vflsim/nncore/archive.hpp"
#include "vflsim/nncore/batchnorm.hpp"
#include "vflsim/nncore/loss.hpp"
#include "vflsim/nncore/tower.hpp"

namespace vflsim {

struct Architecture {
  std::size_t embed_dim = kDefaultEmbeddingDim;
  std::vector<std::size_t> nonlabel_hidden = {128, 32};  // last = cut width
  std::vector<std::size_t> label_hidden = {256, 128};
  std::vector<std::size_t> top_hidden = {};  // hidden widths of the top network; empty = one linear layer
  std::size_t classes = 2;

  std::size_t cut_dim() const { return nonlabel_hidden.back(); }
  std::size_t label_repr_dim() const { return label_hidden.back(); }
};

namespace detail {
// ReLU on hidden layers, identity on the output of the non-label tower.
inline std::vector<Activation> tower_activations(std::size_t layers, bool linear_output) {
  std::vector<Activation> a(layers, Activation::relu);
  if (linear_output && layers > 0) a.back() = Activation::identity;
  return a;
}

inline void export_tower(const FeatureTower& t, const std::string& prefix, TensorArchive& a) {
  for (std::size_t s = 0; s < t.tables().size(); ++s)
    a.tensors[prefix + "table" + std::to_string(s)] = t.tables()[s].rows;
  for (std::size_t i = 0; i < t.layers().size(); ++i) {
    a.tensors[prefix + "layer" + std::to_string(i) + ".w"] = t.layers()[i].weight;
    a.tensors[prefix + "layer" + std::to_string(i) + ".b"] = t.layers()[i].bias;
  }
}

inline void import_tower(FeatureTower& t, const std::string& prefix, const TensorArchive& a) {
  auto assign = [&](Tensor& dst, const std::string& name) {
    const Tensor& src = a.at(name);
    if (!src.same_shape(dst)) throw DecodeError("archive tensor '" + name + "' has wrong shape");
    dst = src;
  };
  for (std::size_t s = 0; s < t.tables().size(); ++s)
    assign(t.tables()[s].rows, prefix + "table" + std::to_string(s));
  for (std::size_t i = 0; i < t.layers().size(); ++i) {
    assign(t.layers()[i].weight, prefix + "layer" + std::to_string(i) + ".w");
    assign(t.layers()[i].bias, prefix + "layer" + std::to_string(i) + ".b");
  }
}
}  // namespace detail

// Publisher side: embedding tables and the DNN producing h_N. Holds no
// labels and no label-party features.
class NonLabelParty {
 public:
  NonLabelParty(std::span<const std::size_t> vocab, const Architecture& arch,
                const AdamConfig& adam, std::uint64_t seed) {
    Rng rng = make_rng(seed, 0x4e);
    const auto acts = detail::tower_activations(arch.nonlabel_hidden.size(), true);
    tower_ = FeatureTower::make(vocab, arch.embed_dim, arch.nonlabel_hidden, acts, rng);
    const auto params = std::as_const(tower_).parameters();
    adam_ = adam_init(params, adam);
  }

  std::size_t cut_dim() const { return tower_.output_dim(); }
  FeatureTower& tower() { return tower_; }
  const FeatureTower& tower() const { return tower_; }
  const AdamState& optimizer() const { return adam_; }

  // Training forward; keeps what backward needs.
  Tensor forward(FeatureBatch batch) {
    pending_.emplace();
    Tensor h = tower_.forward(batch, &pending_->cache);
    pending_->batch = std::move(batch);
    return h;
  }

  // Backward from the received cut gradient (d x B) and one Adam step.
  void apply_cut_gradient(const Tensor& grad_h) {
    if (!pending_) throw ProtocolError("non-label party: gradient without a pending forward");
    const auto grads = tower_.backward(pending_->batch, pending_->cache, grad_h);
    const auto params = tower_.parameters();
    const auto gs = FeatureTower::gradients(grads);
    adam_step(params, gs, adam_);
    pending_.reset();
  }

  Tensor infer(const FeatureBatch& batch) const { return tower_.forward(batch); }

  void export_to(TensorArchive& a) const { detail::export_tower(tower_, "nonlabel/", a); }
  void import_from(const TensorArchive& a) { detail::import_tower(tower_, "nonlabel/", a); }

 private:
  struct Pending {
    FeatureBatch batch;
    FeatureTower::Cache cache;
  };
  FeatureTower tower_;
  AdamState adam_;
  std::optional<Pending> pending_;
};

enum class Branch { federated = 0, local = 1 };

// Everything a label-party forward pass produced, for backward.
struct LabelTape {
  Branch branch = Branch::federated;
  Tensor h_nonlabel;  // cut_dim x B, as received
  FeatureBatch x;
  FeatureTower::Cache bottom;
  BatchNormCache bn;
  std::vector<Tensor> top;  // top[0] = [h_N; BN(h_L)], then each layer's output
  LossAndGrad loss;
};

struct LabelGrads {
  Tensor h_nonlabel;  // g = dL/dh_N, cut_dim x B
  FeatureTower::Grads bottom;
  BatchNormGrads bn;
  std::vector<DenseGrads> top;
};

// Advertiser side. The embedding tables and bottom DNN are shared by the
// federated and local branches; each branch owns its batch normalization
// over h_L and its top network.
class LabelParty {
 public:
  struct Head {
    BatchNormLayer bn;
    std::vector<DenseLayer> top;
    AdamState adam;
  };

  LabelParty(std::span<const std::size_t> vocab, const Architecture& arch,
             const AdamConfig& adam, std::uint64_t seed)
      : cut_dim_(arch.cut_dim()) {
    Rng rng = make_rng(seed, 0x4c);
    const auto acts = detail::tower_activations(arch.label_hidden.size(), false);
    bottom_ = FeatureTower::make(vocab, arch.embed_dim, arch.label_hidden, acts, rng);
    bottom_adam_ = adam_init(std::as_const(bottom_).parameters(), adam);
    const std::size_t repr = bottom_.output_dim();
    for (Head& h : heads_) {
      h.bn = BatchNormLayer::make(repr);
      std::size_t in = cut_dim_ + repr;
      for (std::size_t width : arch.top_hidden) {
        h.top.push_back(DenseLayer::glorot(in, width, Activation::relu, rng));
        in = width;
      }
      h.top.push_back(DenseLayer::glorot(in, arch.classes, Activation::identity, rng));
      h.adam = adam_init(head_params(std::as_const(h)), adam);
    }
  }

  std::size_t cut_dim() const { return cut_dim_; }
  std::size_t repr_dim() const { return bottom_.output_dim(); }
  FeatureTower& bottom() { return bottom_; }
  const FeatureTower& bottom() const { return bottom_; }
  Head& head(Branch b) { return heads_[static_cast<int>(b)]; }
  const Head& head(Branch b) const { return heads_[static_cast<int>(b)]; }
  const AdamState& bottom_optimizer() const { return bottom_adam_; }

  // h_L = f_L^(b)(x_L).
  Tensor represent(const FeatureBatch& x) const { return bottom_.forward(x); }

  // Training-mode forward. Running statistics of the branch's batch norm
  // are updated only when update_running_stats is set.
  LabelTape forward(Branch branch, const Tensor& h_nonlabel, FeatureBatch x,
                    std::span<const int> labels, bool update_running_stats = true) {
    if (h_nonlabel.rows() != cut_dim_ || h_nonlabel.cols() != x.batch || labels.size() != x.batch) {
      throw DimensionError("label party forward: batch shapes disagree");
    }
    LabelTape tape;
    tape.branch = branch;
    tape.h_nonlabel = h_nonlabel;
    Tensor h_l = bottom_.forward(x, &tape.bottom);
    Head& h = head(branch);
    BatchNormLayer scratch = h.bn;
    BatchNormLayer& bn = update_running_stats ? h.bn : scratch;
    Tensor normed = batchnorm_forward(bn, h_l, Mode::train, &tape.bn);
    const Tensor* parts[] = {&tape.h_nonlabel, &normed};
    tape.top.push_back(vstack(parts));
    for (const auto& layer : h.top) tape.top.push_back(dense_forward(layer, tape.top.back()));
    tape.loss = softmax_cross_entropy(tape.top.back(), onehot_binary(labels));
    tape.x = std::move(x);
    return tape;
  }

  LabelGrads backward(const LabelTape& tape) const {
    const Head& h = head(tape.branch);
    LabelGrads g;
    g.top.resize(h.top.size());
    Tensor up = tape.loss.grad;
    for (std::size_t i = h.top.size(); i-- > 0;) {
      g.top[i] = dense_backward(h.top[i], tape.top[i], tape.top[i + 1], up);
      up = g.top[i].input;
    }
    g.h_nonlabel = row_block(up, 0, cut_dim_);
    const Tensor d_normed = row_block(up, cut_dim_, repr_dim());
    g.bn = batchnorm_backward(h.bn, tape.bn, d_normed);
    g.bottom = bottom_.backward(tape.x, tape.bottom, g.bn.input);
    return g;
  }

  // Adam on the shared bottom and on the branch's own head.
  void apply(Branch branch, const LabelGrads& g) {
    {
      const auto params = bottom_.parameters();
      const auto gs = FeatureTower::gradients(g.bottom);
      adam_step(params, gs, bottom_adam_);
    }
    Head& h = head(branch);
    std::vector<const Tensor*> gs{&g.bn.gamma, &g.bn.beta};
    for (const auto& t : g.top) {
      gs.push_back(&t.weight);
      gs.push_back(&t.bias);
    }
    adam_step(head_params(h), gs, h.adam);
  }

  // Positive-class probabilities in inference mode.
  std::vector<double> predict(Branch branch, const Tensor& h_nonlabel, const FeatureBatch& x) const {
    const Head& h = head(branch);
    Tensor h_l = bottom_.forward(x);
    BatchNormLayer bn = h.bn;
    Tensor normed = batchnorm_forward(bn, h_l, Mode::infer);
    const Tensor* parts[] = {&h_nonlabel, &normed};
    Tensor act = vstack(parts);
    for (const auto& layer : h.top) act = dense_forward(layer, act);
    const Tensor probs = softmax(act);
    std::vector<double> out(probs.cols());
    for (std::size_t j = 0; j < probs.cols(); ++j) out[j] = probs(1, j);
    return out;
  }

  void export_to(TensorArchive& a) const {
    detail::export_tower(bottom_, "label/bottom/", a);
    for (int b = 0; b < 2; ++b) {
      const std::string p = b == 0 ? "label/federated/" : "label/local/";
      const Head& h = heads_[b];
      a.tensors[p + "bn.gamma"] = h.bn.gamma;
      a.tensors[p + "bn.beta"] = h.bn.beta;
      a.tensors[p + "bn.running_mean"] = h.bn.running_mean;
      a.tensors[p + "bn.running_var"] = h.bn.running_var;
      for (std::size_t i = 0; i < h.top.size(); ++i) {
        a.tensors[p + "top" + std::to_string(i) + ".w"] = h.top[i].weight;
        a.tensors[p + "top" + std::to_string(i) + ".b"] = h.top[i].bias;
      }
    }
  }

  void import_from(const TensorArchive& a, bool include_local = true) {
    detail::import_tower(bottom_, "label/bottom/", a);
    for (int b = 0; b < (include_local ? 2 : 1); ++b) {
      const std::string p = b == 0 ? "label/federated/" : "label/local/";
      Head& h = heads_[b];
      auto assign = [&](Tensor& dst, const std::string& name) {
        const Tensor& src = a.at(p + name);
        if (!src.same_shape(dst)) throw DecodeError("archive tensor '" + p + name + "' has wrong shape");
        dst = src;
      };
      assign(h.bn.gamma, "bn.gamma");
      assign(h.bn.beta, "bn.beta");
      assign(h.bn.running_mean, "bn.running_mean");
      assign(h.bn.running_var, "bn.running_var");
      for (std::size_t i = 0; i < h.top.size(); ++i) {
        assign(h.top[i].weight, "top" + std::to_string(i) + ".w");
        assign(h.top[i].bias, "top" + std::to_string(i) + ".b");
      }
    }
  }

  // Copies the federated head (weights and running stats) into the local
  // head and resets its optimizer.
  void copy_federated_head_to_local() {
    Head& local = head(Branch::local);
    const AdamConfig cfg = local.adam.config;
    local.bn = head(Branch::federated).bn;
    local.top = head(Branch::federated).top;
    local.adam = adam_init(head_params(std::as_const(local)), cfg);
  }

  // Discards the local head; inference never reads it.
  void drop_local_head() {
    Head& local = head(Branch::local);
    const AdamConfig cfg = local.adam.config;
    local.bn = BatchNormLayer::make(repr_dim());
    for (auto& layer : local.top) {
      layer.weight.fill(0.0);
      layer.bias.fill(0.0);
    }
    local.adam = adam_init(head_params(std::as_const(local)), cfg);
  }

 private:
  static std::vector<const Tensor*> head_params(const Head& h) {
    std::vector<const Tensor*> p{&h.bn.gamma, &h.bn.beta};
    for (const auto& l : h.top) {
      p.push_back(&l.weight);
      p.push_back(&l.bias);
    }
    return p;
  }
  static std::vector<Tensor*> head_params(Head& h) {
    std::vector<Tensor*> p{&h.bn.gamma, &h.bn.beta};
    for (auto& l : h.top) {
      p.push_back(&l.weight);
      p.push_back(&l.bias);
    }
    return p;
  }

  std::size_t cut_dim_;
  FeatureTower bottom_;
  AdamState bottom_adam_;
  std::array<Head, 2> heads_;
};

}  // namespace vflsim
