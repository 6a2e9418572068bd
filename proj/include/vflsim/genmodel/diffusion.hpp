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
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vflsim/genmodel/schedule.hpp"
#include "vflsim/nncore/adam.hpp"
#include "vflsim/nncore/archive.hpp"
#include "vflsim/nncore/dense.hpp"
#include "vflsim/nncore/loss.hpp"

namespace vflsim {

struct DiffusionConfig {
  std::size_t T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::size_t time_dim = 32;
  std::vector<std::size_t> hidden{256, 256};
  std::size_t steps = 5000;
  std::size_t batch_size = 256;
  AdamConfig adam{};
  std::uint64_t seed = 1;

  void validate() const {
    if (hidden.empty()) throw ValidationError("diffusion: at least one hidden layer");
    if (batch_size == 0) throw ValidationError("diffusion: batch_size must be positive");
    if (time_dim < 2 || time_dim % 2 != 0) throw ValidationError("diffusion: time_dim must be even");
  }
};

// Training pairs from aligned samples: h_N (cut x n), h_L (repr x n), y.
struct DiffusionPairs {
  Tensor h_nonlabel;
  Tensor h_label;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  void validate() const {
    if (labels.empty()) throw ValidationError("diffusion: no training pairs");
    if (h_nonlabel.cols() != labels.size() || h_label.cols() != labels.size()) {
      throw DimensionError("diffusion: pair columns disagree");
    }
  }
};

// Per-feature affine standardization; features are rows.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Tensor& x) {
    Standardizer s;
    s.mean.assign(x.rows(), 0.0);
    s.scale.assign(x.rows(), 1.0);
    const double n = static_cast<double>(x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      double m = 0.0;
      for (double v : x.row(r)) m += v;
      m /= n;
      double var = 0.0;
      for (double v : x.row(r)) var += (v - m) * (v - m);
      var /= n;
      s.mean[r] = m;
      s.scale[r] = var > 1e-12 ? std::sqrt(var) : 1.0;
    }
    return s;
  }

  Tensor apply(const Tensor& x) const {
    if (x.rows() != mean.size()) throw DimensionError("standardizer: feature count mismatch");
    Tensor out = x;
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (double& v : out.row(r)) v = (v - mean[r]) / scale[r];
    return out;
  }

  Tensor invert(const Tensor& x) const {
    if (x.rows() != mean.size()) throw DimensionError("standardizer: feature count mismatch");
    Tensor out = x;
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (double& v : out.row(r)) v = v * scale[r] + mean[r];
    return out;
  }
};

// The denoiser reads [y; h_L; h_t; enc(t)] and outputs an estimate of the
// clean h_N block; the reverse mean is then the posterior mean evaluated at
// that estimate, mu = coef_zt(t) h_t + coef_z0(t) h0_hat. Both embedding
// blocks are standardized with statistics of the training pairs.
struct DiffusionModel {
  NoiseSchedule schedule;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::size_t time_dim = 32;
  std::size_t cut_dim = 0;
  std::size_t repr_dim = 0;
  std::vector<DenseLayer> layers;
  Standardizer nonlabel_stats;
  Standardizer label_stats;

  static constexpr std::size_t kClasses = 2;

  std::size_t input_dim() const { return kClasses + repr_dim + cut_dim + time_dim; }
  std::size_t T() const { return schedule.T(); }

  // Columns of h_t and h_L are standardized; ts gives each column's step.
  Tensor build_input(std::span<const int> labels, const Tensor& label_std, const Tensor& h_t,
                     std::span<const std::size_t> ts) const {
    const std::size_t n = labels.size();
    Tensor in(input_dim(), n);
    std::size_t last_t = 0;
    std::vector<double> enc;
    for (std::size_t j = 0; j < n; ++j) {
      in(0, j) = labels[j] == 0 ? 1.0 : 0.0;
      in(1, j) = labels[j] == 1 ? 1.0 : 0.0;
      std::size_t r = kClasses;
      for (std::size_t k = 0; k < repr_dim; ++k) in(r++, j) = label_std(k, j);
      for (std::size_t k = 0; k < cut_dim; ++k) in(r++, j) = h_t(k, j);
      if (ts[j] != last_t) {
        enc = timestep_encoding(ts[j], time_dim);
        last_t = ts[j];
      }
      for (std::size_t k = 0; k < time_dim; ++k) in(r++, j) = enc[k];
    }
    return in;
  }

  // acts[0] is the input; acts.back() the output.
  std::vector<Tensor> forward(Tensor input) const {
    std::vector<Tensor> acts;
    acts.reserve(layers.size() + 1);
    acts.push_back(std::move(input));
    for (const auto& l : layers) acts.push_back(dense_forward(l, acts.back()));
    return acts;
  }

  std::vector<const Tensor*> parameters() const {
    std::vector<const Tensor*> p;
    for (const auto& l : layers) {
      p.push_back(&l.weight);
      p.push_back(&l.bias);
    }
    return p;
  }
  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> p;
    for (auto& l : layers) {
      p.push_back(&l.weight);
      p.push_back(&l.bias);
    }
    return p;
  }
};

inline DiffusionModel make_diffusion_model(const DiffusionPairs& pairs, const DiffusionConfig& config) {
  config.validate();
  pairs.validate();
  DiffusionModel m;
  m.schedule = NoiseSchedule::linear(config.T, config.beta_start, config.beta_end);
  m.beta_start = config.beta_start;
  m.beta_end = config.beta_end;
  m.time_dim = config.time_dim;
  m.cut_dim = pairs.h_nonlabel.rows();
  m.repr_dim = pairs.h_label.rows();
  m.nonlabel_stats = Standardizer::fit(pairs.h_nonlabel);
  m.label_stats = Standardizer::fit(pairs.h_label);
  Rng rng = make_rng(config.seed, 0xd1f0);
  std::size_t in = m.input_dim();
  for (std::size_t h : config.hidden) {
    m.layers.push_back(DenseLayer::glorot(in, h, Activation::relu, rng));
    in = h;
  }
  m.layers.push_back(DenseLayer::glorot(in, m.cut_dim, Activation::identity, rng));
  return m;
}

namespace detail {
inline std::vector<int> gather(std::span<const int> v, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

// Loss and, when wanted, the gradient w.r.t. the denoiser output.
// loss = mean_j ||coef_z0(t_j) (z0_j - z0hat_j)||^2
inline double diffusion_objective(const DiffusionModel& m, const Tensor& z0, const Tensor& z0_hat,
                                  std::span<const std::size_t> ts, Tensor* grad) {
  const std::size_t n = ts.size();
  double loss = 0.0;
  if (grad != nullptr) *grad = Tensor(z0.rows(), n);
  for (std::size_t j = 0; j < n; ++j) {
    const double b = m.schedule.coef_z0(ts[j]);
    for (std::size_t k = 0; k < z0.rows(); ++k) {
      const double d = b * (z0(k, j) - z0_hat(k, j));
      loss += d * d;
      if (grad != nullptr) (*grad)(k, j) = -2.0 * b * d / static_cast<double>(n);
    }
  }
  return loss / static_cast<double>(n);
}
}  // namespace detail

// Uniform (pair, t) draws per step; returns the per-step loss.
inline std::vector<double> train_diffusion(DiffusionModel& m, const DiffusionPairs& pairs,
                                           const DiffusionConfig& config) {
  config.validate();
  pairs.validate();
  const Tensor z0_all = m.nonlabel_stats.apply(pairs.h_nonlabel);
  const Tensor hl_all = m.label_stats.apply(pairs.h_label);
  AdamState adam = adam_init(std::as_const(m).parameters(), config.adam);
  Rng rng = make_rng(config.seed, 0xd1f1);
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_t(1, m.T());
  std::vector<double> losses;
  losses.reserve(config.steps);
  const std::size_t B = config.batch_size;
  for (std::size_t step = 0; step < config.steps; ++step) {
    std::vector<std::size_t> idx(B), ts(B);
    for (std::size_t j = 0; j < B; ++j) {
      idx[j] = pick(rng);
      ts[j] = pick_t(rng);
    }
    const Tensor z0 = gather_columns(z0_all, idx);
    Tensor h_t(m.cut_dim, B);
    for (std::size_t j = 0; j < B; ++j) {
      const double a = std::sqrt(m.schedule.alpha_bar[ts[j]]);
      const double s = std::sqrt(m.schedule.one_minus_alpha_bar[ts[j]]);
      for (std::size_t k = 0; k < m.cut_dim; ++k) h_t(k, j) = a * z0(k, j) + s * standard_normal(rng);
    }
    const auto labels = detail::gather(pairs.labels, idx);
    const auto acts = m.forward(m.build_input(labels, gather_columns(hl_all, idx), h_t, ts));
    Tensor up;
    losses.push_back(detail::diffusion_objective(m, z0, acts.back(), ts, &up));

    std::vector<Tensor> grads(2 * m.layers.size());
    for (std::size_t i = m.layers.size(); i-- > 0;) {
      DenseGrads g = dense_backward(m.layers[i], acts[i], acts[i + 1], up);
      grads[2 * i] = std::move(g.weight);
      grads[2 * i + 1] = std::move(g.bias);
      up = std::move(g.input);
    }
    std::vector<const Tensor*> gp;
    for (const auto& g : grads) gp.push_back(&g);
    adam_step(m.parameters(), gp, adam);
  }
  return losses;
}

struct TrainedDiffusion {
  DiffusionModel model;
  std::vector<double> losses;
};

inline TrainedDiffusion train_diffusion(const DiffusionPairs& pairs, const DiffusionConfig& config) {
  TrainedDiffusion t{make_diffusion_model(pairs, config), {}};
  t.losses = train_diffusion(t.model, pairs, config);
  return t;
}

// The full objective averaged over every t in 1..T, each pair with
// `draws` fixed noise draws from `seed`. Deterministic.
inline double diffusion_loss(const DiffusionModel& m, const DiffusionPairs& pairs, std::uint64_t seed,
                             std::size_t draws = 1) {
  pairs.validate();
  const Tensor z0_all = m.nonlabel_stats.apply(pairs.h_nonlabel);
  const Tensor hl_all = m.label_stats.apply(pairs.h_label);
  Rng rng = make_rng(seed, 0xd1f2);
  const std::size_t n = pairs.size();
  std::vector<std::size_t> idx;
  for (std::size_t d = 0; d < draws; ++d)
    for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
  const Tensor z0 = gather_columns(z0_all, idx);
  const Tensor hl = gather_columns(hl_all, idx);
  const auto labels = detail::gather(pairs.labels, idx);
  double total = 0.0;
  for (std::size_t t = 1; t <= m.T(); ++t) {
    const std::vector<std::size_t> ts(idx.size(), t);
    const Tensor eps = [&] {
      Tensor e(m.cut_dim, idx.size());
      for (double& v : e.values()) v = standard_normal(rng);
      return e;
    }();
    const Tensor h_t = q_sample_with_noise(z0, t, m.schedule, eps);
    const auto acts = m.forward(m.build_input(labels, hl, h_t, ts));
    total += detail::diffusion_objective(m, z0, acts.back(), ts, nullptr);
  }
  return total / static_cast<double>(m.T());
}

// Called after each reverse step with the step t just taken and the packed
// state [onehot(y); h_L; h_N] in raw (unstandardized) units, one column per
// sample.
using SamplingObserver = std::function<void(std::size_t t, const Tensor& state)>;

// Reverse chain for one group of samples, consuming `rng` in order.
inline Tensor sample_embeddings(const DiffusionModel& m, std::span<const int> labels, const Tensor& h_label,
                                Rng& rng, const SamplingObserver& observer = {}) {
  const std::size_t n = labels.size();
  if (h_label.rows() != m.repr_dim || h_label.cols() != n) {
    throw DimensionError("sample_embeddings: condition shape mismatch");
  }
  const Tensor hl_std = m.label_stats.apply(h_label);
  const Tensor cond_y = onehot_binary(labels);
  Tensor h(m.cut_dim, n);
  for (double& v : h.values()) v = standard_normal(rng);
  Tensor state(DiffusionModel::kClasses + m.repr_dim + m.cut_dim, n);
  std::vector<std::size_t> ts(n);
  for (std::size_t t = m.T(); t >= 1; --t) {
    std::fill(ts.begin(), ts.end(), t);
    const Tensor z0_hat = m.forward(m.build_input(labels, hl_std, h, ts)).back();
    const double a = m.schedule.coef_zt(t);
    const double b = m.schedule.coef_z0(t);
    const double sigma = t > 1 ? std::sqrt(m.schedule.posterior_variance(t)) : 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      h[i] = a * h[i] + b * z0_hat[i];
      if (t > 1) h[i] += sigma * standard_normal(rng);
    }
    if (observer) {
      // The condition block is written back from the caller's inputs on
      // every step; only the h_N block evolves.
      const Tensor raw = m.nonlabel_stats.invert(h);
      for (std::size_t j = 0; j < n; ++j) {
        std::size_t r = 0;
        for (std::size_t k = 0; k < DiffusionModel::kClasses; ++k) state(r++, j) = cond_y(k, j);
        for (std::size_t k = 0; k < m.repr_dim; ++k) state(r++, j) = h_label(k, j);
        for (std::size_t k = 0; k < m.cut_dim; ++k) state(r++, j) = raw(k, j);
      }
      observer(t, state);
    }
  }
  return m.nonlabel_stats.invert(h);
}

inline std::vector<double> sample_embedding(const DiffusionModel& m, int label, std::span<const double> h_label,
                                            Rng& rng) {
  const int labels[] = {label};
  Tensor hl(h_label.size(), 1, std::vector<double>(h_label.begin(), h_label.end()));
  const Tensor h = sample_embeddings(m, labels, hl, rng);
  return std::vector<double>(h.values().begin(), h.values().end());
}

inline constexpr std::size_t kSampleChunk = 1024;

// Chunked sampling; chunk c draws from its own stream make_rng(seed, c), so
// results do not depend on how chunks are scheduled.
inline Tensor sample_embeddings(const DiffusionModel& m, std::span<const int> labels, const Tensor& h_label,
                                std::uint64_t seed) {
  const std::size_t n = labels.size();
  if (h_label.cols() != n) throw DimensionError("sample_embeddings: condition shape mismatch");
  Tensor out(m.cut_dim, n);
  for (std::size_t start = 0, c = 0; start < n; start += kSampleChunk, ++c) {
    std::vector<std::size_t> cols(std::min(kSampleChunk, n - start));
    std::iota(cols.begin(), cols.end(), start);
    Rng rng = make_rng(seed, c);
    const Tensor h = sample_embeddings(m, labels.subspan(start, cols.size()), gather_columns(h_label, cols), rng);
    for (std::size_t k = 0; k < m.cut_dim; ++k)
      for (std::size_t j = 0; j < cols.size(); ++j) out(k, start + j) = h(k, j);
  }
  return out;
}

inline constexpr const char* kDenoiserKind = "vflsim.denoiser";

inline TensorArchive export_diffusion(const DiffusionModel& m) {
  TensorArchive a;
  a.kind = kDenoiserKind;
  a.metadata["T"] = std::to_string(m.T());
  {
    std::ostringstream s;
    s << std::setprecision(17) << m.beta_start << ' ' << m.beta_end;
    a.metadata["beta"] = s.str();
  }
  a.metadata["time_dim"] = std::to_string(m.time_dim);
  a.metadata["layers"] = std::to_string(m.layers.size());
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const std::string p = "layer" + std::to_string(i) + "/";
    a.tensors[p + "weight"] = m.layers[i].weight;
    a.tensors[p + "bias"] = m.layers[i].bias;
    a.metadata[p + "activation"] = m.layers[i].activation == Activation::relu ? "relu" : "identity";
  }
  auto col = [](const std::vector<double>& v) { return Tensor(v.size(), 1, v); };
  a.tensors["stats/nonlabel_mean"] = col(m.nonlabel_stats.mean);
  a.tensors["stats/nonlabel_scale"] = col(m.nonlabel_stats.scale);
  a.tensors["stats/label_mean"] = col(m.label_stats.mean);
  a.tensors["stats/label_scale"] = col(m.label_stats.scale);
  return a;
}

inline DiffusionModel import_diffusion(const TensorArchive& a) {
  if (a.kind != kDenoiserKind) throw DecodeError("archive is not a denoiser: " + a.kind);
  auto meta = [&](const std::string& k) -> const std::string& {
    auto it = a.metadata.find(k);
    if (it == a.metadata.end()) throw DecodeError("denoiser archive lacks '" + k + "'");
    return it->second;
  };
  DiffusionModel m;
  {
    std::istringstream s(meta("beta"));
    s >> m.beta_start >> m.beta_end;
    if (!s) throw DecodeError("denoiser archive: bad beta endpoints");
  }
  m.schedule = NoiseSchedule::linear(std::stoul(meta("T")), m.beta_start, m.beta_end);
  m.time_dim = std::stoul(meta("time_dim"));
  const std::size_t n_layers = std::stoul(meta("layers"));
  for (std::size_t i = 0; i < n_layers; ++i) {
    const std::string p = "layer" + std::to_string(i) + "/";
    DenseLayer l;
    l.weight = a.at(p + "weight");
    l.bias = a.at(p + "bias");
    l.activation = meta(p + "activation") == "relu" ? Activation::relu : Activation::identity;
    m.layers.push_back(std::move(l));
  }
  auto vec = [&](const std::string& k) {
    const Tensor& t = a.at(k);
    return std::vector<double>(t.values().begin(), t.values().end());
  };
  m.nonlabel_stats = {vec("stats/nonlabel_mean"), vec("stats/nonlabel_scale")};
  m.label_stats = {vec("stats/label_mean"), vec("stats/label_scale")};
  m.cut_dim = m.nonlabel_stats.mean.size();
  m.repr_dim = m.label_stats.mean.size();
  if (m.layers.empty() || m.layers.front().in_dim() != m.input_dim() ||
      m.layers.back().out_dim() != m.cut_dim) {
    throw DecodeError("denoiser archive: layer shapes inconsistent");
  }
  return m;
}

// sample_id followed by one column per embedding coordinate.
inline void write_embedding_tsv(std::ostream& out, std::span<const std::string> ids, const Tensor& h) {
  if (h.cols() != ids.size()) throw DimensionError("embedding tsv: id count mismatch");
  out << "sample_id";
  for (std::size_t k = 0; k < h.rows(); ++k) out << "\te" << k;
  out << '\n' << std::setprecision(17);
  for (std::size_t j = 0; j < ids.size(); ++j) {
    out << ids[j];
    for (std::size_t k = 0; k < h.rows(); ++k) out << '\t' << h(k, j);
    out << '\n';
  }
}

}  // namespace vflsim
