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
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vflsim/attack/leak_auc.hpp"
#include "vflsim/nncore/archive.hpp"
#include "vflsim/nncore/tensor.hpp"
#include "vflsim/protocol/message.hpp"

namespace vflsim {

// What the non-label party saw on the wire, keyed by sample id. Built only
// from decoded protocol messages.
class AttackTrace {
 public:
  struct Entry {
    std::vector<float> gradient;   // last received
    std::vector<float> embedding;  // last sent
  };

  void observe(const ProtocolMessage& m) {
    for (std::size_t i = 0; i < m.batch_ids.size(); ++i) {
      Entry& e = entry(m.batch_ids[i]);
      auto first = m.payload.begin() + static_cast<std::ptrdiff_t>(i * m.dim);
      std::vector<float> row(first, first + m.dim);
      if (m.kind == MessageKind::cut_gradient_batch) {
        e.gradient = std::move(row);
      } else {
        e.embedding = std::move(row);
      }
    }
  }

  // Direct insertion, used when reloading a saved trace.
  void set(const std::string& id, std::vector<float> gradient, std::vector<float> embedding) {
    Entry& e = entry(id);
    e.gradient = std::move(gradient);
    e.embedding = std::move(embedding);
  }

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const Entry& at(std::size_t i) const { return entries_.at(i); }
  const Entry* find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &entries_[it->second];
  }

 private:
  Entry& entry(const std::string& id) {
    auto [it, fresh] = index_.try_emplace(id, ids_.size());
    if (fresh) {
      ids_.push_back(id);
      entries_.emplace_back();
    }
    return entries_[it->second];
  }

  std::vector<std::string> ids_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr const char* kTraceKind = "vflsim.attack_trace";

// Rows of absent vectors are stored as zeros with a 0 in the presence
// column.
inline TensorArchive export_trace(const AttackTrace& trace) {
  std::size_t g_dim = 0, e_dim = 0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    g_dim = std::max(g_dim, trace.at(i).gradient.size());
    e_dim = std::max(e_dim, trace.at(i).embedding.size());
  }
  TensorArchive a;
  a.kind = kTraceKind;
  std::string ids;
  Tensor g(trace.size(), g_dim), e(trace.size(), e_dim), present(trace.size(), 2);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    ids += trace.ids()[i];
    ids.push_back('\n');
    const auto& en = trace.at(i);
    present(i, 0) = en.gradient.empty() ? 0.0 : 1.0;
    present(i, 1) = en.embedding.empty() ? 0.0 : 1.0;
    for (std::size_t k = 0; k < en.gradient.size(); ++k) g(i, k) = en.gradient[k];
    for (std::size_t k = 0; k < en.embedding.size(); ++k) e(i, k) = en.embedding[k];
  }
  a.metadata["ids"] = ids;
  a.tensors["gradients"] = std::move(g);
  a.tensors["embeddings"] = std::move(e);
  a.tensors["present"] = std::move(present);
  return a;
}

inline AttackTrace import_trace(const TensorArchive& a) {
  if (a.kind != kTraceKind) throw DecodeError("archive is not an attack trace: " + a.kind);
  const auto it = a.metadata.find("ids");
  if (it == a.metadata.end()) throw DecodeError("attack trace lacks ids");
  std::vector<std::string> ids;
  std::size_t start = 0;
  for (std::size_t i = 0; i < it->second.size(); ++i) {
    if (it->second[i] == '\n') {
      ids.push_back(it->second.substr(start, i - start));
      start = i + 1;
    }
  }
  const Tensor& g = a.at("gradients");
  const Tensor& e = a.at("embeddings");
  const Tensor& present = a.at("present");
  if (g.rows() != ids.size() || e.rows() != ids.size() || present.rows() != ids.size()) {
    throw DecodeError("attack trace: row counts disagree");
  }
  AttackTrace t;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::vector<float> gi, ei;
    if (present(i, 0) != 0.0)
      for (double v : g.row(i)) gi.push_back(static_cast<float>(v));
    if (present(i, 1) != 0.0)
      for (double v : e.row(i)) ei.push_back(static_cast<float>(v));
    t.set(ids[i], std::move(gi), std::move(ei));
  }
  return t;
}

struct AttackScores {
  std::vector<std::string> ids;
  std::vector<double> scores;  // higher => predicted positive
  std::size_t excluded = 0;
};

// score = ||g||_2 of the last gradient received for each sample.
inline AttackScores norm_attack(const AttackTrace& trace) {
  if (trace.size() == 0) throw ValidationError("norm_attack: empty trace");
  AttackScores out;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& g = trace.at(i).gradient;
    if (g.empty()) {
      ++out.excluded;
      continue;
    }
    double s = 0.0;
    for (float v : g) s += static_cast<double>(v) * v;
    out.ids.push_back(trace.ids()[i]);
    out.scores.push_back(std::sqrt(s));
  }
  return out;
}

struct ClusterAttackResult {
  std::vector<double> scores;     // d(x, c_large) - d(x, c_small)
  std::vector<int> in_smaller;    // binary assignment: 1 = predicted positive
  std::size_t smaller_size = 0;
  std::size_t iterations = 0;
  bool degenerate = false;
};

inline constexpr std::size_t kClusterIterations = 50;

// Two-means over the rows of `embeddings` (B x d). Centers start at a far
// pair: the row farthest from the mean, then the row farthest from it.
inline ClusterAttackResult cluster_attack(const Tensor& embeddings,
                                          std::size_t max_iterations = kClusterIterations) {
  const std::size_t n = embeddings.rows();
  const std::size_t d = embeddings.cols();
  if (n < 2) throw ValidationError("cluster_attack: need at least two embeddings");
  ClusterAttackResult res;
  res.scores.assign(n, 0.0);
  res.in_smaller.assign(n, 0);

  auto dist2 = [&](std::size_t i, const std::vector<double>& c) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double t = embeddings(i, k) - c[k];
      s += t * t;
    }
    return s;
  };
  auto farthest_from = [&](const std::vector<double>& c) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = dist2(i, c);
      if (v > best_d) {
        best_d = v;
        best = i;
      }
    }
    return std::pair{best, best_d};
  };
  auto row_vec = [&](std::size_t i) {
    auto r = embeddings.row(i);
    return std::vector<double>(r.begin(), r.end());
  };

  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) mean[k] += embeddings(i, k);
  for (auto& v : mean) v /= static_cast<double>(n);
  const std::size_t a = farthest_from(mean).first;
  const auto [b, spread] = farthest_from(row_vec(a));
  if (!(spread > 0.0)) {
    res.degenerate = true;
    return res;
  }

  std::vector<std::vector<double>> centers{row_vec(a), row_vec(b)};
  std::vector<int> assign(n, -1);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = false;
    std::size_t count[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const int c = dist2(i, centers[1]) < dist2(i, centers[0]) ? 1 : 0;
      changed |= (c != assign[i]);
      assign[i] = c;
      ++count[c];
    }
    res.iterations = it + 1;
    if (!changed || count[0] == 0 || count[1] == 0) break;
    for (auto& c : centers) std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) centers[assign[i]][k] += embeddings(i, k);
    for (int c = 0; c < 2; ++c)
      for (auto& v : centers[c]) v /= static_cast<double>(count[c]);
  }

  std::size_t count1 = 0;
  for (int c : assign) count1 += static_cast<std::size_t>(c);
  const int small = (count1 < n - count1) ? 1 : 0;  // size ties go to cluster 0
  res.smaller_size = small == 1 ? count1 : n - count1;
  for (std::size_t i = 0; i < n; ++i) {
    res.scores[i] = std::sqrt(dist2(i, centers[1 - small])) - std::sqrt(dist2(i, centers[small]));
    res.in_smaller[i] = assign[i] == small ? 1 : 0;
  }
  return res;
}

struct AttackReport {
  std::string attack;
  double leak_auc = 0.0;
  std::size_t n_samples = 0;
  nlohmann::json params = nlohmann::json::object();

  nlohmann::json to_json() const {
    return {{"attack", attack}, {"leak_auc", leak_auc}, {"n_samples", n_samples}, {"params", params}};
  }
};

}  // namespace vflsim
