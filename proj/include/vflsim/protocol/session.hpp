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
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>
#include <vector>

#include "json.hpp"
#include "vflsim/data/views.hpp"
#include "vflsim/defense/defense.hpp"
#include "vflsim/protocol/channel.hpp"
#include "vflsim/protocol/message.hpp"
#include "vflsim/protocol/parties.hpp"

namespace vflsim {

enum class Transport { sequential, threaded };

struct TrainConfig {
  std::size_t batch_size = 256;
  std::size_t epochs = 1;
  AdamConfig adam{};
  std::uint64_t seed = 1;
  Architecture arch{};
  DefenseConfig defense{};
  Transport transport = Transport::sequential;
  // Replaces `defense` when set.
  GradientDefense gradient_hook;
  std::ostream* metrics_log = nullptr;   // {"step","branch","loss"} per line
  std::ostream* defense_dump = nullptr;  // pre/post gradient rows per line

  void validate() const {
    if (batch_size < 2) throw ValidationError("train: batch_size must be >= 2");
    if (epochs == 0) throw ValidationError("train: epochs must be >= 1");
  }
};

// Seeded permutation of [0, n) cut into batches; a trailing batch smaller
// than two samples is dropped. Both parties derive the same order.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                           std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = make_rng(seed, 0xe0000 + epoch);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    if (end - start < 2) break;
    out.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                     idx.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

inline std::vector<std::vector<std::size_t>> training_schedule(std::size_t n, const TrainConfig& c) {
  std::vector<std::vector<std::size_t>> all;
  for (std::size_t e = 0; e < c.epochs; ++e) {
    auto b = epoch_batches(n, c.batch_size, c.seed, e);
    all.insert(all.end(), std::make_move_iterator(b.begin()), std::make_move_iterator(b.end()));
  }
  return all;
}

namespace detail {
inline nlohmann::json rows_json(const Tensor& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < t.rows(); ++i)
    rows.push_back(std::vector<double>(t.row(i).begin(), t.row(i).end()));
  return rows;
}

inline std::vector<std::string> select_ids(const std::vector<std::string>& ids,
                                           std::span<const std::size_t> rows) {
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(ids[r]);
  return out;
}
}  // namespace detail

// Drives federated training steps over the aligned set. Each step sends one
// FederatedEmbeddingBatch up and one CutGradientBatch down. In threaded mode
// the non-label party runs on its own thread and the two sides meet only at
// the channels; sequential mode interleaves the same calls on one thread.
class ProtocolSession {
 public:
  using Observer = std::function<void(const ProtocolMessage&)>;

  ProtocolSession(NonLabelParty& nonlabel, const NonLabelView& nonlabel_view, LabelParty& label,
                  const LabelView& label_view, const TrainConfig& config, Observer observer = {})
      : nonlabel_(nonlabel),
        nonlabel_view_(nonlabel_view),
        label_(label),
        label_view_(label_view),
        config_(config),
        observer_(std::move(observer)) {
    config_.validate();
    if (nonlabel_view.size() != label_view.size()) {
      throw ValidationError("protocol: parties disagree on the aligned set size");
    }
    if (label_view.size() < 2) throw ValidationError("protocol: aligned data must hold >= 2 samples");
    if (nonlabel.cut_dim() != label.cut_dim()) throw DimensionError("protocol: cut widths differ");
    schedule_ = training_schedule(label_view.size(), config_);
    defense_ = config_.gradient_hook ? config_.gradient_hook : make_gradient_defense(config_.defense);
    if (observer_) {
      auto tap = [this](std::span<const std::uint8_t> bytes) {
        const ProtocolMessage m = decode_message(bytes);
        std::lock_guard<std::mutex> lock(observer_mu_);
        observer_(m);
      };
      up_.set_tap(tap);
      down_.set_tap(tap);
    }
    if (config_.transport == Transport::threaded) {
      worker_ = std::thread([this] { run_nonlabel(); });
    }
  }

  ProtocolSession(const ProtocolSession&) = delete;
  ProtocolSession& operator=(const ProtocolSession&) = delete;

  ~ProtocolSession() {
    if (worker_.joinable()) {
      up_.close();
      down_.close();
      worker_.join();
    }
  }

  std::size_t total_steps() const { return schedule_.size(); }
  std::size_t steps_done() const { return next_; }
  bool done() const { return next_ >= schedule_.size(); }
  std::uint64_t messages_up() const { return up_.sent(); }
  std::uint64_t messages_down() const { return down_.sent(); }

  // One federated step on the next aligned batch; returns the batch loss.
  double step() {
    if (done()) throw ValidationError("protocol: no aligned batches left");
    const std::size_t k = next_++;
    if (config_.transport == Transport::sequential) {
      nonlabel_send(k);
      const double loss = label_exchange(k);
      nonlabel_receive(k);
      return loss;
    }
    try {
      return label_exchange(k);
    } catch (const ProtocolError&) {
      rethrow_worker_error();
      throw;
    }
  }

  // Joins the non-label worker, rethrowing anything it raised.
  void finish() {
    if (worker_.joinable()) worker_.join();
    rethrow_worker_error();
  }

 private:
  void nonlabel_send(std::size_t k) {
    const auto& rows = schedule_[k];
    const Tensor h = nonlabel_.forward(nonlabel_view_.batch(rows));
    ProtocolMessage m{MessageKind::federated_embedding_batch, up_seq_++,
                      detail::select_ids(nonlabel_view_.ids, rows),
                      static_cast<std::uint32_t>(h.rows()), to_payload(h)};
    up_.send(encode_message(m));
  }

  void nonlabel_receive(std::size_t k) {
    const ProtocolMessage m = decode_message(down_.receive());
    if (m.kind != MessageKind::cut_gradient_batch) throw ProtocolError("non-label: expected a gradient batch");
    if (m.seq != down_seen_) throw ProtocolError("non-label: gradient sequence gap");
    ++down_seen_;
    if (m.batch_ids != detail::select_ids(nonlabel_view_.ids, schedule_[k])) {
      throw ProtocolError("non-label: gradient batch ids do not match the embedding batch");
    }
    nonlabel_.apply_cut_gradient(from_payload(m));
  }

  double label_exchange(std::size_t k) {
    const auto& rows = schedule_[k];
    const ProtocolMessage m = decode_message(up_.receive());
    if (m.kind != MessageKind::federated_embedding_batch) throw ProtocolError("label: expected an embedding batch");
    if (m.seq != up_seen_) throw ProtocolError("label: embedding sequence gap");
    ++up_seen_;
    if (m.batch_ids != detail::select_ids(label_view_.ids, rows)) {
      throw ProtocolError("label: embedding batch ids are not the expected aligned batch");
    }
    const auto labels = label_view_.batch_labels(rows);
    LabelTape tape = label_.forward(Branch::federated, from_payload(m), label_view_.batch(rows), labels);
    const LabelGrads grads = label_.backward(tape);
    label_.apply(Branch::federated, grads);

    GradBatch g{transpose(grads.h_nonlabel)};
    if (defense_) {
      GradBatch defended = defense_(g, k);
      if (!defended.grads.same_shape(g.grads)) throw DimensionError("defense changed the batch shape");
      if (config_.defense_dump != nullptr) {
        nlohmann::json line{{"step", k}, {"pre", detail::rows_json(g.grads)},
                            {"post", detail::rows_json(defended.grads)}};
        *config_.defense_dump << line.dump() << '\n';
      }
      g = std::move(defended);
    }
    ProtocolMessage out{MessageKind::cut_gradient_batch, down_seq_++, m.batch_ids,
                        static_cast<std::uint32_t>(g.dim()), {}};
    out.payload.reserve(g.grads.size());
    for (double v : g.grads.values()) out.payload.push_back(static_cast<float>(v));
    down_.send(encode_message(out));

    if (config_.metrics_log != nullptr) {
      nlohmann::json line{{"step", k}, {"branch", "federated"}, {"loss", tape.loss.loss}};
      *config_.metrics_log << line.dump() << '\n';
    }
    return tape.loss.loss;
  }

  void run_nonlabel() {
    try {
      for (std::size_t k = 0; k < schedule_.size(); ++k) {
        nonlabel_send(k);
        nonlabel_receive(k);
      }
    } catch (...) {
      worker_error_ = std::current_exception();
      up_.close();
      down_.close();
    }
  }

  void rethrow_worker_error() {
    if (worker_.joinable()) worker_.join();
    if (worker_error_) std::rethrow_exception(std::exchange(worker_error_, nullptr));
  }

  NonLabelParty& nonlabel_;
  const NonLabelView& nonlabel_view_;
  LabelParty& label_;
  const LabelView& label_view_;
  TrainConfig config_;
  Observer observer_;
  std::mutex observer_mu_;
  GradientDefense defense_;
  std::vector<std::vector<std::size_t>> schedule_;
  Channel up_;    // non-label -> label
  Channel down_;  // label -> non-label
  std::size_t next_ = 0;
  // Sender-side counters belong to the sending party's thread.
  std::uint64_t up_seq_ = 0;
  std::uint64_t down_seq_ = 0;
  std::uint64_t up_seen_ = 0;
  std::uint64_t down_seen_ = 0;
  std::thread worker_;
  std::exception_ptr worker_error_;
};

struct TrainLog {
  std::vector<double> losses;
  std::uint64_t messages_up = 0;
  std::uint64_t messages_down = 0;
};

struct VflModel {
  NonLabelParty nonlabel;
  LabelParty label;
};

inline VflModel make_vfl_model(const NonLabelView& nv, const LabelView& lv, const TrainConfig& c) {
  return VflModel{NonLabelParty(nv.vocab, c.arch, c.adam, c.seed),
                  LabelParty(lv.vocab, c.arch, c.adam, c.seed)};
}

// Continues federated training of `model` for config.epochs over the
// aligned views.
inline TrainLog train_vanilla(VflModel& model, const NonLabelView& nv, const LabelView& lv,
                              const TrainConfig& config, ProtocolSession::Observer observer = {}) {
  if (lv.size() == 0) throw ValidationError("train_vanilla: empty aligned data");
  ProtocolSession session(model.nonlabel, nv, model.label, lv, config, std::move(observer));
  TrainLog log;
  while (!session.done()) log.losses.push_back(session.step());
  session.finish();
  log.messages_up = session.messages_up();
  log.messages_down = session.messages_down();
  return log;
}

struct TrainedVfl {
  VflModel model;
  TrainLog log;
};

inline TrainedVfl train_vanilla(const NonLabelView& nv, const LabelView& lv, const TrainConfig& config,
                                ProtocolSession::Observer observer = {}) {
  if (lv.size() == 0) throw ValidationError("train_vanilla: empty aligned data");
  TrainedVfl t{make_vfl_model(nv, lv, config), {}};
  t.log = train_vanilla(t.model, nv, lv, config, std::move(observer));
  return t;
}

struct TrainedLocal {
  LabelParty label;
  TrainLog log;
};

// The federated architecture with h_N held at zero, trained on label-party
// features only.
inline TrainedLocal train_local(const LabelView& lv, const TrainConfig& config) {
  config.validate();
  if (lv.size() < 2) throw ValidationError("train_local: need at least two samples");
  TrainedLocal t{LabelParty(lv.vocab, config.arch, config.adam, config.seed), {}};
  const auto schedule = training_schedule(lv.size(), config);
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const auto& rows = schedule[k];
    const Tensor zeros(t.label.cut_dim(), rows.size());
    const auto labels = lv.batch_labels(rows);
    LabelTape tape = t.label.forward(Branch::federated, zeros, lv.batch(rows), labels);
    t.label.apply(Branch::federated, t.label.backward(tape));
    t.log.losses.push_back(tape.loss.loss);
    if (config.metrics_log != nullptr) {
      nlohmann::json line{{"step", k}, {"branch", "local-only"}, {"loss", tape.loss.loss}};
      *config.metrics_log << line.dump() << '\n';
    }
  }
  return t;
}

// h_N for `rows` after one trip through the message codec.
inline Tensor transmit_embeddings(const NonLabelParty& nonlabel, const NonLabelView& nv,
                                  std::span<const std::size_t> rows, std::uint64_t seq = 0) {
  const Tensor h = nonlabel.infer(nv.batch(rows));
  ProtocolMessage m{MessageKind::federated_embedding_batch, seq, detail::select_ids(nv.ids, rows),
                    static_cast<std::uint32_t>(h.rows()), to_payload(h)};
  return from_payload(decode_message(encode_message(m)));
}

struct ForwardPass {
  double loss = 0.0;
  Tensor probs;      // 2 x B
  Tensor h_nonlabel; // as received by the label party
  LabelTape tape;
};

// Training-mode forward over an aligned batch with no parameter or
// running-statistic side effects.
inline ForwardPass forward_pass(const NonLabelParty& nonlabel, LabelParty& label, const NonLabelView& nv,
                                const LabelView& lv, std::span<const std::size_t> rows) {
  if (nv.size() != lv.size()) throw ValidationError("forward_pass: views are not aligned");
  for (auto r : rows)
    if (r >= nv.size() || nv.ids[r] != lv.ids[r]) throw ValidationError("forward_pass: unaligned sample in batch");
  Tensor h = transmit_embeddings(nonlabel, nv, rows);
  const auto labels = lv.batch_labels(rows);
  LabelTape tape = label.forward(Branch::federated, h, lv.batch(rows), labels, false);
  return ForwardPass{tape.loss.loss, tape.loss.probs, std::move(h), std::move(tape)};
}

// g = dL/dh_N for the batch held in the tape.
inline Tensor cut_gradient(const LabelParty& label, const LabelTape& tape) {
  return label.backward(tape).h_nonlabel;
}

inline constexpr std::size_t kPredictChunk = 2048;

// Federated inference: positive-class probabilities for every aligned row.
inline std::vector<double> predict(const NonLabelParty& nonlabel, const LabelParty& label,
                                   const NonLabelView& nv, const LabelView& lv,
                                   Branch branch = Branch::federated) {
  if (nv.size() != lv.size()) throw ValidationError("predict: views are not aligned");
  std::vector<double> out;
  out.reserve(lv.size());
  for (std::size_t start = 0; start < lv.size(); start += kPredictChunk) {
    std::vector<std::size_t> rows(std::min(kPredictChunk, lv.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    const Tensor h = transmit_embeddings(nonlabel, nv, rows);
    const auto p = label.predict(branch, h, lv.batch(rows));
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

// Label-party-only inference with h_N = 0.
inline std::vector<double> predict_local(const LabelParty& label, const LabelView& lv) {
  std::vector<double> out;
  out.reserve(lv.size());
  for (std::size_t start = 0; start < lv.size(); start += kPredictChunk) {
    std::vector<std::size_t> rows(std::min(kPredictChunk, lv.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    const auto p = label.predict(Branch::federated, Tensor(label.cut_dim(), rows.size()), lv.batch(rows));
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

}  // namespace vflsim
