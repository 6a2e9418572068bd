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
#include <span>
#include <string>
#include <vector>

#include "vflsim/errors.hpp"
#include "vflsim/nncore/archive.hpp"
#include "vflsim/nncore/tensor.hpp"

namespace vflsim {

enum class MessageKind : std::uint8_t {
  federated_embedding_batch = 1,  // non-label -> label: h_N
  cut_gradient_batch = 2,         // label -> non-label: dL/dh_N
};

inline const char* to_string(MessageKind k) {
  return k == MessageKind::federated_embedding_batch ? "FederatedEmbeddingBatch"
                                                     : "CutGradientBatch";
}

// The only thing that crosses the party boundary. Carries sample ids and a
// float32 matrix, nothing else.
struct ProtocolMessage {
  MessageKind kind = MessageKind::federated_embedding_batch;
  std::uint64_t seq = 0;
  std::vector<std::string> batch_ids;
  std::uint32_t dim = 0;
  std::vector<float> payload;  // batch_ids.size() x dim, sample-major

  std::size_t batch() const { return batch_ids.size(); }

  friend bool operator==(const ProtocolMessage&, const ProtocolMessage&) = default;
};

// Wire layout, little-endian:
//   kind u8 | seq u64 | B u32 | dim u32 | B x (len u32, utf8 bytes) | B*dim f32
inline std::vector<std::uint8_t> encode_message(const ProtocolMessage& m) {
  if (m.payload.size() != m.batch_ids.size() * m.dim) {
    throw DimensionError("encode_message: payload size does not match B x dim");
  }
  ByteWriter w;
  w.put<std::uint8_t>(static_cast<std::uint8_t>(m.kind));
  w.put<std::uint64_t>(m.seq);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.batch_ids.size()));
  w.put<std::uint32_t>(m.dim);
  for (const auto& id : m.batch_ids) w.put_string(id);
  for (float v : m.payload) w.put<float>(v);
  return w.take();
}

inline ProtocolMessage decode_message(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  ProtocolMessage m;
  const auto kind = r.get<std::uint8_t>();
  if (kind != static_cast<std::uint8_t>(MessageKind::federated_embedding_batch) &&
      kind != static_cast<std::uint8_t>(MessageKind::cut_gradient_batch)) {
    throw DecodeError("unknown message kind " + std::to_string(kind));
  }
  m.kind = static_cast<MessageKind>(kind);
  m.seq = r.get<std::uint64_t>();
  const auto b = r.get<std::uint32_t>();
  m.dim = r.get<std::uint32_t>();
  // Each id needs at least its length prefix.
  r.require(std::size_t{b} * sizeof(std::uint32_t));
  m.batch_ids.reserve(b);
  for (std::uint32_t i = 0; i < b; ++i) m.batch_ids.push_back(r.get_string());
  r.require(std::size_t{b} * m.dim * sizeof(float));
  m.payload.resize(std::size_t{b} * m.dim);
  for (float& v : m.payload) v = r.get<float>();
  if (r.remaining() != 0) throw DecodeError("trailing bytes after message");
  return m;
}

// d x B double activations -> B x d float32 payload.
inline std::vector<float> to_payload(const Tensor& columns) {
  std::vector<float> out(columns.size());
  for (std::size_t j = 0; j < columns.cols(); ++j)
    for (std::size_t k = 0; k < columns.rows(); ++k)
      out[j * columns.rows() + k] = static_cast<float>(columns(k, j));
  return out;
}

// Payload back to d x B doubles.
inline Tensor from_payload(const ProtocolMessage& m) {
  Tensor t(m.dim, m.batch());
  for (std::size_t j = 0; j < m.batch(); ++j)
    for (std::size_t k = 0; k < m.dim; ++k) t(k, j) = m.payload[j * m.dim + k];
  return t;
}

// The value a double takes after one trip through the wire.
inline Tensor round_to_wire(const Tensor& t) {
  Tensor out = t;
  for (double& v : out.values()) v = static_cast<double>(static_cast<float>(v));
  return out;
}

}  // namespace vflsim
