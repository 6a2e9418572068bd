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
#include <cstddef>
#include <span>

#include "vflsim/nncore/tensor.hpp"

namespace vflsim {

struct LossAndGrad {
  double loss = 0.0;
  Tensor probs;  // softmax(logits), C x B
  Tensor grad;   // dL/dlogits, C x B
};

// Column-wise softmax of a C x B logit tensor.
inline Tensor softmax(const Tensor& logits) {
  Tensor p(logits.rows(), logits.cols());
  for (std::size_t c = 0; c < logits.cols(); ++c) {
    double mx = logits(0, c);
    for (std::size_t r = 1; r < logits.rows(); ++r) mx = std::max(mx, logits(r, c));
    double z = 0.0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
      p(r, c) = std::exp(logits(r, c) - mx);
      z += p(r, c);
    }
    for (std::size_t r = 0; r < logits.rows(); ++r) p(r, c) /= z;
  }
  return p;
}

// Mean cross-entropy -y^T log softmax(l) over the batch; grad = (p - y) / B.
inline LossAndGrad softmax_cross_entropy(const Tensor& logits, const Tensor& onehot) {
  require_same_shape(logits, onehot, "softmax_cross_entropy");
  const std::size_t classes = logits.rows();
  const std::size_t batch = logits.cols();
  if (batch == 0) throw ValidationError("softmax_cross_entropy: empty batch");
  for (std::size_t c = 0; c < batch; ++c) {
    int hot = 0;
    for (std::size_t r = 0; r < classes; ++r) {
      const double v = onehot(r, c);
      if (v == 1.0) {
        ++hot;
      } else if (v != 0.0) {
        hot = -1;
        break;
      }
    }
    if (hot != 1) throw ValidationError("softmax_cross_entropy: label column is not one-hot");
  }
  LossAndGrad out{0.0, softmax(logits), Tensor(classes, batch)};
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (std::size_t c = 0; c < batch; ++c) {
    double mx = logits(0, c);
    for (std::size_t r = 1; r < classes; ++r) mx = std::max(mx, logits(r, c));
    double z = 0.0;
    for (std::size_t r = 0; r < classes; ++r) z += std::exp(logits(r, c) - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t r = 0; r < classes; ++r) {
      if (onehot(r, c) == 1.0) out.loss -= logits(r, c) - log_z;
      out.grad(r, c) = (out.probs(r, c) - onehot(r, c)) * inv_b;
    }
  }
  out.loss *= inv_b;
  return out;
}

// Two-class one-hot columns from {0,1} labels (row 1 = positive class).
inline Tensor onehot_binary(std::span<const int> labels) {
  Tensor y(2, labels.size());
  for (std::size_t j = 0; j < labels.size(); ++j) y(labels[j] == 1 ? 1 : 0, j) = 1.0;
  return y;
}

}  // namespace vflsim
