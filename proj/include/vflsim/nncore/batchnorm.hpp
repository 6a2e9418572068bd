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

#include <cmath>
#include <cstddef>

#include "vflsim/nncore/tensor.hpp"

namespace vflsim {

enum class Mode { train, infer };

// Per-feature normalization over the batch (columns).
struct BatchNormLayer {
  Tensor gamma;          // F x 1
  Tensor beta;           // F x 1
  Tensor running_mean;   // F x 1
  Tensor running_var;    // F x 1
  double epsilon = 1e-5;
  double momentum = 0.9;  // weight of the previous running value

  static BatchNormLayer make(std::size_t features) {
    return BatchNormLayer{Tensor(features, 1, 1.0), Tensor(features, 1, 0.0),
                          Tensor(features, 1, 0.0), Tensor(features, 1, 1.0)};
  }
  std::size_t features() const { return gamma.rows(); }
};

struct BatchNormCache {
  Tensor x_hat;    // F x B
  Tensor inv_std;  // F x 1
};

struct BatchNormGrads {
  Tensor gamma;
  Tensor beta;
  Tensor input;
};

inline Tensor batchnorm_forward(BatchNormLayer& bn, const Tensor& x, Mode mode,
                                BatchNormCache* cache = nullptr) {
  const std::size_t f = bn.features();
  const std::size_t b = x.cols();
  if (x.rows() != f) throw DimensionError("batchnorm_forward: feature mismatch");
  Tensor out(f, b);
  if (mode == Mode::infer) {
    for (std::size_t r = 0; r < f; ++r) {
      const double inv = 1.0 / std::sqrt(bn.running_var(r, 0) + bn.epsilon);
      for (std::size_t c = 0; c < b; ++c)
        out(r, c) = bn.gamma(r, 0) * (x(r, c) - bn.running_mean(r, 0)) * inv +
                    bn.beta(r, 0);
    }
    return out;
  }
  if (b < 2) throw ValidationError("batchnorm_forward: train mode needs batch >= 2");
  Tensor x_hat(f, b);
  Tensor inv_std(f, 1);
  const double n = static_cast<double>(b);
  for (std::size_t r = 0; r < f; ++r) {
    double mean = 0.0;
    for (double v : x.row(r)) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x.row(r)) var += (v - mean) * (v - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + bn.epsilon);
    inv_std(r, 0) = inv;
    for (std::size_t c = 0; c < b; ++c) {
      x_hat(r, c) = (x(r, c) - mean) * inv;
      out(r, c) = bn.gamma(r, 0) * x_hat(r, c) + bn.beta(r, 0);
    }
    bn.running_mean(r, 0) = bn.momentum * bn.running_mean(r, 0) + (1.0 - bn.momentum) * mean;
    bn.running_var(r, 0) =
        bn.momentum * bn.running_var(r, 0) + (1.0 - bn.momentum) * var * n / (n - 1.0);
  }
  if (cache != nullptr) *cache = BatchNormCache{std::move(x_hat), std::move(inv_std)};
  return out;
}

// Train-mode backward.
inline BatchNormGrads batchnorm_backward(const BatchNormLayer& bn,
                                         const BatchNormCache& cache,
                                         const Tensor& upstream) {
  const std::size_t f = bn.features();
  const std::size_t b = upstream.cols();
  if (upstream.rows() != f || !cache.x_hat.same_shape(upstream)) {
    throw DimensionError("batchnorm_backward: inconsistent shapes");
  }
  BatchNormGrads g{Tensor(f, 1), Tensor(f, 1), Tensor(f, b)};
  const double n = static_cast<double>(b);
  for (std::size_t r = 0; r < f; ++r) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t c = 0; c < b; ++c) {
      sum_dy += upstream(r, c);
      sum_dy_xhat += upstream(r, c) * cache.x_hat(r, c);
    }
    g.beta(r, 0) = sum_dy;
    g.gamma(r, 0) = sum_dy_xhat;
    const double k = bn.gamma(r, 0) * cache.inv_std(r, 0) / n;
    for (std::size_t c = 0; c < b; ++c) {
      g.input(r, c) =
          k * (n * upstream(r, c) - sum_dy - cache.x_hat(r, c) * sum_dy_xhat);
    }
  }
  return g;
}

}  // namespace vflsim
