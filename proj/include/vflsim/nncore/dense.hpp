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
#include <string>

#include "vflsim/nncore/rng.hpp"
#include "vflsim/nncore/tensor.hpp"

namespace vflsim {

enum class Activation { identity, relu, sigmoid };

struct DenseLayer {
  Tensor weight;  // out x in
  Tensor bias;    // out x 1
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }

  // Uniform in +-sqrt(6 / (fan_in + fan_out)), zero bias.
  static DenseLayer glorot(std::size_t in, std::size_t out, Activation act, Rng& rng) {
    DenseLayer layer{Tensor(out, in), Tensor(out, 1), act};
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : layer.weight.values()) w = dist(rng);
    return layer;
  }
};

struct DenseGrads {
  Tensor weight;
  Tensor bias;
  Tensor input;
};

inline void apply_activation(Activation act, Tensor& z) {
  switch (act) {
    case Activation::identity:
      return;
    case Activation::relu:
      for (double& v : z.values()) v = v > 0.0 ? v : 0.0;
      return;
    case Activation::sigmoid:
      for (double& v : z.values()) v = 1.0 / (1.0 + std::exp(-v));
      return;
  }
}

// activation(W x + b), x is in x B.
inline Tensor dense_forward(const DenseLayer& layer, const Tensor& x) {
  if (x.rows() != layer.in_dim()) {
    throw DimensionError("dense_forward: input rows " + std::to_string(x.rows()) +
                         " != in_dim " + std::to_string(layer.in_dim()));
  }
  Tensor z = matmul(layer.weight, x);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const double b = layer.bias(r, 0);
    for (double& v : z.row(r)) v += b;
  }
  apply_activation(layer.activation, z);
  return z;
}

// Backward pass given the cached forward output y.
inline DenseGrads dense_backward(const DenseLayer& layer, const Tensor& x,
                                 const Tensor& y, const Tensor& upstream) {
  if (x.rows() != layer.in_dim() || upstream.rows() != layer.out_dim() ||
      upstream.cols() != x.cols() || !y.same_shape(upstream)) {
    throw DimensionError("dense_backward: inconsistent shapes");
  }
  Tensor dz = upstream;
  switch (layer.activation) {
    case Activation::identity:
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < dz.size(); ++i)
        if (y[i] <= 0.0) dz[i] = 0.0;
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= y[i] * (1.0 - y[i]);
      break;
  }
  return DenseGrads{matmul_nt(dz, x), row_sums(dz), matmul_tn(layer.weight, dz)};
}

inline DenseGrads dense_backward(const DenseLayer& layer, const Tensor& x,
                                 const Tensor& upstream) {
  return dense_backward(layer, x, dense_forward(layer, x), upstream);
}

}  // namespace vflsim
