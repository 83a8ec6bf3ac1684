// Copyright 2026 The pcflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "pcflow/activation.hpp"
#include "pcflow/error.hpp"

namespace pcflow {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
/// Matrix parameter whose Scalar is taken from another argument (the network
/// or state), so Eigen expressions and other matrix types convert implicitly.
template <typename Scalar>
using MatrixArg = Matrix<std::type_identity_t<Scalar>>;

/// Seed for every randomized initializer. Same seed, same calls, same bits.
struct RngSeed {
  std::uint64_t value = 0;
};

/// One affine + activation stage: z_out = f(z_in W^T + b).
template <typename Scalar>
struct Layer {
  Matrix<Scalar> weight;  // d_out x d_in
  Vector<Scalar> bias;    // d_out
  Activation activation;
  // When false the bias is pinned: its gradient is reported as zero and
  // optimizers leave it untouched.
  bool learn_bias = true;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

/// Feedforward topology. Layer ell (1-based) is layers[ell - 1].
template <typename Scalar>
struct Network {
  Eigen::Index input_dim = 0;
  std::vector<Layer<Scalar>> layers;

  std::size_t depth() const { return layers.size(); }
  Eigen::Index output_dim() const { return layers.empty() ? input_dim : layers.back().out_dim(); }

  /// Widths d_0 ... d_L.
  std::vector<Eigen::Index> dims() const {
    std::vector<Eigen::Index> d{input_dim};
    for (const auto& layer : layers) d.push_back(layer.out_dim());
    return d;
  }

  bool all_identity() const {
    for (const auto& layer : layers)
      if (!layer.activation.is_identity()) return false;
    return true;
  }
};

/// Throws ShapeError/InvalidDimensionError when the topology is inconsistent.
/// With `check_finite`, also rejects NaN/Inf parameters.
template <typename Scalar>
void check_network(const Network<Scalar>& net, bool check_finite = false) {
  if (net.layers.empty()) throw InvalidDimensionError("network needs at least one layer");
  if (net.input_dim <= 0) throw InvalidDimensionError("input_dim must be positive");
  Eigen::Index prev = net.input_dim;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& layer = net.layers[i];
    const std::string name = "layer " + std::to_string(i + 1);
    if (layer.weight.rows() <= 0) throw InvalidDimensionError(name + " has zero width");
    if (layer.weight.cols() != prev)
      throw ShapeError(name + ": weight has " + std::to_string(layer.weight.cols()) +
                       " columns, expected " + std::to_string(prev));
    if (layer.bias.size() != layer.weight.rows())
      throw ShapeError(name + ": bias length " + std::to_string(layer.bias.size()) +
                       " != weight rows " + std::to_string(layer.weight.rows()));
    if (check_finite && !(layer.weight.allFinite() && layer.bias.allFinite()))
      throw InvalidArgumentError(name + " has non-finite parameters");
    prev = layer.weight.rows();
  }
}

/// Pre-activation z_prev W^T + b for one layer.
template <typename Scalar, typename Derived>
Matrix<Scalar> preactivation(const Layer<Scalar>& layer, const Eigen::MatrixBase<Derived>& z_prev) {
  Matrix<Scalar> a = z_prev * layer.weight.transpose();
  a.rowwise() += layer.bias.transpose();
  return a;
}

/// Feedforward pass over a batch-major input (N x d_0).
template <typename Scalar>
Matrix<Scalar> forward(const Network<Scalar>& net, const MatrixArg<Scalar>& x) {
  check_network(net);
  if (x.cols() != net.input_dim)
    throw ShapeError("layer 1: input has " + std::to_string(x.cols()) + " columns, expected " +
                     std::to_string(net.input_dim));
  Matrix<Scalar> z = x;
  for (const auto& layer : net.layers) z = layer.activation.apply(preactivation(layer, z));
  return z;
}

/// Weights ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases. `output_activation`
/// overrides the activation of the last layer when given.
template <typename Scalar = double>
Network<Scalar> init_network(const std::vector<Eigen::Index>& dims, Activation activation,
                             RngSeed seed,
                             std::optional<Activation> output_activation = std::nullopt) {
  if (dims.size() < 2) throw InvalidDimensionError("init_network needs at least two widths");
  for (auto d : dims)
    if (d <= 0) throw InvalidDimensionError("init_network: widths must be positive");

  std::mt19937_64 rng(seed.value);
  Network<Scalar> net;
  net.input_dim = dims.front();
  for (std::size_t ell = 1; ell < dims.size(); ++ell) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[ell - 1]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Layer<Scalar> layer;
    layer.weight.resize(dims[ell], dims[ell - 1]);
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        layer.weight(r, c) = static_cast<Scalar>(dist(rng));
    layer.bias = Vector<Scalar>::Zero(dims[ell]);
    layer.activation =
        (ell + 1 == dims.size() && output_activation) ? *output_activation : activation;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

/// Converts a network to another scalar type.
template <typename To, typename From>
Network<To> cast_network(const Network<From>& net) {
  Network<To> out;
  out.input_dim = net.input_dim;
  for (const auto& layer : net.layers)
    out.layers.push_back({layer.weight.template cast<To>(), layer.bias.template cast<To>(),
                          layer.activation, layer.learn_bias});
  return out;
}

}  // namespace pcflow
