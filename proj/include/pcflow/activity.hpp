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

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "pcflow/network.hpp"

namespace pcflow {

/// Layer activities z_0 ... z_L, each batch-major (N x d_ell).
///
/// Clamped layers are boundary conditions: inference never writes them.
template <typename Scalar>
struct ActivityState {
  std::vector<Matrix<Scalar>> z;
  bool clamped_input = false;
  bool clamped_output = false;

  std::size_t depth() const { return z.empty() ? 0 : z.size() - 1; }
  Eigen::Index batch() const { return z.empty() ? 0 : z.front().rows(); }

  bool is_free(std::size_t ell) const {
    if (ell == 0) return !clamped_input;
    if (ell == depth()) return !clamped_output;
    return true;
  }
};

/// Checks that `state` has one N x d_ell block per layer of `net`.
template <typename Scalar>
void check_state(const Network<Scalar>& net, const ActivityState<Scalar>& state) {
  const auto dims = net.dims();
  if (state.z.size() != dims.size())
    throw ShapeError("activity state has " + std::to_string(state.z.size()) +
                     " layers, network expects " + std::to_string(dims.size()));
  const Eigen::Index n = state.batch();
  if (n < 1) throw ShapeError("activity state has an empty batch");
  for (std::size_t ell = 0; ell < dims.size(); ++ell) {
    if (state.z[ell].rows() != n)
      throw ShapeError("activity layer " + std::to_string(ell) + " has batch " +
                       std::to_string(state.z[ell].rows()) + ", expected " + std::to_string(n));
    if (state.z[ell].cols() != dims[ell])
      throw ShapeError("activity layer " + std::to_string(ell) + " has width " +
                       std::to_string(state.z[ell].cols()) + ", expected " +
                       std::to_string(dims[ell]));
  }
}

/// z_0 = x and z_ell = f_ell(z_{ell-1} W_ell^T + b_ell). Input clamped, output free.
template <typename Scalar>
ActivityState<Scalar> init_activities_with_ffwd(const Network<Scalar>& net,
                                                const MatrixArg<Scalar>& x) {
  check_network(net);
  if (x.cols() != net.input_dim)
    throw ShapeError("layer 1: input has " + std::to_string(x.cols()) + " columns, expected " +
                     std::to_string(net.input_dim));
  ActivityState<Scalar> state;
  state.z.reserve(net.depth() + 1);
  state.z.push_back(x);
  for (const auto& layer : net.layers)
    state.z.push_back(layer.activation.apply(preactivation(layer, state.z.back())));
  state.clamped_input = true;
  state.clamped_output = false;
  return state;
}

/// Fills every layer with i.i.d. N(0, scale^2) entries. Nothing is clamped;
/// callers attach data with clamp_output / clamp_input.
template <typename Scalar>
ActivityState<Scalar> init_activities_random(const Network<Scalar>& net, Eigen::Index batch,
                                             RngSeed seed, double scale = 0.05) {
  check_network(net);
  if (!(scale > 0.0)) throw InvalidArgumentError("init_activities_random: scale must be > 0");
  if (batch < 1) throw InvalidDimensionError("init_activities_random: batch must be >= 1");
  std::mt19937_64 rng(seed.value);
  std::normal_distribution<double> dist(0.0, scale);
  ActivityState<Scalar> state;
  for (auto d : net.dims()) {
    Matrix<Scalar> z(batch, d);
    for (Eigen::Index r = 0; r < batch; ++r)
      for (Eigen::Index c = 0; c < d; ++c) z(r, c) = static_cast<Scalar>(dist(rng));
    state.z.push_back(std::move(z));
  }
  return state;
}

/// Returns a copy with z_L := y and the output marked clamped.
template <typename Scalar>
ActivityState<Scalar> clamp_output(ActivityState<Scalar> state, const MatrixArg<Scalar>& y) {
  if (state.z.empty()) throw ShapeError("clamp_output on an empty state");
  auto& top = state.z.back();
  if (y.rows() != top.rows() || y.cols() != top.cols())
    throw ShapeError("clamp_output: target is " + std::to_string(y.rows()) + "x" +
                     std::to_string(y.cols()) + ", output layer is " + std::to_string(top.rows()) +
                     "x" + std::to_string(top.cols()));
  top = y;
  state.clamped_output = true;
  return state;
}

/// Returns a copy with z_0 := x and the input marked clamped.
template <typename Scalar>
ActivityState<Scalar> clamp_input(ActivityState<Scalar> state, const MatrixArg<Scalar>& x) {
  if (state.z.empty()) throw ShapeError("clamp_input on an empty state");
  auto& bottom = state.z.front();
  if (x.rows() != bottom.rows() || x.cols() != bottom.cols())
    throw ShapeError("clamp_input: input is " + std::to_string(x.rows()) + "x" +
                     std::to_string(x.cols()) + ", input layer is " +
                     std::to_string(bottom.rows()) + "x" + std::to_string(bottom.cols()));
  bottom = x;
  state.clamped_input = true;
  return state;
}

}  // namespace pcflow
