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

// Test-side oracles shared by the unit and acceptance suites. Nothing here
// calls the library's gradient code: energies are re-derived by explicit
// loops and gradients by central differences of the library energy.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "pcflow/pcflow.hpp"

namespace pcflow::testing {

using Mat = Matrix<double>;
using Vec = Vector<double>;

/// Scalar activation evaluated one entry at a time.
inline double act_scalar(const Activation& a, double v) {
  switch (a.kind) {
    case Activation::Kind::kIdentity: return v;
    case Activation::Kind::kTanh: return std::tanh(v);
    case Activation::Kind::kReLU: return v > 0 ? v : 0.0;
    case Activation::Kind::kLeakyReLU: return v > 0 ? v : a.slope * v;
  }
  return v;
}

/// (1/2N) sum over samples, layers and units of squared prediction errors,
/// by explicit loops.
inline double naive_energy(const Network<double>& net, const ActivityState<double>& s) {
  const auto n = s.batch();
  double total = 0.0;
  for (std::size_t ell = 1; ell <= net.depth(); ++ell) {
    const auto& layer = net.layers[ell - 1];
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        double a = layer.bias(r);
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) a += layer.weight(r, c) * s.z[ell - 1](i, c);
        const double e = s.z[ell](i, r) - act_scalar(layer.activation, a);
        total += e * e;
      }
  }
  return total / (2.0 * static_cast<double>(n));
}

/// Random network with the given widths; activations cycled per layer.
inline Network<double> random_network(const std::vector<Eigen::Index>& dims, const std::vector<Activation>& acts,
                                      std::mt19937_64& rng, double bias_scale = 0.3) {
  auto net = init_network<double>(dims, Activation::identity(), RngSeed{rng()});
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t i = 0; i < net.depth(); ++i) {
    net.layers[i].activation = acts[i % acts.size()];
    for (Eigen::Index r = 0; r < net.layers[i].bias.size(); ++r) net.layers[i].bias(r) = bias_scale * g(rng);
  }
  return net;
}

inline Mat random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

inline ActivityState<double> random_state(const Network<double>& net, Eigen::Index n, std::mt19937_64& rng,
                                          bool clamp_in, bool clamp_out) {
  ActivityState<double> s;
  for (auto d : net.dims()) s.z.push_back(random_matrix(n, d, rng));
  s.clamped_input = clamp_in;
  s.clamped_output = clamp_out;
  return s;
}

/// Relative error with an absolute floor, so entries that are zero in both
/// do not blow up the ratio.
inline double rel_err(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Fourth-order central stencil. Its truncation error at h = 1e-3 is about
/// 1e-12, and rounding stays near 1e-13 relative to f.
inline double central_difference(const std::function<double(double)>& f, double x, double h = 1e-3) {
  return (8.0 * (f(x + h) - f(x - h)) - (f(x + 2 * h) - f(x - 2 * h))) / (12.0 * h);
}

/// Central-difference gradient of pc_energy w.r.t. z_ell(i, j).
inline double fd_activity(const Network<double>& net, ActivityState<double> s, std::size_t ell, Eigen::Index i,
                          Eigen::Index j, double h = 1e-3) {
  const double x0 = s.z[ell](i, j);
  return central_difference(
      [&](double v) {
        s.z[ell](i, j) = v;
        return pc_energy(net, s).total;
      },
      x0, h);
}

inline double fd_weight(Network<double> net, const ActivityState<double>& s, std::size_t layer, Eigen::Index r,
                        Eigen::Index c, double h = 1e-3) {
  const double x0 = net.layers[layer].weight(r, c);
  return central_difference(
      [&](double v) {
        net.layers[layer].weight(r, c) = v;
        return pc_energy(net, s).total;
      },
      x0, h);
}

inline double fd_bias(Network<double> net, const ActivityState<double>& s, std::size_t layer, Eigen::Index r,
                      double h = 1e-3) {
  const double x0 = net.layers[layer].bias(r);
  return central_difference(
      [&](double v) {
        net.layers[layer].bias(r) = v;
        return pc_energy(net, s).total;
      },
      x0, h);
}

/// True when every ReLU-type pre-activation is at least `margin` from the
/// kink, so a stencil of width 4h does not straddle it.
inline bool away_from_kinks(const Network<double>& net, const ActivityState<double>& s, double margin) {
  for (std::size_t ell = 1; ell <= net.depth(); ++ell) {
    const auto& layer = net.layers[ell - 1];
    if (layer.activation.kind != Activation::Kind::kReLU && layer.activation.kind != Activation::Kind::kLeakyReLU)
      continue;
    const Mat a = preactivation(layer, s.z[ell - 1]);
    if ((a.array().abs() < margin).any()) return false;
  }
  return true;
}

}  // namespace pcflow::testing
