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

// Predictive-coding energy and its analytic gradients.
//
// With prediction errors eps_ell = z_ell - f_ell(a_ell), a_ell = z_{ell-1} W_ell^T + b_ell,
// the energy of a batch of N samples is
//
//   F = 1/(2N) sum_ell ||eps_ell||_F^2 .
//
// The 1/(2N) factor is part of the definition everywhere in this library, so
// the closed-form equilibrium energy in theory.hpp is directly comparable.

#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pcflow/activity.hpp"
#include "pcflow/network.hpp"

namespace pcflow {

struct EnergyReport {
  std::vector<double> per_layer;  // layers 1..L
  double total = 0.0;
};

/// dF/dz for every layer of a state; clamped layers hold exact zeros.
template <typename Scalar>
struct ActivityGradient {
  std::vector<Matrix<Scalar>> grads;

  /// Largest absolute entry over all layers.
  double max_norm() const {
    double m = 0.0;
    for (const auto& g : grads)
      if (g.size() > 0) m = std::max(m, static_cast<double>(g.cwiseAbs().maxCoeff()));
    return m;
  }
};

/// dF/dW_ell and dF/db_ell, indexed like Network::layers.
template <typename Scalar>
struct ParamGradient {
  std::vector<Matrix<Scalar>> weights;
  std::vector<Vector<Scalar>> biases;

  static ParamGradient zeros_like(const Network<Scalar>& net) {
    ParamGradient g;
    for (const auto& layer : net.layers) {
      g.weights.push_back(Matrix<Scalar>::Zero(layer.weight.rows(), layer.weight.cols()));
      g.biases.push_back(Vector<Scalar>::Zero(layer.bias.size()));
    }
    return g;
  }
};

namespace detail {

// Per-layer intermediates for ell = 1..L (index 0 unused):
//   value[ell] = f(a_ell), eps[ell] = z_ell - value[ell],
//   delta[ell] = eps[ell] (.) f'(a_ell)   (aliases eps for identity layers).
template <typename Scalar>
struct LayerErrors {
  std::vector<Matrix<Scalar>> value;
  std::vector<Matrix<Scalar>> deriv;
  std::vector<Matrix<Scalar>> eps;
  std::vector<Matrix<Scalar>> delta;

  const Matrix<Scalar>& delta_at(const Network<Scalar>& net, std::size_t ell) const {
    return net.layers[ell - 1].activation.is_identity() ? eps[ell] : delta[ell];
  }
};

// Fills `out`, reusing its storage. With `first_preactivation`, layer 1's
// pre-activation is taken from it instead of being recomputed from z_0.
template <typename Scalar>
void compute_layer_errors(const Network<Scalar>& net, const ActivityState<Scalar>& state,
                          LayerErrors<Scalar>& out,
                          const Matrix<Scalar>* first_preactivation = nullptr) {
  const std::size_t depth = net.depth();
  out.value.resize(depth + 1);
  out.deriv.resize(depth + 1);
  out.eps.resize(depth + 1);
  out.delta.resize(depth + 1);
  for (std::size_t ell = 1; ell <= depth; ++ell) {
    const auto& layer = net.layers[ell - 1];
    auto& value = out.value[ell];
    if (ell == 1 && first_preactivation != nullptr) {
      value = *first_preactivation;
    } else {
      value.noalias() = state.z[ell - 1] * layer.weight.transpose();
      value.rowwise() += layer.bias.transpose();
    }
    layer.activation.apply_inplace(value, out.deriv[ell]);
    out.eps[ell] = state.z[ell] - value;
    if (!layer.activation.is_identity())
      out.delta[ell] = out.eps[ell].cwiseProduct(out.deriv[ell]);
  }
}

template <typename Scalar>
LayerErrors<Scalar> layer_errors(const Network<Scalar>& net, const ActivityState<Scalar>& state) {
  LayerErrors<Scalar> out;
  compute_layer_errors(net, state, out);
  return out;
}

}  // namespace detail

/// Per-layer and total energy, 1/(2N) sum ||eps_ell||^2.
template <typename Scalar>
EnergyReport pc_energy(const Network<Scalar>& net, const ActivityState<Scalar>& state) {
  check_network(net);
  check_state(net, state);
  const double n = static_cast<double>(state.batch());
  EnergyReport report;
  const auto errors = detail::layer_errors(net, state);
  for (std::size_t ell = 1; ell <= net.depth(); ++ell) {
    const double e = static_cast<double>(errors.eps[ell].squaredNorm()) / (2.0 * n);
    report.per_layer.push_back(e);
    report.total += e;
  }
  return report;
}

/// Right-hand side of the inference flow, dF/dz.
///
/// When the input layer is clamped, the first layer's pre-activation is
/// constant during inference and is computed once at construction. The
/// field must then only be evaluated on states sharing that z_0. Holds a
/// scratch workspace, so one instance must not be shared across threads.
template <typename Scalar>
class GradientField {
 public:
  GradientField(const Network<Scalar>& net, const ActivityState<Scalar>& state) : net_(net) {
    check_network(net);
    check_state(net, state);
    if (state.clamped_input) first_preactivation_ = preactivation(net.layers.front(), state.z[0]);
  }

  /// Writes dF/dz into `out`, reusing its storage.
  void evaluate(const ActivityState<Scalar>& state, ActivityGradient<Scalar>& out) const {
    const std::size_t depth = net_.depth();
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(state.batch());
    detail::compute_layer_errors(net_, state, work_,
                                 first_preactivation_ ? &*first_preactivation_ : nullptr);
    out.grads.resize(depth + 1);
    for (std::size_t ell = 0; ell <= depth; ++ell) {
      const auto& z = state.z[ell];
      auto& g = out.grads[ell];
      if (!state.is_free(ell)) {
        g.setZero(z.rows(), z.cols());
        continue;
      }
      if (ell >= 1) {
        g = work_.eps[ell];
      } else {
        g.setZero(z.rows(), z.cols());
      }
      if (ell < depth) g.noalias() -= work_.delta_at(net_, ell + 1) * net_.layers[ell].weight;
      g *= inv_n;
    }
  }

  ActivityGradient<Scalar> operator()(const ActivityState<Scalar>& state) const {
    ActivityGradient<Scalar> out;
    evaluate(state, out);
    return out;
  }

  const Network<Scalar>& network() const { return net_; }

 private:
  const Network<Scalar>& net_;
  std::optional<Matrix<Scalar>> first_preactivation_;
  mutable detail::LayerErrors<Scalar> work_;
};

/// dF/dz_ell = (1/N)[eps_ell - (eps_{ell+1} (.) f'(a_{ell+1})) W_{ell+1}] for free layers.
template <typename Scalar>
ActivityGradient<Scalar> activity_grad(const Network<Scalar>& net,
                                       const ActivityState<Scalar>& state) {
  return GradientField<Scalar>(net, state)(state);
}

/// dF/dW_ell = -(1/N) delta_ell^T z_{ell-1},  dF/db_ell = -(1/N) colsum(delta_ell).
template <typename Scalar>
ParamGradient<Scalar> param_grad(const Network<Scalar>& net, const ActivityState<Scalar>& state) {
  check_network(net);
  check_state(net, state);
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(state.batch());
  const auto errors = detail::layer_errors(net, state);
  ParamGradient<Scalar> g;
  for (std::size_t ell = 1; ell <= net.depth(); ++ell) {
    const auto& layer = net.layers[ell - 1];
    const auto& delta = errors.delta_at(net, ell);
    Matrix<Scalar> gw = delta.transpose() * state.z[ell - 1];
    g.weights.push_back(-inv_n * gw);
    if (layer.learn_bias) {
      g.biases.push_back(-inv_n * delta.colwise().sum().transpose());
    } else {
      g.biases.push_back(Vector<Scalar>::Zero(layer.bias.size()));
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Hybrid PC: a generator z_0 -> z_L paired with an amortiser y -> z_0 whose
// layer k predicts generator activity z_{L-k}.

template <typename Scalar>
void check_mirrored(const Network<Scalar>& generator, const Network<Scalar>& amortiser) {
  check_network(generator);
  check_network(amortiser);
  const auto g = generator.dims();
  const auto a = amortiser.dims();
  if (g.size() != a.size())
    throw ShapeError("amortiser depth " + std::to_string(amortiser.depth()) +
                     " != generator depth " + std::to_string(generator.depth()));
  const std::size_t depth = generator.depth();
  for (std::size_t k = 0; k <= depth; ++k)
    if (a[k] != g[depth - k])
      throw ShapeError("amortiser width " + std::to_string(a[k]) + " at layer " +
                       std::to_string(k) + " does not mirror generator width " +
                       std::to_string(g[depth - k]));
}

/// Amortiser activities u_0 = y, u_k = z_{L-k}, u_L = x (or z_0 when no x); all clamped.
template <typename Scalar>
ActivityState<Scalar> amortiser_targets(const Network<Scalar>& generator,
                                        const ActivityState<Scalar>& gen_state,
                                        const MatrixArg<Scalar>& y,
                                        const std::optional<MatrixArg<Scalar>>& x = std::nullopt) {
  check_state(generator, gen_state);
  const std::size_t depth = generator.depth();
  ActivityState<Scalar> u;
  u.z.resize(depth + 1);
  u.z[0] = y;
  for (std::size_t k = 1; k < depth; ++k) u.z[k] = gen_state.z[depth - k];
  u.z[depth] = x ? *x : gen_state.z[0];
  u.clamped_input = true;
  u.clamped_output = true;
  return u;
}

/// (generator energy, amortiser energy).
template <typename Scalar>
std::pair<EnergyReport, EnergyReport> hpc_energy(
    const Network<Scalar>& generator, const Network<Scalar>& amortiser,
    const ActivityState<Scalar>& gen_state, const MatrixArg<Scalar>& y,
    const std::optional<MatrixArg<Scalar>>& x = std::nullopt) {
  check_mirrored(generator, amortiser);
  const auto u = amortiser_targets(generator, gen_state, y, x);
  check_state(amortiser, u);
  return {pc_energy(generator, gen_state), pc_energy(amortiser, u)};
}

}  // namespace pcflow
