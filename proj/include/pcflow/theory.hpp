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

// Closed-form equilibrium energy of deep linear networks.
//
// For f_ell = identity and zero biases, the minimum of the energy over the
// hidden activities (input and output clamped) is the rescaled MSE
//
//   F* = 1/(2N) sum_i r_i^T S^{-1} r_i,   r_i = y_i - W_{L:1} x_i,
//   S  = I + sum_{ell=2}^{L} W_{L:ell} W_{L:ell}^T,
//
// where W_{k:ell} = W_k W_{k-1} ... W_ell. Since S >= I, F* never exceeds the
// plain MSE and the linear solve against S is always well posed.

#pragma once

#include <cstddef>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "pcflow/activity.hpp"
#include "pcflow/energy.hpp"
#include "pcflow/inference.hpp"
#include "pcflow/network.hpp"

namespace pcflow {

template <typename Scalar>
void require_linear(const Network<Scalar>& net) {
  check_network(net);
  for (std::size_t i = 0; i < net.depth(); ++i)
    if (!net.layers[i].activation.is_identity())
      throw NotLinearError("layer " + std::to_string(i + 1) + " has activation " +
                           to_string(net.layers[i].activation) + "; a deep linear network is required");
}

/// W_k W_{k-1} ... W_ell, 1-based, ell <= k.
template <typename Scalar>
Matrix<Scalar> weight_chain(const Network<Scalar>& net, std::size_t k, std::size_t ell) {
  require_linear(net);
  if (ell < 1 || ell > k || k > net.depth())
    throw InvalidArgumentError("weight_chain: need 1 <= ell <= k <= L, got k=" + std::to_string(k) +
                               ", ell=" + std::to_string(ell));
  Matrix<Scalar> product = net.layers[ell - 1].weight;
  for (std::size_t j = ell + 1; j <= k; ++j) product = net.layers[j - 1].weight * product;
  return product;
}

/// S = I + sum_{ell=2}^{L} W_{L:ell} W_{L:ell}^T (d_y x d_y).
template <typename Scalar>
Matrix<Scalar> rescaling_matrix(const Network<Scalar>& net) {
  require_linear(net);
  const std::size_t depth = net.depth();
  const Eigen::Index dy = net.output_dim();
  Matrix<Scalar> s = Matrix<Scalar>::Identity(dy, dy);
  // Accumulate W_{L:ell} from the top down: W_{L:L}, W_{L:L-1}, ...
  Matrix<Scalar> chain;
  for (std::size_t ell = depth; ell >= 2; --ell) {
    chain = (ell == depth) ? Matrix<Scalar>(net.layers[depth - 1].weight)
                           : Matrix<Scalar>(chain * net.layers[ell - 1].weight);
    s.noalias() += chain * chain.transpose();
  }
  return s;
}

/// F* for a deep linear network with zero biases, via a Cholesky solve on S.
template <typename Scalar>
double linear_equilibrium_energy(const Network<Scalar>& net, const MatrixArg<Scalar>& x,
                                 const MatrixArg<Scalar>& y) {
  require_linear(net);
  for (std::size_t i = 0; i < net.depth(); ++i)
    if (!net.layers[i].bias.isZero(0))
      throw InvalidArgumentError("linear_equilibrium_energy: layer " + std::to_string(i + 1) +
                                 " has a nonzero bias");
  if (x.cols() != net.input_dim || y.cols() != net.output_dim() || x.rows() != y.rows() ||
      x.rows() < 1)
    throw ShapeError("linear_equilibrium_energy: x is " + std::to_string(x.rows()) + "x" +
                     std::to_string(x.cols()) + ", y is " + std::to_string(y.rows()) + "x" +
                     std::to_string(y.cols()));

  const Matrix<Scalar> s = rescaling_matrix(net);
  const Eigen::LLT<Matrix<Scalar>> llt(s);
  if (llt.info() != Eigen::Success)
    throw Error("linear_equilibrium_energy: rescaling matrix is not positive definite");

  // Residuals as columns: R = Y^T - W_{L:1} X^T (d_y x N).
  const Matrix<Scalar> residual =
      y.transpose() - weight_chain(net, net.depth(), 1) * x.transpose();
  const Matrix<Scalar> solved = llt.solve(residual);
  const double quad = static_cast<double>(residual.cwiseProduct(solved).sum());
  return quad / (2.0 * static_cast<double>(x.rows()));
}

struct EnergyGap {
  double theoretical = 0.0;
  double numerical = 0.0;
  double gap = 0.0;  // numerical - theoretical
  SolveStats stats;
};

/// Runs inference from the feedforward init with y clamped and compares the
/// reached energy with F*.
template <typename Scalar>
EnergyGap energy_gap(const Network<Scalar>& net, const MatrixArg<Scalar>& x, const MatrixArg<Scalar>& y,
                     const SolverConfig& solver) {
  EnergyGap out;
  out.theoretical = linear_equilibrium_energy(net, x, y);
  const auto initial = clamp_output(init_activities_with_ffwd(net, x), y);
  const auto solved = solve_inference(net, initial, solver);
  out.numerical = pc_energy(net, solved.state).total;
  out.gap = out.numerical - out.theoretical;
  out.stats = solved.stats;
  return out;
}

}  // namespace pcflow
