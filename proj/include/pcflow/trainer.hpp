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

// One-call training and evaluation steps.
//
// make_pc_step is exactly
//   init_activities_with_ffwd (or random init) -> clamp -> solve_inference -> update_params
// and nothing else; custom loops can call those pieces directly.

#pragma once

#include <cstddef>
#include <tuple>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pcflow/activity.hpp"
#include "pcflow/energy.hpp"
#include "pcflow/inference.hpp"
#include "pcflow/network.hpp"
#include "pcflow/optim.hpp"

namespace pcflow {

struct RecordFlags {
  bool energies = false;
  bool activities = false;
};

/// Per-inference-step history, filled only for the requested flags.
template <typename Scalar>
struct Trajectory {
  std::vector<double> times;
  std::vector<double> energies;
  std::vector<ActivityState<Scalar>> activities;
};

struct StepOptions {
  SolverConfig solver;
  RecordFlags record;
  RngSeed seed{0};          // random activity init (unsupervised only)
  double init_scale = 0.05;  // std of the random activity init
};

template <typename Scalar>
struct StepResult {
  Network<Scalar> network;  // updated
  OptimState<Scalar> optim_state;
  EnergyReport energies;  // at the equilibrium, before the parameter update
  SolveStats solve_stats;
  ActivityState<Scalar> activities;  // equilibrium
  Trajectory<Scalar> trajectory;
};

namespace detail {

template <typename Scalar>
InferenceObserver<Scalar> make_recorder(const Network<Scalar>& net, const RecordFlags& flags,
                                        Trajectory<Scalar>& out) {
  if (!flags.energies && !flags.activities) return {};
  return [&net, flags, &out](double t, const ActivityState<Scalar>& s) {
    out.times.push_back(t);
    if (flags.energies) out.energies.push_back(pc_energy(net, s).total);
    if (flags.activities) out.activities.push_back(s);
  };
}

template <typename Scalar>
void check_targets(const Matrix<Scalar>& y, const std::optional<Matrix<Scalar>>& x) {
  if (x && x->rows() != y.rows())
    throw ShapeError("target has " + std::to_string(y.rows()) + " rows, input has " +
                     std::to_string(x->rows()));
}

}  // namespace detail

/// Parameter update at supplied (equilibrated) activities. When given, `y`
/// and `x` overwrite the clamped boundary layers first.
template <typename Scalar>
std::pair<Network<Scalar>, OptimState<Scalar>> update_params(
    const Network<Scalar>& net, const ActivityState<Scalar>& equilibrated,
    const OptimState<Scalar>& optim_state, const std::optional<MatrixArg<Scalar>>& y = std::nullopt,
    const std::optional<MatrixArg<Scalar>>& x = std::nullopt) {
  if (!y && !x) return apply_update(net, param_grad(net, equilibrated), optim_state);
  ActivityState<Scalar> state = equilibrated;
  if (y) state = clamp_output(std::move(state), *y);
  if (x) state = clamp_input(std::move(state), *x);
  return apply_update(net, param_grad(net, state), optim_state);
}

/// Initial activities for a PC step: feedforward from x when supervised,
/// random otherwise; output clamped to y either way.
template <typename Scalar>
ActivityState<Scalar> init_step_activities(const Network<Scalar>& net, const MatrixArg<Scalar>& y,
                                           const std::optional<MatrixArg<Scalar>>& x,
                                           const StepOptions& options) {
  detail::check_targets(y, x);
  ActivityState<Scalar> state =
      x ? init_activities_with_ffwd(net, *x)
        : init_activities_random(net, y.rows(), options.seed, options.init_scale);
  return clamp_output(std::move(state), y);
}

/// Inference to t_max, then one optimizer update at the equilibrium.
template <typename Scalar>
StepResult<Scalar> make_pc_step(const Network<Scalar>& net, const OptimState<Scalar>& optim_state,
                                const MatrixArg<Scalar>& y,
                                const std::optional<MatrixArg<Scalar>>& x = std::nullopt,
                                const StepOptions& options = {}) {
  StepResult<Scalar> result;
  const auto initial = init_step_activities(net, y, x, options);
  auto solved = solve_inference(net, initial, options.solver,
                                detail::make_recorder(net, options.record, result.trajectory));
  result.energies = pc_energy(net, solved.state);
  std::tie(result.network, result.optim_state) = update_params(net, solved.state, optim_state);
  result.solve_stats = solved.stats;
  result.activities = std::move(solved.state);
  return result;
}

template <typename Scalar>
struct HpcStepResult {
  StepResult<Scalar> generator;
  StepResult<Scalar> amortiser;  // activities hold the amortiser targets; no solve stats
};

/// Hybrid step: the amortiser's feedforward pass from y initializes the
/// generator's activities, generator inference runs to t_max, then both
/// networks are updated (the amortiser towards the generator's equilibrium).
template <typename Scalar>
HpcStepResult<Scalar> make_hpc_step(const Network<Scalar>& generator,
                                    const Network<Scalar>& amortiser,
                                    const std::pair<OptimState<Scalar>, OptimState<Scalar>>& optim,
                                    const MatrixArg<Scalar>& y,
                                    const std::optional<MatrixArg<Scalar>>& x = std::nullopt,
                                    const StepOptions& options = {}) {
  check_mirrored(generator, amortiser);
  detail::check_targets(y, x);
  const std::size_t depth = generator.depth();

  const auto guess = init_activities_with_ffwd(amortiser, y);
  ActivityState<Scalar> initial;
  initial.z.resize(depth + 1);
  for (std::size_t k = 1; k <= depth; ++k) initial.z[depth - k] = guess.z[k];
  initial.z[depth] = y;
  initial.clamped_output = true;
  if (x) initial = clamp_input(std::move(initial), *x);

  HpcStepResult<Scalar> result;
  auto& gen = result.generator;
  auto solved = solve_inference(generator, initial, options.solver,
                                detail::make_recorder(generator, options.record, gen.trajectory));
  gen.energies = pc_energy(generator, solved.state);
  std::tie(gen.network, gen.optim_state) = update_params(generator, solved.state, optim.first);
  gen.solve_stats = solved.stats;
  gen.activities = std::move(solved.state);

  auto& amo = result.amortiser;
  amo.activities = amortiser_targets(generator, gen.activities, y, x);
  amo.energies = pc_energy(amortiser, amo.activities);
  std::tie(amo.network, amo.optim_state) = update_params(amortiser, amo.activities, optim.second);
  return result;
}

/// Row-wise argmax; ties resolve to the lowest index.
template <typename Scalar>
std::vector<int> argmax_rows(const Matrix<Scalar>& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()), 0);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < m.cols(); ++c)
      if (m(r, c) > m(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

/// Fraction of rows whose feedforward argmax equals the label.
template <typename Scalar>
double test_discriminative_pc(const Network<Scalar>& net, const MatrixArg<Scalar>& x,
                              const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != x.rows())
    throw ShapeError("test_discriminative_pc: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(x.rows()) + " inputs");
  if (labels.empty()) return 0.0;
  const auto predicted = argmax_rows<Scalar>(forward(net, x));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

/// One-hot label overload.
template <typename Scalar>
double test_discriminative_pc(const Network<Scalar>& net, const MatrixArg<Scalar>& x,
                              const MatrixArg<Scalar>& one_hot_labels) {
  return test_discriminative_pc(net, x, argmax_rows<Scalar>(one_hot_labels));
}

struct GenerativeEval {
  double reconstruction_mse = 0.0;
  EnergyReport equilibrium_energy;
};

/// Inference with y clamped (input clamped only when x is given); reports the
/// MSE of the top-layer prediction f_L(z_{L-1} W_L^T + b_L) against y.
template <typename Scalar>
GenerativeEval test_generative_pc(const Network<Scalar>& net, const MatrixArg<Scalar>& y,
                                  const std::optional<MatrixArg<Scalar>>& x = std::nullopt,
                                  const StepOptions& options = {}) {
  const auto initial = init_step_activities(net, y, x, options);
  const auto solved = solve_inference(net, initial, options.solver);
  const auto& top = net.layers.back();
  const Matrix<Scalar> prediction =
      top.activation.apply(preactivation(top, solved.state.z[net.depth() - 1]));
  GenerativeEval out;
  out.reconstruction_mse =
      static_cast<double>((prediction - y).squaredNorm()) / static_cast<double>(y.size());
  out.equilibrium_energy = pc_energy(net, solved.state);
  return out;
}

}  // namespace pcflow
