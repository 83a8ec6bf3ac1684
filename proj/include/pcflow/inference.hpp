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

// Integration of the inference flow dz/dt = -dF/dz from t = 0 to t_max.
//
// Euler runs fixed steps. Heun runs the two-stage second-order scheme with
// its embedded Euler result as error estimate, and adapts the step with a
// PID controller on the RMS tolerance-scaled error.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>

#include "pcflow/activity.hpp"
#include "pcflow/energy.hpp"
#include "pcflow/network.hpp"

namespace pcflow {

enum class SolverKind { kEuler, kHeun };

inline std::string to_string(SolverKind kind) { return kind == SolverKind::kEuler ? "euler" : "heun"; }

inline SolverKind parse_solver(const std::string& name) {
  if (name == "euler") return SolverKind::kEuler;
  if (name == "heun") return SolverKind::kHeun;
  throw InvalidArgumentError("unknown solver '" + name + "'");
}

/// Step-size controller gains. Defaults are the elementary integral controller.
struct PIDCoeffs {
  double p = 0.0;
  double i = 1.0;
  double d = 0.0;
  double safety = 0.9;
  double factor_min = 0.2;
  double factor_max = 10.0;
};

struct SolverConfig {
  SolverKind kind = SolverKind::kHeun;
  double dt0 = 0.1;     // fixed step (Euler) or initial step (Heun)
  double t_max = 20.0;  // integration always runs to here unless stopped early
  double rtol = 1e-3;
  double atol = 1e-3;
  PIDCoeffs controller;
  std::size_t max_steps = 100000;  // attempted steps, rejected ones included
  std::optional<double> early_stop_grad_norm;
  bool adaptive = true;  // Heun only; false runs fixed dt0 steps like Euler
};

struct SolveStats {
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  std::size_t rhs_evaluations = 0;
  double final_grad_norm = 0.0;  // max-norm of dF/dz at the returned state
  double t_reached = 0.0;
};

/// The step budget ran out before t_max; stats describe the partial run.
class BudgetError : public Error {
 public:
  explicit BudgetError(const SolveStats& stats)
      : Error("inference exceeded max_steps=" +
              std::to_string(stats.accepted_steps + stats.rejected_steps) + " at t=" +
              std::to_string(stats.t_reached)),
        stats_(stats) {}
  const SolveStats& stats() const noexcept { return stats_; }

 private:
  SolveStats stats_;
};

/// Previous accepted error ratios, newest first.
struct ControllerMemory {
  std::optional<double> prev;
  std::optional<double> prev2;

  void push(double ratio) {
    prev2 = prev;
    prev = ratio;
  }
};

namespace detail {

template <typename Scalar>
void require_finite(const ActivityState<Scalar>& state, std::size_t step) {
  for (const auto& z : state.z)
    if (!z.allFinite()) throw DivergenceError("inference produced non-finite activities", step);
}

// z <- z - dt * grad on free layers, in place.
template <typename Scalar>
void euler_inplace(ActivityState<Scalar>& z, const ActivityGradient<Scalar>& grad, double dt) {
  const auto h = static_cast<Scalar>(dt);
  for (std::size_t ell = 0; ell < z.z.size(); ++ell)
    if (z.is_free(ell)) z.z[ell].noalias() -= h * grad.grads[ell];
}

// Heun stage combination shared by heun_step and solve_inference:
//   next = z - dt/2 (g1 + g2),  error = dt/2 (g1 - g2).
template <typename Scalar>
void heun_combine(const ActivityState<Scalar>& z, const ActivityGradient<Scalar>& g1,
                  const ActivityGradient<Scalar>& g2, double dt, ActivityState<Scalar>& next,
                  ActivityGradient<Scalar>& error) {
  const auto half = static_cast<Scalar>(dt / 2);
  next.clamped_input = z.clamped_input;
  next.clamped_output = z.clamped_output;
  next.z.resize(z.z.size());
  error.grads.resize(z.z.size());
  for (std::size_t ell = 0; ell < z.z.size(); ++ell) {
    next.z[ell] = z.z[ell];
    if (!z.is_free(ell)) {
      error.grads[ell].setZero(z.z[ell].rows(), z.z[ell].cols());
      continue;
    }
    next.z[ell].noalias() -= half * (g1.grads[ell] + g2.grads[ell]);
    error.grads[ell] = half * (g1.grads[ell] - g2.grads[ell]);
  }
}

template <typename Scalar>
void copy_state(const ActivityState<Scalar>& from, ActivityState<Scalar>& to) {
  to.clamped_input = from.clamped_input;
  to.clamped_output = from.clamped_output;
  to.z.resize(from.z.size());
  for (std::size_t ell = 0; ell < from.z.size(); ++ell) to.z[ell] = from.z[ell];
}

}  // namespace detail

/// z_ell <- z_ell - dt * grad_ell on free layers.
template <typename Scalar>
ActivityState<Scalar> euler_step(const ActivityState<Scalar>& state,
                                 const ActivityGradient<Scalar>& grad, double dt,
                                 std::size_t step_index = 0) {
  if (!(dt >= 0.0)) throw InvalidArgumentError("euler_step: dt must be >= 0");
  if (grad.grads.size() != state.z.size())
    throw ShapeError("euler_step: gradient has " + std::to_string(grad.grads.size()) +
                     " layers, state has " + std::to_string(state.z.size()));
  for (std::size_t ell = 0; ell < state.z.size(); ++ell)
    if (state.is_free(ell) && (grad.grads[ell].rows() != state.z[ell].rows() ||
                               grad.grads[ell].cols() != state.z[ell].cols()))
      throw ShapeError("euler_step: gradient shape mismatch at layer " + std::to_string(ell));
  ActivityState<Scalar> next = state;
  detail::euler_inplace(next, grad, dt);
  detail::require_finite(next, step_index);
  return next;
}

template <typename Scalar>
struct HeunResult {
  ActivityState<Scalar> state;
  ActivityGradient<Scalar> error;  // second-order minus embedded Euler result
};

/// Heun step from a precomputed k1 gradient (dF/dz at `state`).
template <typename Scalar, typename Rhs>
HeunResult<Scalar> heun_step(const ActivityState<Scalar>& state,
                             const ActivityGradient<Scalar>& grad_at_state, Rhs&& rhs, double dt,
                             std::size_t step_index = 0) {
  if (!(dt >= 0.0)) throw InvalidArgumentError("heun_step: dt must be >= 0");
  // Euler predictor z~ = z + dt k1 with k1 = -grad.
  ActivityState<Scalar> predictor = euler_step(state, grad_at_state, dt, step_index);
  const ActivityGradient<Scalar> grad_at_predictor = rhs(predictor);
  // With k = -grad: z' = z + dt/2 (k1 + k2), err = dt/2 (k2 - k1).
  HeunResult<Scalar> out;
  detail::heun_combine(state, grad_at_state, grad_at_predictor, dt, out.state, out.error);
  detail::require_finite(out.state, step_index);
  return out;
}

/// One Heun step: k1 = -rhs(z), z~ = z + dt k1, k2 = -rhs(z~), z' = z + dt/2 (k1 + k2).
template <typename Scalar, typename Rhs>
HeunResult<Scalar> heun_step(const ActivityState<Scalar>& state, Rhs&& rhs, double dt) {
  const ActivityGradient<Scalar> k1 = rhs(state);
  return heun_step(state, k1, rhs, dt);
}

/// Multiplicative step factor
///   clamp(safety * r^(-i/(q+1)) * prev^(-p/(q+1)) * prev2^(-d/(q+1)), min, max),
/// q = `order`, missing history treated as 1. A step is accepted iff r <= 1.
inline double pid_adapt(double err_ratio, const ControllerMemory& memory, const PIDCoeffs& coeffs,
                        int order) {
  const double k = static_cast<double>(order + 1);
  const double prev = memory.prev.value_or(1.0);
  const double prev2 = memory.prev2.value_or(1.0);
  auto term = [k](double ratio, double gain) {
    return gain == 0.0 ? 1.0 : std::pow(ratio, -gain / k);
  };
  double factor =
      coeffs.safety * term(err_ratio, coeffs.i) * term(prev, coeffs.p) * term(prev2, coeffs.d);
  if (std::isnan(factor)) factor = coeffs.factor_min;
  return std::clamp(factor, coeffs.factor_min, coeffs.factor_max);
}

/// RMS over free entries of err / (atol + rtol * max(|z_old|, |z_new|)).
template <typename Scalar>
double scaled_error_norm(const ActivityGradient<Scalar>& err, const ActivityState<Scalar>& z_old,
                         const ActivityState<Scalar>& z_new, double rtol, double atol) {
  if (err.grads.size() != z_old.z.size() || z_new.z.size() != z_old.z.size())
    throw ShapeError("scaled_error_norm: layer count mismatch");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t ell = 0; ell < z_old.z.size(); ++ell) {
    if (!z_old.is_free(ell)) continue;
    const auto& e = err.grads[ell];
    const auto& a = z_old.z[ell];
    const auto& b = z_new.z[ell];
    if (e.rows() != a.rows() || e.cols() != a.cols() || b.rows() != a.rows() ||
        b.cols() != a.cols())
      throw ShapeError("scaled_error_norm: shape mismatch at layer " + std::to_string(ell));
    const auto scale =
        (atol + rtol * a.array().abs().max(b.array().abs()).template cast<double>()).eval();
    sum += (e.array().template cast<double>() / scale).square().sum();
    count += static_cast<std::size_t>(e.size());
  }
  return count == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(count));
}

/// Observer called with (t, state) at t = 0 and after every accepted step.
template <typename Scalar>
using InferenceObserver = std::function<void(double, const ActivityState<Scalar>&)>;

template <typename Scalar>
struct InferenceResult {
  ActivityState<Scalar> state;
  SolveStats stats;
};

/// Error-estimate order passed to pid_adapt for Heun: the embedded Euler
/// estimate is locally O(dt^2), so the error exponent is 1/2.
inline constexpr int kHeunErrorOrder = 1;

/// Integrates dz/dt = -activity_grad(net, z) from 0 to config.t_max.
template <typename Scalar>
InferenceResult<Scalar> solve_inference(const Network<Scalar>& net,
                                        const ActivityState<Scalar>& initial,
                                        const SolverConfig& config,
                                        const InferenceObserver<std::type_identity_t<Scalar>>& observer = {}) {
  if (!(config.dt0 > 0.0)) throw InvalidArgumentError("solve_inference: dt0 must be > 0");
  if (!(config.t_max > 0.0)) throw InvalidArgumentError("solve_inference: t_max must be > 0");
  if (config.kind == SolverKind::kHeun && config.adaptive &&
      !(config.rtol >= 0.0 && config.atol >= 0.0 && config.rtol + config.atol > 0.0))
    throw InvalidArgumentError("solve_inference: tolerances must be non-negative, not both zero");
  if (config.max_steps == 0) throw InvalidArgumentError("solve_inference: max_steps must be >= 1");

  const GradientField<Scalar> field(net, initial);
  InferenceResult<Scalar> result{initial, {}};
  auto& z = result.state;
  auto& stats = result.stats;
  if (observer) observer(0.0, z);

  // Scratch buffers reused across steps.
  ActivityGradient<Scalar> grad, grad_pred, error;
  ActivityState<Scalar> predictor, candidate;
  bool grad_valid = false;  // grad holds dF/dz at the current z
  auto evaluate = [&](const ActivityState<Scalar>& s, ActivityGradient<Scalar>& out) {
    ++stats.rhs_evaluations;
    field.evaluate(s, out);
  };
  auto converged = [&config](const ActivityGradient<Scalar>& g) {
    return config.early_stop_grad_norm && g.max_norm() < *config.early_stop_grad_norm;
  };
  // Heun proposal from z with step h into `candidate` / `error`.
  auto heun_proposal = [&](double h, std::size_t step) {
    detail::copy_state(z, predictor);
    detail::euler_inplace(predictor, grad, h);
    detail::require_finite(predictor, step);
    evaluate(predictor, grad_pred);
    detail::heun_combine(z, grad, grad_pred, h, candidate, error);
    detail::require_finite(candidate, step);
  };

  const double t_max = config.t_max;
  const double dt0 = std::min(config.dt0, t_max);
  double t = 0.0;

  if (config.kind == SolverKind::kEuler || !config.adaptive) {
    auto steps = static_cast<std::size_t>(std::ceil(t_max / dt0));
    if (steps > 1 && static_cast<double>(steps - 1) * dt0 >= t_max * (1.0 - 1e-12)) --steps;
    for (std::size_t k = 0; k < steps; ++k) {
      evaluate(z, grad);
      grad_valid = true;
      if (converged(grad)) break;
      if (k >= config.max_steps) {
        stats.final_grad_norm = grad.max_norm();
        throw BudgetError(stats);
      }
      const double h = (k + 1 == steps) ? t_max - static_cast<double>(k) * dt0 : dt0;
      if (config.kind == SolverKind::kEuler) {
        detail::euler_inplace(z, grad, h);
        detail::require_finite(z, k);
      } else {
        heun_proposal(h, k);
        std::swap(z.z, candidate.z);
      }
      grad_valid = false;
      ++stats.accepted_steps;
      t = (k + 1 == steps) ? t_max : static_cast<double>(k + 1) * dt0;
      stats.t_reached = t;
      if (observer) observer(t, z);
    }
  } else {
    ControllerMemory memory;
    double dt = dt0;
    std::size_t attempted = 0;
    while (t < t_max) {
      if (!grad_valid) {
        evaluate(z, grad);
        grad_valid = true;
      }
      if (converged(grad)) break;
      if (attempted >= config.max_steps) {
        stats.final_grad_norm = grad.max_norm();
        throw BudgetError(stats);
      }
      const bool last = dt >= t_max - t;
      const double h = last ? t_max - t : dt;
      heun_proposal(h, attempted);
      ++attempted;
      const double ratio = scaled_error_norm(error, z, candidate, config.rtol, config.atol);
      const double factor = pid_adapt(ratio, memory, config.controller, kHeunErrorOrder);
      if (ratio <= 1.0) {
        std::swap(z.z, candidate.z);
        grad_valid = false;
        memory.push(ratio);
        ++stats.accepted_steps;
        t = last ? t_max : t + h;
        stats.t_reached = t;
        if (observer) observer(t, z);
      } else {
        ++stats.rejected_steps;
      }
      dt = h * factor;
    }
  }

  if (!grad_valid) evaluate(z, grad);
  stats.final_grad_norm = grad.max_norm();
  return result;
}

}  // namespace pcflow
