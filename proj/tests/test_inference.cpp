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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "test_support.hpp"

namespace pcflow {
namespace {

using testing::Mat;

// One identity layer with W = 0 and bias c, input clamped, output free:
// F = 1/2 (z_1 - c)^2 and dF/dz_1 = z_1 - c.
Network<double> quadratic_net(double c) {
  Network<double> net;
  net.input_dim = 1;
  net.layers.push_back({Mat::Zero(1, 1), Vector<double>::Constant(1, c), Activation::identity()});
  return net;
}

ActivityState<double> scalar_free_output(double z1) {
  ActivityState<double> s;
  s.z = {Mat::Zero(1, 1), Mat::Constant(1, 1, z1)};
  s.clamped_input = true;
  return s;
}

// zdot = -z as an rhs returning dF/dz = z on free layers.
ActivityGradient<double> identity_rhs(const ActivityState<double>& s) {
  ActivityGradient<double> g;
  for (std::size_t ell = 0; ell < s.z.size(); ++ell)
    g.grads.push_back(s.is_free(ell) ? s.z[ell] : Mat::Zero(s.z[ell].rows(), s.z[ell].cols()));
  return g;
}

TEST(EulerStep, LinearTestEquation) {
  const auto s = scalar_free_output(1.0);
  EXPECT_DOUBLE_EQ(euler_step(s, identity_rhs(s), 0.1).z[1](0, 0), 0.9);
}

TEST(EulerStep, ZeroStepAndClampedLayers) {
  std::mt19937_64 rng(1);
  const auto net = testing::random_network({3, 4, 2}, {Activation::tanh()}, rng);
  const auto s = testing::random_state(net, 2, rng, true, true);
  const auto g = activity_grad(net, s);
  const auto same = euler_step(s, g, 0.0);
  for (std::size_t ell = 0; ell < s.z.size(); ++ell) EXPECT_EQ(same.z[ell], s.z[ell]);
  const auto moved = euler_step(s, g, 0.3);
  EXPECT_EQ(moved.z[0], s.z[0]);
  EXPECT_EQ(moved.z[2], s.z[2]);
  EXPECT_NE(moved.z[1], s.z[1]);
  EXPECT_THROW(euler_step(s, g, -0.1), InvalidArgumentError);
}

TEST(EulerStep, NonFiniteResultThrowsWithStepIndex) {
  const auto s = scalar_free_output(1.0);
  auto g = identity_rhs(s);
  g.grads[1](0, 0) = std::numeric_limits<double>::infinity();
  try {
    euler_step(s, g, 0.1, 17);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step(), 17u);
  }
}

TEST(HeunStep, LinearTestEquation) {
  const auto r = heun_step(scalar_free_output(1.0), identity_rhs, 0.1);
  EXPECT_NEAR(r.state.z[1](0, 0), 0.905, 1e-15);
  // Second-order result minus the embedded Euler result: 0.905 - 0.9.
  EXPECT_NEAR(r.error.grads[1](0, 0), 0.005, 1e-15);
  EXPECT_EQ(r.error.grads[0](0, 0), 0.0);
}

TEST(HeunStep, ReproducesSecondOrderTaylorOnLinearRhs) {
  // zdot = -a z: one step gives z (1 - a h + (a h)^2 / 2).
  const double a = 1.7, h = 0.23, z0 = -0.6;
  auto rhs = [a](const ActivityState<double>& s) {
    auto g = identity_rhs(s);
    for (auto& m : g.grads) m *= a;
    return g;
  };
  const auto r = heun_step(scalar_free_output(z0), rhs, h);
  EXPECT_NEAR(r.state.z[1](0, 0), z0 * (1 - a * h + 0.5 * a * a * h * h), 1e-15);
}

TEST(PidAdapt, Examples) {
  const PIDCoeffs defaults;
  EXPECT_DOUBLE_EQ(pid_adapt(1.0, {}, defaults, 2), 0.9);
  EXPECT_DOUBLE_EQ(pid_adapt(0.0, {}, defaults, 2), 10.0);
  EXPECT_DOUBLE_EQ(pid_adapt(1e-30, {}, defaults, 1), 10.0);
  EXPECT_NEAR(pid_adapt(2.0, {}, defaults, 2), 0.9 * std::pow(2.0, -1.0 / 3.0), 1e-15);
  EXPECT_NEAR(pid_adapt(2.0, {}, defaults, 2), 0.714, 1e-3);
  EXPECT_DOUBLE_EQ(pid_adapt(1e9, {}, defaults, 1), 0.2);
}

TEST(PidAdapt, HistoryTerms) {
  PIDCoeffs c;
  c.p = 0.5;
  c.i = 1.0;
  c.d = 0.25;
  ControllerMemory m;
  m.push(0.5);
  m.push(0.25);  // prev = 0.25, prev2 = 0.5
  const double k = 2.0;
  const double expected = 0.9 * std::pow(0.8, -1.0 / k) * std::pow(0.25, -0.5 / k) * std::pow(0.5, -0.25 / k);
  EXPECT_NEAR(pid_adapt(0.8, m, c, 1), expected, 1e-14);
}

TEST(ScaledErrorNorm, Examples) {
  const auto s = scalar_free_output(0.0);
  ActivityGradient<double> err{{Mat::Zero(1, 1), Mat::Zero(1, 1)}};
  EXPECT_EQ(scaled_error_norm(err, s, s, 0.3, 1e-3), 0.0);
  err.grads[1](0, 0) = 1e-3;
  EXPECT_DOUBLE_EQ(scaled_error_norm(err, s, s, 123.0, 1e-3), 1.0);
}

TEST(ScaledErrorNorm, MatchesLoopOracle) {
  std::mt19937_64 rng(2);
  const auto net = testing::random_network({3, 5, 4, 2}, {Activation::tanh()}, rng);
  const auto a = testing::random_state(net, 3, rng, true, false);
  const auto b = testing::random_state(net, 3, rng, true, false);
  ActivityGradient<double> err;
  for (const auto& z : a.z) err.grads.push_back(testing::random_matrix(z.rows(), z.cols(), rng, 1e-3));
  const double rtol = 1e-2, atol = 1e-4;
  double sum = 0;
  int count = 0;
  for (std::size_t ell = 1; ell < a.z.size(); ++ell)
    for (Eigen::Index i = 0; i < a.z[ell].rows(); ++i)
      for (Eigen::Index j = 0; j < a.z[ell].cols(); ++j) {
        const double sc = atol + rtol * std::max(std::abs(a.z[ell](i, j)), std::abs(b.z[ell](i, j)));
        sum += std::pow(err.grads[ell](i, j) / sc, 2);
        ++count;
      }
  EXPECT_NEAR(scaled_error_norm(err, a, b, rtol, atol), std::sqrt(sum / count), 1e-12);
}

TEST(SolveInference, EulerContractsQuadratic) {
  SolverConfig cfg;
  cfg.kind = SolverKind::kEuler;
  cfg.dt0 = 0.1;
  cfg.t_max = 20;
  const auto r = solve_inference(quadratic_net(3.0), scalar_free_output(-1.0), cfg);
  EXPECT_LT(std::abs(r.state.z[1](0, 0) - 3.0), 1e-8);
  EXPECT_EQ(r.stats.accepted_steps, 200u);
  EXPECT_EQ(r.stats.rhs_evaluations, 201u);
  EXPECT_EQ(r.stats.rejected_steps, 0u);
  EXPECT_DOUBLE_EQ(r.stats.t_reached, 20.0);
}

TEST(SolveInference, EulerStepCountIsCeilAndLandsOnTmax) {
  SolverConfig cfg;
  cfg.kind = SolverKind::kEuler;
  cfg.dt0 = 0.3;
  cfg.t_max = 1.0;
  std::vector<double> times;
  const auto r = solve_inference(quadratic_net(1.0), scalar_free_output(0.0), cfg,
                                 [&](double t, const ActivityState<double>&) { times.push_back(t); });
  EXPECT_EQ(r.stats.accepted_steps, 4u);
  ASSERT_EQ(times.size(), 5u);
  EXPECT_EQ(times.front(), 0.0);
  EXPECT_DOUBLE_EQ(times.back(), 1.0);
  // Closed form of the truncated schedule: three steps of 0.3, one of 0.1.
  EXPECT_NEAR(r.state.z[1](0, 0), 1.0 - std::pow(0.7, 3) * 0.9, 1e-14);
}

TEST(SolveInference, HeunLandsExactlyOnTmax) {
  SolverConfig cfg;
  cfg.t_max = 7.3;
  std::vector<double> times;
  const auto r = solve_inference(quadratic_net(2.0), scalar_free_output(-4.0), cfg,
                                 [&](double t, const ActivityState<double>&) { times.push_back(t); });
  EXPECT_EQ(r.stats.t_reached, 7.3);
  EXPECT_EQ(times.back(), 7.3);
  for (std::size_t i = 1; i < times.size(); ++i) EXPECT_GT(times[i], times[i - 1]);
  EXPECT_GE(r.stats.rhs_evaluations, r.stats.accepted_steps);
  EXPECT_NEAR(r.state.z[1](0, 0), 2.0 - 6.0 * std::exp(-7.3), 5e-3);
}

TEST(SolveInference, EquilibriumIsFixedPoint) {
  std::mt19937_64 rng(3);
  const auto net = testing::random_network({4, 6, 3}, {Activation::tanh()}, rng);
  const Mat x = testing::random_matrix(5, 4, rng);
  const auto s = clamp_output(init_activities_with_ffwd(net, x), forward(net, x));
  for (auto kind : {SolverKind::kEuler, SolverKind::kHeun}) {
    SolverConfig cfg;
    cfg.kind = kind;
    const auto r = solve_inference(net, s, cfg);
    for (std::size_t ell = 0; ell < s.z.size(); ++ell) EXPECT_EQ(r.state.z[ell], s.z[ell]);
    EXPECT_EQ(r.stats.final_grad_norm, 0.0);
  }
}

TEST(SolveInference, ClampedLayersAreBitIdenticalAndEnergyDecreases) {
  std::mt19937_64 rng(4);
  const auto net = testing::random_network({4, 8, 8, 3}, {Activation::tanh()}, rng);
  const Mat x = testing::random_matrix(6, 4, rng);
  const Mat y = testing::random_matrix(6, 3, rng);
  const auto s = clamp_output(init_activities_with_ffwd(net, x), y);
  SolverConfig cfg;
  cfg.kind = SolverKind::kEuler;
  cfg.dt0 = 0.1;
  cfg.t_max = 10;
  std::vector<double> energies;
  const auto r = solve_inference(net, s, cfg, [&](double, const ActivityState<double>& z) {
    energies.push_back(pc_energy(net, z).total);
  });
  EXPECT_EQ(r.state.z.front(), s.z.front());
  EXPECT_EQ(r.state.z.back(), s.z.back());
  for (std::size_t i = 1; i < energies.size(); ++i) EXPECT_LE(energies[i], energies[i - 1]);
}

TEST(SolveInference, DeterministicAndEarlyStop) {
  std::mt19937_64 rng(5);
  const auto net = testing::random_network({4, 8, 3}, {Activation::tanh()}, rng);
  const auto s = clamp_output(init_activities_with_ffwd(net, testing::random_matrix(4, 4, rng)),
                              testing::random_matrix(4, 3, rng));
  SolverConfig cfg;
  cfg.t_max = 50;
  const auto a = solve_inference(net, s, cfg);
  const auto b = solve_inference(net, s, cfg);
  EXPECT_EQ(a.state.z[1], b.state.z[1]);
  EXPECT_EQ(a.stats.rhs_evaluations, b.stats.rhs_evaluations);

  cfg.kind = SolverKind::kEuler;
  cfg.early_stop_grad_norm = 1e-4;
  const auto e = solve_inference(net, s, cfg);
  EXPECT_LT(e.stats.final_grad_norm, 1e-4);
  EXPECT_LT(e.stats.t_reached, 50.0);
}

TEST(SolveInference, BudgetErrorCarriesStats) {
  SolverConfig cfg;
  cfg.kind = SolverKind::kEuler;
  cfg.dt0 = 0.1;
  cfg.t_max = 10;
  cfg.max_steps = 5;
  try {
    solve_inference(quadratic_net(1.0), scalar_free_output(0.0), cfg);
    FAIL() << "expected BudgetError";
  } catch (const BudgetError& e) {
    EXPECT_EQ(e.stats().accepted_steps, 5u);
  }
}

TEST(SolveInference, DivergenceIsReported) {
  // Euler on F = 1/2 (z - c)^2 is unstable for dt > 2.
  SolverConfig cfg;
  cfg.kind = SolverKind::kEuler;
  cfg.dt0 = 3.0;
  cfg.t_max = 1e6;
  cfg.max_steps = 1000000;
  EXPECT_THROW(solve_inference(quadratic_net(1.0), scalar_free_output(0.0), cfg), DivergenceError);
}

TEST(SolveInference, RejectsBadConfig) {
  SolverConfig cfg;
  cfg.dt0 = 0;
  EXPECT_THROW(solve_inference(quadratic_net(1.0), scalar_free_output(0.0), cfg), InvalidArgumentError);
  cfg = {};
  cfg.rtol = cfg.atol = 0;
  EXPECT_THROW(solve_inference(quadratic_net(1.0), scalar_free_output(0.0), cfg), InvalidArgumentError);
}

TEST(SolveInference, AdaptiveHeunRejectsOversizedSteps) {
  SolverConfig cfg;
  cfg.dt0 = 5.0;
  cfg.t_max = 10;
  cfg.rtol = cfg.atol = 1e-6;
  const auto r = solve_inference(quadratic_net(1.0), scalar_free_output(0.0), cfg);
  EXPECT_GT(r.stats.rejected_steps, 0u);
  EXPECT_NEAR(r.state.z[1](0, 0), 1.0 - std::exp(-10.0), 1e-4);
}

TEST(SolveInference, FloatPrecisionRuns) {
  const auto net = cast_network<float>(init_network<double>({4, 6, 3}, Activation::tanh(), RngSeed{1}));
  const Matrix<float> x = Matrix<float>::Random(3, 4);
  const Matrix<float> y = Matrix<float>::Random(3, 3);
  const auto r = solve_inference(net, clamp_output(init_activities_with_ffwd(net, x), y), SolverConfig{});
  EXPECT_TRUE(r.state.z[1].allFinite());
}

}  // namespace
}  // namespace pcflow
