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

#include <random>

#include "test_support.hpp"

namespace pcflow {
namespace {

using testing::Mat;

Network<double> chain(std::vector<double> ws) {
  Network<double> net;
  net.input_dim = 1;
  for (double w : ws) net.layers.push_back({Mat::Constant(1, 1, w), Vector<double>::Zero(1), Activation::identity()});
  return net;
}

Mat scalar(double v) { return Mat::Constant(1, 1, v); }

bool same_params(const Network<double>& a, const Network<double>& b) {
  for (std::size_t i = 0; i < a.depth(); ++i)
    if (a.layers[i].weight != b.layers[i].weight || a.layers[i].bias != b.layers[i].bias) return false;
  return true;
}

TEST(PcStep, FeedforwardTargetLeavesNetworkUnchanged) {
  std::mt19937_64 rng(1);
  const auto net = testing::random_network({4, 6, 3}, {Activation::tanh()}, rng);
  const Mat x = testing::random_matrix(5, 4, rng);
  const auto r = make_pc_step(net, make_sgd<double>(0.1), forward(net, x), Mat(x));
  EXPECT_TRUE(same_params(r.network, net));
  EXPECT_EQ(r.energies.total, 0.0);
}

TEST(PcStep, EqualsManualComposition) {
  std::mt19937_64 rng(2);
  const auto net = testing::random_network({4, 6, 5, 3}, {Activation::tanh(), Activation::leaky_relu(0.1)}, rng);
  const Mat x = testing::random_matrix(7, 4, rng);
  const Mat y = testing::random_matrix(7, 3, rng);
  StepOptions opt;
  opt.solver.t_max = 3.0;
  const auto optim = make_adam(net);
  const auto r = make_pc_step(net, optim, y, Mat(x), opt);

  const auto init = clamp_output(init_activities_with_ffwd(net, x), y);
  const auto solved = solve_inference(net, init, opt.solver);
  const auto [manual, manual_state] = update_params(net, solved.state, optim);
  EXPECT_TRUE(same_params(r.network, manual));
  EXPECT_EQ(r.optim_state.step_count, manual_state.step_count);
  EXPECT_EQ(r.solve_stats.rhs_evaluations, solved.stats.rhs_evaluations);
  EXPECT_EQ(r.energies.total, pc_energy(net, solved.state).total);
}

TEST(PcStep, SingleLayerHandComputedUpdate) {
  // No free layers: dF/dW = -(y - W x) x = -2, so W <- 0 + 0.5 * 2 = 1.
  const auto r = make_pc_step(chain({0.0}), make_sgd<double>(0.5), scalar(2.0), scalar(1.0));
  EXPECT_DOUBLE_EQ(r.network.layers[0].weight(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(r.energies.total, 2.0);
}

TEST(PcStep, ScalarChainEquilibriumUpdate) {
  // W1 = 2, W2 = 3, x = 1, y = 10. The free z1 settles where
  // (z1 - 2) = 3 (10 - 3 z1), i.e. z1 = 3.2, leaving eps1 = 1.2, eps2 = 0.4.
  StepOptions opt;
  opt.solver.kind = SolverKind::kEuler;
  opt.solver.dt0 = 0.05;
  opt.solver.t_max = 50.0;
  const auto r = make_pc_step(chain({2.0, 3.0}), make_sgd<double>(0.1), scalar(10.0), scalar(1.0), opt);
  EXPECT_NEAR(r.activities.z[1](0, 0), 3.2, 1e-9);
  EXPECT_NEAR(r.network.layers[0].weight(0, 0), 2.0 + 0.1 * 1.2 * 1.0, 1e-9);
  EXPECT_NEAR(r.network.layers[1].weight(0, 0), 3.0 + 0.1 * 0.4 * 3.2, 1e-9);
}

TEST(PcStep, EnergyRecordingAndDecreasingLoss) {
  std::mt19937_64 rng(3);
  auto net = testing::random_network({4, 8, 2}, {Activation::tanh(), Activation::identity()}, rng);
  const Mat x = testing::random_matrix(16, 4, rng);
  const Mat y = testing::random_matrix(16, 2, rng, 0.5);
  auto loss = [&](const Network<double>& n) { return 0.5 * (forward(n, x) - y).squaredNorm() / 16.0; };
  StepOptions opt;
  opt.record.energies = true;
  auto state = make_adam(net, AdamConfig{0.01});
  const double before = loss(net);
  for (int k = 0; k < 10; ++k) {
    auto r = make_pc_step(net, state, y, Mat(x), opt);
    ASSERT_FALSE(r.trajectory.energies.empty());
    EXPECT_LE(r.trajectory.energies.back(), r.trajectory.energies.front());
    net = std::move(r.network);
    state = std::move(r.optim_state);
  }
  EXPECT_LT(loss(net), before);
}

TEST(PcStep, UnsupervisedUsesRandomInitWithClampedOutput) {
  const auto net = init_network<double>({3, 4, 2}, Activation::tanh(), RngSeed{4});
  StepOptions opt;
  opt.solver.t_max = 1.0;
  const Mat y = Mat::Ones(3, 2);
  const auto r = make_pc_step(net, make_sgd<double>(0.1), y, std::nullopt, opt);
  EXPECT_EQ(r.activities.z[2], y);
  EXPECT_FALSE(r.activities.clamped_input);
  EXPECT_THROW(make_pc_step(net, make_sgd<double>(0.1), y, Mat(Mat::Zero(2, 3))), ShapeError);
}

TEST(HpcStep, ExactAmortiserAndGeneratorStayPut) {
  // Generator 1 -> 2 -> 8 from x = 1; amortiser inverts it exactly.
  const auto gen = chain({2.0, 4.0});
  const auto amo = chain({0.25, 0.5});
  const auto r = make_hpc_step(gen, amo, {make_sgd<double>(0.1), make_sgd<double>(0.1)}, scalar(8.0), scalar(1.0));
  EXPECT_TRUE(same_params(r.generator.network, gen));
  EXPECT_TRUE(same_params(r.amortiser.network, amo));
  EXPECT_EQ(r.amortiser.energies.total, 0.0);
}

TEST(HpcStep, AmortiserInitializesGeneratorActivities) {
  // Amortiser guess for z1 from y = 16 is 2; generator then relaxes it.
  const auto gen = chain({2.0, 4.0});
  const auto amo = chain({0.125, 0.5});
  StepOptions opt;
  opt.record.activities = opt.record.energies = true;
  const auto r = make_hpc_step(gen, amo, {make_sgd<double>(0.1), make_sgd<double>(0.1)}, scalar(16.0),
                               scalar(1.0), opt);
  const auto& traj = r.generator.trajectory;
  ASSERT_FALSE(traj.activities.empty());
  EXPECT_EQ(traj.times.front(), 0.0);
  EXPECT_EQ(traj.activities.front().z[1](0, 0), 2.0);
  // eps1 = 0, eps2 = 16 - 8 = 8 at the start.
  EXPECT_DOUBLE_EQ(traj.energies.front(), 32.0);
  // Equilibrium: (z1 - 2) = 4 (16 - 4 z1), z1 = 66 / 17.
  EXPECT_NEAR(r.generator.activities.z[1](0, 0), 66.0 / 17.0, 1e-3);
  EXPECT_EQ(r.amortiser.activities.z[1](0, 0), r.generator.activities.z[1](0, 0));
}

TEST(HpcStep, JointTrainingReducesBothEnergies) {
  std::mt19937_64 rng(5);
  auto gen = testing::random_network({2, 6, 2}, {Activation::tanh(), Activation::identity()}, rng);
  auto amo = testing::random_network({2, 6, 2}, {Activation::tanh(), Activation::identity()}, rng);
  const Mat x = testing::random_matrix(32, 2, rng);
  const Mat y = (x * (Mat(2, 2) << 1.0, 0.5, -0.3, 0.8).finished()).array().tanh().matrix();
  std::pair<OptimState<double>, OptimState<double>> st{make_adam(gen, AdamConfig{0.02}),
                                                       make_adam(amo, AdamConfig{0.02})};
  StepOptions opt;
  opt.solver.t_max = 5.0;
  double first_gen = 0, first_amo = 0, last_gen = 0, last_amo = 0;
  for (int k = 0; k < 50; ++k) {
    auto r = make_hpc_step(gen, amo, st, y, Mat(x), opt);
    if (k == 0) first_gen = r.generator.energies.total, first_amo = r.amortiser.energies.total;
    last_gen = r.generator.energies.total;
    last_amo = r.amortiser.energies.total;
    gen = std::move(r.generator.network);
    amo = std::move(r.amortiser.network);
    st.first = std::move(r.generator.optim_state);
    st.second = std::move(r.amortiser.optim_state);
  }
  EXPECT_LT(last_gen, first_gen);
  EXPECT_LT(last_amo, first_amo);
}

TEST(Evaluate, DiscriminativeAccuracy) {
  Network<double> net;
  net.input_dim = 3;
  net.layers.push_back({Mat::Identity(3, 3), Vector<double>::Zero(3), Activation::identity()});
  const Mat x = (Mat(4, 3) << 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 2, 0).finished();
  EXPECT_DOUBLE_EQ(test_discriminative_pc(net, x, std::vector<int>{0, 1, 2, 1}), 1.0);
  EXPECT_DOUBLE_EQ(test_discriminative_pc(net, x, std::vector<int>{0, 0, 0, 0}), 0.25);
  EXPECT_DOUBLE_EQ(test_discriminative_pc(net, x, one_hot<double>(std::vector<int>{0, 1, 2, 2}, 3)), 0.75);
  EXPECT_THROW(test_discriminative_pc(net, x, std::vector<int>{0}), ShapeError);
}

TEST(Evaluate, ArgmaxTiesPickLowestIndex) {
  const Mat m = (Mat(3, 3) << 1, 1, 0, 0, 2, 2, 5, 5, 5).finished();
  EXPECT_EQ(argmax_rows<double>(m), (std::vector<int>{0, 1, 0}));
}

TEST(Evaluate, AccuracyMatchesLoopOracle) {
  std::mt19937_64 rng(6);
  const auto net = testing::random_network({5, 7, 4}, {Activation::tanh(), Activation::identity()}, rng);
  const Mat x = testing::random_matrix(200, 5, rng);
  std::vector<int> labels(200);
  std::uniform_int_distribution<int> pick(0, 3);
  for (auto& l : labels) l = pick(rng);
  const Mat out = forward(net, x);
  int hits = 0;
  for (int i = 0; i < 200; ++i) {
    int best = 0;
    for (int c = 1; c < 4; ++c)
      if (out(i, c) > out(i, best)) best = c;
    hits += best == labels[static_cast<std::size_t>(i)];
  }
  EXPECT_DOUBLE_EQ(test_discriminative_pc(net, x, labels), hits / 200.0);
}

TEST(Evaluate, GenerativeReconstruction) {
  std::mt19937_64 rng(7);
  const auto net = testing::random_network({3, 4, 2}, {Activation::tanh(), Activation::identity()}, rng);
  const Mat x = testing::random_matrix(5, 3, rng);
  EXPECT_NEAR(test_generative_pc(net, forward(net, x), Mat(x)).reconstruction_mse, 0.0, 1e-24);

  // Free input: the errors can all vanish, and the top-layer term of the
  // energy is (d_y / 2) * mse.
  auto lin = init_network<double>({3, 4, 2}, Activation::identity(), RngSeed{8});
  for (auto& l : lin.layers) l.bias.setZero();
  const Mat y = testing::random_matrix(6, 2, rng);
  StepOptions opt;
  opt.solver.t_max = 500.0;
  const double start = pc_energy(lin, init_step_activities(lin, y, std::nullopt, opt)).total;
  const auto eval = test_generative_pc(lin, y, std::nullopt, opt);
  EXPECT_LT(eval.equilibrium_energy.total, 0.5 * start);
  EXPECT_LE(eval.reconstruction_mse, 2.0 * eval.equilibrium_energy.total / 2.0 + 1e-15);
}

}  // namespace
}  // namespace pcflow
