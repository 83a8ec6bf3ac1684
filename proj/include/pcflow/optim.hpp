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
#include <cstdint>
#include <string>
#include <utility>
#include <variant>

#include "pcflow/energy.hpp"
#include "pcflow/network.hpp"

namespace pcflow {

struct SgdConfig {
  double lr = 1e-3;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Optimizer hyperparameters plus, for Adam, the moment accumulators.
template <typename Scalar>
struct OptimState {
  std::variant<SgdConfig, AdamConfig> kind = AdamConfig{};
  std::uint64_t step_count = 0;
  ParamGradient<Scalar> first_moment;   // Adam only
  ParamGradient<Scalar> second_moment;  // Adam only

  bool is_adam() const { return std::holds_alternative<AdamConfig>(kind); }
  double lr() const {
    return std::visit([](const auto& c) { return c.lr; }, kind);
  }
};

template <typename Scalar>
OptimState<Scalar> make_sgd(double lr = 1e-3) {
  if (!(lr > 0.0)) throw InvalidArgumentError("sgd: lr must be > 0");
  OptimState<Scalar> s;
  s.kind = SgdConfig{lr};
  return s;
}

template <typename Scalar>
OptimState<Scalar> make_adam(const Network<Scalar>& net, AdamConfig config = {}) {
  if (!(config.lr > 0.0)) throw InvalidArgumentError("adam: lr must be > 0");
  OptimState<Scalar> s;
  s.kind = config;
  s.first_moment = ParamGradient<Scalar>::zeros_like(net);
  s.second_moment = ParamGradient<Scalar>::zeros_like(net);
  return s;
}

namespace detail {

template <typename Scalar>
void check_grad_shapes(const Network<Scalar>& net, const ParamGradient<Scalar>& g) {
  if (g.weights.size() != net.depth() || g.biases.size() != net.depth())
    throw ShapeError("parameter gradient has " + std::to_string(g.weights.size()) +
                     " layers, network has " + std::to_string(net.depth()));
  for (std::size_t i = 0; i < net.depth(); ++i) {
    const auto& layer = net.layers[i];
    if (g.weights[i].rows() != layer.weight.rows() || g.weights[i].cols() != layer.weight.cols() ||
        g.biases[i].size() != layer.bias.size())
      throw ShapeError("parameter gradient shape mismatch at layer " + std::to_string(i + 1));
  }
}

}  // namespace detail

/// W <- W - lr dF/dW, b <- b - lr dF/db.
template <typename Scalar>
Network<Scalar> sgd_update(const Network<Scalar>& net, const ParamGradient<Scalar>& grads,
                           double lr) {
  if (!(lr > 0.0)) throw InvalidArgumentError("sgd_update: lr must be > 0");
  detail::check_grad_shapes(net, grads);
  Network<Scalar> out = net;
  const auto step = static_cast<Scalar>(lr);
  for (std::size_t i = 0; i < out.depth(); ++i) {
    out.layers[i].weight -= step * grads.weights[i];
    if (out.layers[i].learn_bias) out.layers[i].bias -= step * grads.biases[i];
  }
  return out;
}

/// Bias-corrected Adam; W <- W - lr m_hat / (sqrt(v_hat) + eps).
template <typename Scalar>
std::pair<Network<Scalar>, OptimState<Scalar>> adam_update(const Network<Scalar>& net,
                                                           const ParamGradient<Scalar>& grads,
                                                           const OptimState<Scalar>& state) {
  const auto* cfg = std::get_if<AdamConfig>(&state.kind);
  if (cfg == nullptr) throw InvalidArgumentError("adam_update: optimizer state is not Adam");
  detail::check_grad_shapes(net, grads);

  OptimState<Scalar> next = state;
  if (next.first_moment.weights.empty()) {
    next.first_moment = ParamGradient<Scalar>::zeros_like(net);
    next.second_moment = ParamGradient<Scalar>::zeros_like(net);
  }
  detail::check_grad_shapes(net, next.first_moment);
  detail::check_grad_shapes(net, next.second_moment);
  ++next.step_count;

  const auto t = static_cast<double>(next.step_count);
  const auto b1 = static_cast<Scalar>(cfg->beta1);
  const auto b2 = static_cast<Scalar>(cfg->beta2);
  const auto c1 = static_cast<Scalar>(1.0 - std::pow(cfg->beta1, t));
  const auto c2 = static_cast<Scalar>(1.0 - std::pow(cfg->beta2, t));
  const auto lr = static_cast<Scalar>(cfg->lr);
  const auto eps = static_cast<Scalar>(cfg->eps);

  auto apply = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
    const auto m_hat = (m.array() / c1).eval();
    const auto v_hat = (v.array() / c2).eval();
    param.array() -= lr * m_hat / (v_hat.sqrt() + eps);
  };

  Network<Scalar> out = net;
  for (std::size_t i = 0; i < out.depth(); ++i) {
    apply(out.layers[i].weight, next.first_moment.weights[i], next.second_moment.weights[i],
          grads.weights[i]);
    if (out.layers[i].learn_bias)
      apply(out.layers[i].bias, next.first_moment.biases[i], next.second_moment.biases[i],
            grads.biases[i]);
  }
  return {std::move(out), std::move(next)};
}

/// Dispatches on the optimizer kind. SGD increments step_count too.
template <typename Scalar>
std::pair<Network<Scalar>, OptimState<Scalar>> apply_update(const Network<Scalar>& net,
                                                            const ParamGradient<Scalar>& grads,
                                                            const OptimState<Scalar>& state) {
  if (state.is_adam()) return adam_update(net, grads, state);
  OptimState<Scalar> next = state;
  ++next.step_count;
  return {sgd_update(net, grads, std::get<SgdConfig>(state.kind).lr), std::move(next)};
}

}  // namespace pcflow
