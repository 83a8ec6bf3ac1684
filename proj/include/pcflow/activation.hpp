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

#include <cstdint>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "pcflow/error.hpp"

namespace pcflow {

/// Elementwise activation with an exact derivative.
struct Activation {
  enum class Kind : std::uint32_t { kIdentity = 0, kTanh = 1, kReLU = 2, kLeakyReLU = 3 };

  Kind kind = Kind::kIdentity;
  double slope = 0.0;  // LeakyReLU only

  static constexpr Activation identity() { return {Kind::kIdentity, 0.0}; }
  static constexpr Activation tanh() { return {Kind::kTanh, 0.0}; }
  static constexpr Activation relu() { return {Kind::kReLU, 0.0}; }
  static constexpr Activation leaky_relu(double slope) { return {Kind::kLeakyReLU, slope}; }

  bool is_identity() const { return kind == Kind::kIdentity; }

  friend bool operator==(const Activation&, const Activation&) = default;

  template <typename Derived>
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> apply(
      const Eigen::MatrixBase<Derived>& a) const {
    using S = typename Derived::Scalar;
    switch (kind) {
      case Kind::kIdentity:
        return a;
      case Kind::kTanh:
        return a.array().tanh().matrix();
      case Kind::kReLU:
        return a.array().max(S(0)).matrix();
      case Kind::kLeakyReLU:
        return (a.array() > S(0)).select(a.array(), S(slope) * a.array()).matrix();
    }
    return a;
  }

  /// Overwrites `a` with f(a) and writes f'(a) into `deriv` (resized as needed).
  /// Identity leaves `deriv` untouched: callers skip the product for it.
  template <typename S>
  void apply_inplace(Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& a,
                     Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& deriv) const {
    switch (kind) {
      case Kind::kIdentity:
        return;
      case Kind::kTanh:
        a.array() = a.array().tanh();
        deriv.resize(a.rows(), a.cols());
        deriv.array() = S(1) - a.array().square();
        return;
      case Kind::kReLU:
        deriv.resize(a.rows(), a.cols());
        deriv.array() = (a.array() > S(0)).template cast<S>();
        a.array() = a.array().max(S(0));
        return;
      case Kind::kLeakyReLU:
        deriv.resize(a.rows(), a.cols());
        deriv.setConstant(a.rows(), a.cols(), S(slope));
        deriv = (a.array() > S(0)).select(S(1), deriv.array()).matrix();
        a.array() = (a.array() > S(0)).select(a.array(), S(slope) * a.array());
        return;
    }
  }

  /// f'(a), evaluated at the pre-activation. ReLU-type kinks take the left derivative.
  template <typename Derived>
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> derivative(
      const Eigen::MatrixBase<Derived>& a) const {
    using S = typename Derived::Scalar;
    using M = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    switch (kind) {
      case Kind::kIdentity:
        return M::Ones(a.rows(), a.cols());
      case Kind::kTanh:
        return (S(1) - a.array().tanh().square()).matrix();
      case Kind::kReLU:
        return (a.array() > S(0)).template cast<S>().matrix();
      case Kind::kLeakyReLU:
        return (a.array() > S(0))
            .select(S(1), M::Constant(a.rows(), a.cols(), S(slope)).array())
            .matrix();
    }
    return M::Ones(a.rows(), a.cols());
  }
};

inline std::string to_string(const Activation& act) {
  switch (act.kind) {
    case Activation::Kind::kIdentity:
      return "identity";
    case Activation::Kind::kTanh:
      return "tanh";
    case Activation::Kind::kReLU:
      return "relu";
    case Activation::Kind::kLeakyReLU:
      return "leaky_relu(" + std::to_string(act.slope) + ")";
  }
  return "unknown";
}

/// Parses "identity", "tanh", "relu" or "leaky_relu" (slope 0.01).
inline Activation parse_activation(std::string_view name) {
  if (name == "identity" || name == "linear") return Activation::identity();
  if (name == "tanh") return Activation::tanh();
  if (name == "relu") return Activation::relu();
  if (name == "leaky_relu") return Activation::leaky_relu(0.01);
  throw InvalidArgumentError("unknown activation '" + std::string(name) + "'");
}

}  // namespace pcflow
