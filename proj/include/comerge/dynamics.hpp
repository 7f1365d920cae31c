// Copyright 2026 The CoMerge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef COMERGE__DYNAMICS_HPP_
#define COMERGE__DYNAMICS_HPP_

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "comerge/error.hpp"

/// Kinematic bicycle model referenced at the rear axle, plus recovery of
/// state and controls from the planar (x, y) flat output.
namespace comerge::dynamics
{

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a)
{
  if (!std::isfinite(a)) {
    return a;
  }
  a = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (a <= -kPi) {
    a += 2.0 * kPi;
  }
  return a;
}

struct VehicleState
{
  double x{0.0};      // rear axle, m
  double y{0.0};      // rear axle, m
  double alpha{0.0};  // heading, rad
  double beta{0.0};   // front-wheel steering angle, rad

  bool operator==(const VehicleState &) const = default;
};

struct ControlInput
{
  double u{0.0};      // longitudinal speed, m/s
  double omega{0.0};  // steering rate, rad/s

  bool operator==(const ControlInput &) const = default;
};

struct StateRate
{
  double x_dot{0.0};
  double y_dot{0.0};
  double alpha_dot{0.0};
  double beta_dot{0.0};
};

struct VehicleParams
{
  double wheelbase{2.7};  // rear-to-front axle distance R, m
  double length{4.5};
  double width{1.8};
  double u_max{15.0};
  double a_max{2.0};
  double beta_max{0.6};
  double omega_max{1.0};

  /// Throws kInvalidArgument when a field breaks its invariant.
  void validate() const
  {
    auto require = [](bool ok, const char * what) {
        if (!ok) {
          throw Error(ErrorKind::kInvalidArgument, std::string("vehicle params: ") + what);
        }
      };
    require(wheelbase > 0.0, "wheelbase must be positive");
    require(length > 0.0, "length must be positive");
    require(width > 0.0, "width must be positive");
    require(length > wheelbase, "length must exceed wheelbase");
    require(u_max > 0.0, "u_max must be positive");
    require(a_max > 0.0, "a_max must be positive");
    require(beta_max > 0.0 && beta_max < kPi / 2.0, "beta_max must lie in (0, pi/2)");
    require(omega_max > 0.0, "omega_max must be positive");
  }

  bool operator==(const VehicleParams &) const = default;
};

/// Flat output sample: position and its first three time derivatives.
struct FlatSample
{
  std::array<double, 2> delta{0.0, 0.0};
  std::array<double, 2> d1{0.0, 0.0};
  std::array<double, 2> d2{0.0, 0.0};
  std::array<double, 2> d3{0.0, 0.0};
};

struct FlatRecovery
{
  double alpha{0.0};
  double beta{0.0};
  ControlInput control;
};

inline constexpr double kDefaultEpsilonSpeed = 1e-6;

inline StateRate state_derivative(
  const VehicleState & s, const ControlInput & c, const VehicleParams & p)
{
  const double cb = std::cos(s.beta);
  if (std::abs(cb) < 1e-12) {
    throw Error(ErrorKind::kSingularConfiguration, "steering angle at +-pi/2, tan(beta) undefined");
  }
  if (c.u < 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "reverse motion is not supported");
  }
  return StateRate{
    c.u * std::cos(s.alpha),
    c.u * std::sin(s.alpha),
    c.u / p.wheelbase * std::tan(s.beta),
    c.omega};
}

/// One classical RK4 step with the control held over [0, dt].
inline VehicleState step(
  const VehicleState & s, const ControlInput & c, const VehicleParams & p, double dt)
{
  if (!(dt > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "dt must be positive");
  }
  auto advance = [&](const StateRate & r, double h) {
      return VehicleState{
        s.x + h * r.x_dot, s.y + h * r.y_dot, s.alpha + h * r.alpha_dot, s.beta + h * r.beta_dot};
    };
  const StateRate k1 = state_derivative(s, c, p);
  const StateRate k2 = state_derivative(advance(k1, dt / 2.0), c, p);
  const StateRate k3 = state_derivative(advance(k2, dt / 2.0), c, p);
  const StateRate k4 = state_derivative(advance(k3, dt), c, p);
  const double w = dt / 6.0;
  VehicleState out{
    s.x + w * (k1.x_dot + 2.0 * k2.x_dot + 2.0 * k3.x_dot + k4.x_dot),
    s.y + w * (k1.y_dot + 2.0 * k2.y_dot + 2.0 * k3.y_dot + k4.y_dot),
    s.alpha + w * (k1.alpha_dot + 2.0 * k2.alpha_dot + 2.0 * k3.alpha_dot + k4.alpha_dot),
    s.beta + w * (k1.beta_dot + 2.0 * k2.beta_dot + 2.0 * k3.beta_dot + k4.beta_dot)};
  out.alpha = normalize_angle(out.alpha);
  return out;
}

/// Recovers heading, steering angle, speed and steering rate from a flat sample.
/// Heading uses atan2 so the quadrant is preserved.
inline FlatRecovery flat_recover(
  const FlatSample & f, const VehicleParams & p, double epsilon_speed = kDefaultEpsilonSpeed)
{
  const double vx = f.d1[0];
  const double vy = f.d1[1];
  const double ax = f.d2[0];
  const double ay = f.d2[1];
  const double jx = f.d3[0];
  const double jy = f.d3[1];
  const double v2 = vx * vx + vy * vy;
  const double v = std::sqrt(v2);
  if (!(v > epsilon_speed)) {
    throw Error(ErrorKind::kFlatnessSingularity, "flat output speed below epsilon, recovery undefined");
  }
  const double R = p.wheelbase;
  const double cross_va = vx * ay - vy * ax;   // d1 x d2
  const double cross_vj = vx * jy - vy * jx;   // d1 x d3
  const double dot_va = vx * ax + vy * ay;
  const double v3 = v2 * v;
  const double v6 = v3 * v3;

  FlatRecovery r;
  r.control.u = v;
  r.alpha = normalize_angle(std::atan2(vy, vx));
  r.beta = std::atan(cross_va * R / v3);
  r.control.omega = (cross_vj * v2 - 3.0 * cross_va * dot_va) /
    (v6 + cross_va * cross_va * R * R) * v * R;
  return r;
}

/// Front-axle position implied by the rigid-body constraint.
inline std::array<double, 2> front_axle(const VehicleState & s, const VehicleParams & p)
{
  return {s.x + p.wheelbase * std::cos(s.alpha), s.y + p.wheelbase * std::sin(s.alpha)};
}

}  // namespace comerge::dynamics

#endif  // COMERGE__DYNAMICS_HPP_
