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


#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "comerge/dynamics.hpp"
#include "comerge/error.hpp"

namespace d = comerge::dynamics;
using comerge::ErrorKind;

namespace
{

d::VehicleParams params_with_wheelbase(double r)
{
  d::VehicleParams p;
  p.wheelbase = r;
  p.length = r + 2.0;
  return p;
}

// Flat sample of a parametric curve given its analytic derivatives.
d::FlatSample circle_sample(double radius, double t)
{
  d::FlatSample f;
  f.delta = {radius * std::cos(t), radius * std::sin(t)};
  f.d1 = {-radius * std::sin(t), radius * std::cos(t)};
  f.d2 = {-radius * std::cos(t), -radius * std::sin(t)};
  f.d3 = {radius * std::sin(t), -radius * std::cos(t)};
  return f;
}

}  // namespace

TEST(StateDerivative, StraightMotion)
{
  const auto r = d::state_derivative({0, 0, 0, 0}, {1, 0}, params_with_wheelbase(2.0));
  EXPECT_EQ(r.x_dot, 1.0);
  EXPECT_EQ(r.y_dot, 0.0);
  EXPECT_EQ(r.alpha_dot, 0.0);
  EXPECT_EQ(r.beta_dot, 0.0);
}

TEST(StateDerivative, HeadingRotated)
{
  const auto r = d::state_derivative({0, 0, std::numbers::pi / 2, 0}, {2, 0}, params_with_wheelbase(2.0));
  EXPECT_NEAR(r.x_dot, 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(r.y_dot, 2.0);
  EXPECT_EQ(r.alpha_dot, 0.0);
}

TEST(StateDerivative, SteeringSetsYawRate)
{
  const auto r = d::state_derivative({0, 0, 0, std::numbers::pi / 4}, {1, 0.1}, params_with_wheelbase(2.0));
  EXPECT_DOUBLE_EQ(r.x_dot, 1.0);
  EXPECT_DOUBLE_EQ(r.alpha_dot, 0.5);
  EXPECT_DOUBLE_EQ(r.beta_dot, 0.1);
}

TEST(StateDerivative, SingularSteering)
{
  try {
    d::state_derivative({0, 0, 0, std::numbers::pi / 2}, {1, 0}, params_with_wheelbase(2.0));
    FAIL() << "expected singular configuration";
  } catch (const comerge::Error & e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSingularConfiguration);
  }
}

TEST(StateDerivative, ReverseRejected)
{
  EXPECT_THROW(d::state_derivative({}, {-1, 0}, d::VehicleParams{}), comerge::Error);
}

TEST(Step, ZeroControlKeepsState)
{
  const d::VehicleState s{3.0, -1.0, 0.7, 0.1};
  for (double dt : {0.01, 0.1, 1.0}) {
    const auto out = d::step(s, {0, 0}, d::VehicleParams{}, dt);
    EXPECT_EQ(out.x, s.x);
    EXPECT_EQ(out.y, s.y);
    EXPECT_EQ(out.alpha, s.alpha);
    EXPECT_EQ(out.beta, s.beta);
  }
}

TEST(Step, StraightLineExact)
{
  const auto out = d::step({0, 0, 0, 0}, {1, 0}, d::VehicleParams{}, 0.1);
  EXPECT_DOUBLE_EQ(out.x, 0.1);
  EXPECT_EQ(out.y, 0.0);
  EXPECT_EQ(out.alpha, 0.0);
  EXPECT_EQ(out.beta, 0.0);
}

TEST(Step, RejectsNonPositiveDt)
{
  EXPECT_THROW(d::step({}, {1, 0}, d::VehicleParams{}, 0.0), comerge::Error);
}

TEST(Step, FullTurnReturnsToStart)
{
  const auto p = params_with_wheelbase(2.5);
  const double beta = 0.2;
  const double period = 2.0 * std::numbers::pi * p.wheelbase / std::tan(beta);
  auto integrate = [&](int n) {
      d::VehicleState s{0, 0, 0, beta};
      const double h = period / n;
      for (int k = 0; k < n; ++k) {
        s = d::step(s, {1.0, 0.0}, p, h);
      }
      return s;
    };
  const auto coarse = integrate(800);
  const auto fine = integrate(80000);
  EXPECT_LT(std::hypot(coarse.x, coarse.y), 1e-3);
  EXPECT_LT(std::hypot(coarse.x - fine.x, coarse.y - fine.y), 1e-3);
}

TEST(Step, AlphaStaysNormalized)
{
  d::VehicleState s{0, 0, 3.0, 0.3};
  for (int k = 0; k < 2000; ++k) {
    s = d::step(s, {5.0, 0.0}, d::VehicleParams{}, 0.05);
    ASSERT_GT(s.alpha, -std::numbers::pi);
    ASSERT_LE(s.alpha, std::numbers::pi);
  }
}

TEST(Step, NonHolonomicResidualShrinks)
{
  const auto p = d::VehicleParams{};
  auto residual = [&](double dt) {
      d::VehicleState s{0, 0, 0.1, 0.0};
      double worst = 0.0;
      const int n = static_cast<int>(std::lround(4.0 / dt));
      for (int k = 0; k < n; ++k) {
        const double t = k * dt;
        const d::ControlInput c{6.0 + std::sin(t), 0.2 * std::cos(1.3 * t)};
        const auto next = d::step(s, c, p, dt);
        const auto f0 = d::front_axle(s, p);
        const auto f1 = d::front_axle(next, p);
        const double xd = (f1[0] - f0[0]) / dt;
        const double yd = (f1[1] - f0[1]) / dt;
        // evaluate the constraint at the step midpoint
        const double a = 0.5 * (s.alpha + next.alpha) + 0.5 * (s.beta + next.beta);
        worst = std::max(worst, std::abs(xd * std::sin(a) - yd * std::cos(a)));
        s = next;
      }
      return worst;
    };
  const double r1 = residual(0.01);
  const double r2 = residual(0.001);
  EXPECT_LT(r1, 1e-2);
  EXPECT_LT(r2, r1 / 10.0);
}

TEST(FlatRecover, StraightLine)
{
  d::FlatSample f;
  f.d1 = {1.0, 0.0};
  const auto r = d::flat_recover(f, d::VehicleParams{});
  EXPECT_DOUBLE_EQ(r.control.u, 1.0);
  EXPECT_EQ(r.alpha, 0.0);
  EXPECT_EQ(r.beta, 0.0);
  EXPECT_EQ(r.control.omega, 0.0);
}

TEST(FlatRecover, Diagonal)
{
  d::FlatSample f;
  f.delta = {2.0, 2.0};
  f.d1 = {1.0, 1.0};
  const auto r = d::flat_recover(f, d::VehicleParams{});
  EXPECT_DOUBLE_EQ(r.control.u, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(r.alpha, std::numbers::pi / 4);
  EXPECT_EQ(r.beta, 0.0);
  EXPECT_EQ(r.control.omega, 0.0);
}

TEST(FlatRecover, CircleGivesConstantSteering)
{
  const auto p = params_with_wheelbase(2.0);
  for (double t : {0.0, 0.4, 2.0, 4.5}) {
    const auto r = d::flat_recover(circle_sample(5.0, t), p);
    EXPECT_NEAR(r.control.u, 5.0, 1e-12);
    EXPECT_NEAR(r.beta, std::atan(2.0 / 5.0), 1e-12);
    EXPECT_NEAR(r.beta, 0.38051, 1e-5);
    EXPECT_NEAR(r.control.omega, 0.0, 1e-12);
  }
}

TEST(FlatRecover, HeadingKeepsQuadrant)
{
  d::FlatSample f;
  f.d1 = {-1.0, -1.0};
  const auto r = d::flat_recover(f, d::VehicleParams{});
  EXPECT_NEAR(r.alpha, -3.0 * std::numbers::pi / 4, 1e-15);
}

TEST(FlatRecover, StandstillIsSingular)
{
  d::FlatSample f;
  f.d1 = {1e-9, 0.0};
  try {
    d::flat_recover(f, d::VehicleParams{});
    FAIL() << "expected flatness singularity";
  } catch (const comerge::Error & e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFlatnessSingularity);
  }
}

TEST(FlatRecover, OutputRanges)
{
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 500; ++i) {
    d::FlatSample f;
    f.d1 = {u(gen), u(gen)};
    f.d2 = {u(gen), u(gen)};
    f.d3 = {u(gen), u(gen)};
    if (std::hypot(f.d1[0], f.d1[1]) < 1e-3) {
      continue;
    }
    const auto r = d::flat_recover(f, d::VehicleParams{});
    EXPECT_GT(r.alpha, -std::numbers::pi);
    EXPECT_LE(r.alpha, std::numbers::pi);
    EXPECT_GT(r.beta, -std::numbers::pi / 2);
    EXPECT_LT(r.beta, std::numbers::pi / 2);
  }
}

// Forward model and recovery agree: steering rate implied by the recovered
// beta along an analytic curve matches the recovered omega.
TEST(FlatRecover, OmegaMatchesBetaRate)
{
  const auto p = d::VehicleParams{};
  auto sample = [](double t) {
      d::FlatSample f;
      f.delta = {8.0 * t, std::sin(t)};
      f.d1 = {8.0, std::cos(t)};
      f.d2 = {0.0, -std::sin(t)};
      f.d3 = {0.0, -std::cos(t)};
      return f;
    };
  const double h = 1e-5;
  for (double t : {0.3, 1.1, 2.7}) {
    const double rate =
      (d::flat_recover(sample(t + h), p).beta - d::flat_recover(sample(t - h), p).beta) / (2 * h);
    EXPECT_NEAR(d::flat_recover(sample(t), p).control.omega, rate, 1e-7);
  }
}

TEST(VehicleParams, Validation)
{
  d::VehicleParams p;
  EXPECT_NO_THROW(p.validate());
  p.length = p.wheelbase - 0.1;
  EXPECT_THROW(p.validate(), comerge::Error);
}
