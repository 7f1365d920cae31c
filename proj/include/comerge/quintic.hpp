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

#ifndef COMERGE__QUINTIC_HPP_
#define COMERGE__QUINTIC_HPP_

#include <array>

#include "comerge/error.hpp"

namespace comerge::planning
{

/// Position/velocity/acceleration triple used as a boundary condition.
struct Boundary
{
  double p{0.0};
  double v{0.0};
  double a{0.0};
};

/// p(t) = sum c_i t^i on [0, T]; beyond T it continues with constant acceleration.
class QuinticSegment
{
public:
  QuinticSegment() = default;

  QuinticSegment(const Boundary & start, const Boundary & end, double duration)
  : duration_(duration), end_(end)
  {
    if (!(duration > 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "quintic duration must be positive");
    }
    const double T = duration;
    const double T2 = T * T;
    const double T3 = T2 * T;
    const double h = end.p - start.p;
    c_[0] = start.p;
    c_[1] = start.v;
    c_[2] = start.a / 2.0;
    c_[3] = (20.0 * h - (8.0 * end.v + 12.0 * start.v) * T - (3.0 * start.a - end.a) * T2) /
      (2.0 * T3);
    c_[4] = (-30.0 * h + (14.0 * end.v + 16.0 * start.v) * T + (3.0 * start.a - 2.0 * end.a) * T2) /
      (2.0 * T3 * T);
    c_[5] = (12.0 * h - 6.0 * (end.v + start.v) * T + (end.a - start.a) * T2) / (2.0 * T3 * T2);
  }

  const std::array<double, 6> & coefficients() const {return c_;}
  double duration() const {return duration_;}

  /// Value of the `order`-th derivative (0..3) at time t.
  double eval(double t, int order = 0) const
  {
    if (t > duration_) {
      const double tau = t - duration_;
      switch (order) {
        case 0: return end_.p + end_.v * tau + 0.5 * end_.a * tau * tau;
        case 1: return end_.v + end_.a * tau;
        case 2: return end_.a;
        default: return 0.0;
      }
    }
    switch (order) {
      case 0:
        return c_[0] + t * (c_[1] + t * (c_[2] + t * (c_[3] + t * (c_[4] + t * c_[5]))));
      case 1:
        return c_[1] + t * (2.0 * c_[2] + t * (3.0 * c_[3] + t * (4.0 * c_[4] + t * 5.0 * c_[5])));
      case 2:
        return 2.0 * c_[2] + t * (6.0 * c_[3] + t * (12.0 * c_[4] + t * 20.0 * c_[5]));
      case 3:
        return 6.0 * c_[3] + t * (24.0 * c_[4] + t * 60.0 * c_[5]);
      default:
        throw Error(ErrorKind::kInvalidArgument, "quintic derivative order must be 0..3");
    }
  }

private:
  std::array<double, 6> c_{};
  double duration_{1.0};
  Boundary end_;
};

}  // namespace comerge::planning

#endif  // COMERGE__QUINTIC_HPP_
