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

#ifndef COMERGE__OBB_HPP_
#define COMERGE__OBB_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "comerge/dynamics.hpp"
#include "comerge/error.hpp"
#include "comerge/geometry.hpp"

namespace comerge::reflection
{

struct OrientedBox
{
  Point2 center;
  double heading{0.0};
  double length{4.5};
  double width{1.8};

  bool operator==(const OrientedBox &) const = default;
};

/// Corners in counter-clockwise order.
inline std::array<Point2, 4> corners(const OrientedBox & b)
{
  const Point2 f{std::cos(b.heading) * b.length / 2.0, std::sin(b.heading) * b.length / 2.0};
  const Point2 l{-std::sin(b.heading) * b.width / 2.0, std::cos(b.heading) * b.width / 2.0};
  return {b.center - f - l, b.center + f - l, b.center + f + l, b.center - f + l};
}

/// Shoelace area; positive for counter-clockwise polygons.
inline double polygon_area(const std::vector<Point2> & poly)
{
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    a += cross(poly[i], poly[(i + 1) % poly.size()]);
  }
  return a / 2.0;
}

/// Clips `subject` by each half-plane to the left of the CCW `clip` edges.
inline std::vector<Point2> clip_convex(std::vector<Point2> subject, const std::vector<Point2> & clip)
{
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Point2 a = clip[e];
    const Point2 b = clip[(e + 1) % clip.size()];
    const Point2 edge = b - a;
    auto side = [&](Point2 p) {return cross(edge, p - a);};
    std::vector<Point2> out;
    out.reserve(subject.size() + 2);
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const Point2 cur = subject[i];
      const Point2 nxt = subject[(i + 1) % subject.size()];
      const double sc = side(cur);
      const double sn = side(nxt);
      if (sc >= 0.0) {
        out.push_back(cur);
      }
      if ((sc >= 0.0) != (sn >= 0.0)) {
        const double t = sc / (sc - sn);
        out.push_back(cur + t * (nxt - cur));
      }
    }
    subject = std::move(out);
  }
  return subject;
}

inline double intersection_area(const OrientedBox & a, const OrientedBox & b)
{
  const auto ca = corners(a);
  const auto cb = corners(b);
  const auto poly = clip_convex({ca.begin(), ca.end()}, {cb.begin(), cb.end()});
  if (poly.size() < 3) {
    return 0.0;
  }
  return std::max(0.0, polygon_area(poly));
}

/// Intersection over union of two oriented rectangles.
inline double obb_iou(const OrientedBox & a, const OrientedBox & b)
{
  if (!(a.length > 0.0 && a.width > 0.0 && b.length > 0.0 && b.width > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "obb_iou: degenerate zero-area box");
  }
  if (a == b) {
    return 1.0;
  }
  // Disjoint circumscribed circles cannot overlap.
  const double reach = 0.5 * (std::hypot(a.length, a.width) + std::hypot(b.length, b.width));
  const Point2 d = a.center - b.center;
  if (dot(d, d) > reach * reach) {
    return 0.0;
  }
  const double area_a = a.length * a.width;
  const double area_b = b.length * b.width;
  // Clip in both directions and average so iou(a, b) == iou(b, a) bit-for-bit.
  const double inter =
    std::min({0.5 * (intersection_area(a, b) + intersection_area(b, a)), area_a, area_b});
  const double uni = area_a + area_b - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Body rectangle of a vehicle whose rear axle sits at (x, y); the axles are
/// centred within the body length.
inline OrientedBox vehicle_box(const dynamics::VehicleState & s, const dynamics::VehicleParams & p)
{
  return OrientedBox{
    {s.x + 0.5 * p.wheelbase * std::cos(s.alpha), s.y + 0.5 * p.wheelbase * std::sin(s.alpha)},
    s.alpha, p.length, p.width};
}

}  // namespace comerge::reflection

#endif  // COMERGE__OBB_HPP_
