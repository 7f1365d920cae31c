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

#ifndef COMERGE__GEOMETRY_HPP_
#define COMERGE__GEOMETRY_HPP_

#include <cmath>

namespace comerge
{

struct Point2
{
  double x{0.0};
  double y{0.0};

  bool operator==(const Point2 &) const = default;
};

inline Point2 operator+(Point2 a, Point2 b) {return {a.x + b.x, a.y + b.y};}
inline Point2 operator-(Point2 a, Point2 b) {return {a.x - b.x, a.y - b.y};}
inline Point2 operator*(double k, Point2 a) {return {k * a.x, k * a.y};}

inline double dot(Point2 a, Point2 b) {return a.x * b.x + a.y * b.y;}
inline double cross(Point2 a, Point2 b) {return a.x * b.y - a.y * b.x;}
inline double norm(Point2 a) {return std::sqrt(a.x * a.x + a.y * a.y);}
inline double distance(Point2 a, Point2 b) {return norm(a - b);}

}  // namespace comerge

#endif  // COMERGE__GEOMETRY_HPP_
