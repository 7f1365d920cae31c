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

#ifndef COMERGE__METRICS_HPP_
#define COMERGE__METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "comerge/error.hpp"
#include "comerge/geometry.hpp"

namespace comerge::metrics
{

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
inline constexpr double kSpeedViolationThreshold = 11.11;  // m/s

struct ScoreWeights
{
  double k1{0.25};  // comfort
  double k2{0.25};  // efficiency
  double k3{0.5};   // safety
  double alpha_pen{0.6};  // per collision
  double beta_pen{0.9};   // per speed violation
  int lambda1{0};
  int lambda2{0};

  void validate() const
  {
    if (k1 < 0.0 || k2 < 0.0 || k3 < 0.0 || std::abs(k1 + k2 + k3 - 1.0) > 1e-9) {
      throw Error(ErrorKind::kInvalidArgument, "weights: k1, k2, k3 must be non-negative and sum to 1");
    }
    if (alpha_pen < 0.0 || alpha_pen >= 1.0 || beta_pen < 0.0 || beta_pen >= 1.0) {
      throw Error(ErrorKind::kInvalidArgument, "weights: penalty factors must lie in [0, 1)");
    }
    if (lambda1 < 0 || lambda2 < 0) {
      throw Error(ErrorKind::kInvalidArgument, "weights: occurrence counts must be non-negative");
    }
  }
};

struct ComfortLimits
{
  double lon_accel{3.0};  // m/s^2
  double lat_accel{3.0};
  double lon_jerk{2.0};   // m/s^3
  double lat_jerk{2.0};
};

/// Acceleration and jerk samples along a motion, split by road axis.
struct MotionSamples
{
  std::vector<double> lon_accel;
  std::vector<double> lat_accel;
  std::vector<double> lon_jerk;
  std::vector<double> lat_jerk;

  bool empty() const
  {
    return lon_accel.empty() && lat_accel.empty() && lon_jerk.empty() && lat_jerk.empty();
  }
};

inline double efficiency_score(double v_ego, double v_avg, double v_lmt, double sigma = 0.0)
{
  if (v_ego < 0.0 || v_avg < 0.0 || v_lmt < 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "efficiency: speeds must be non-negative");
  }
  const double v0 = std::min(v_avg, v_lmt) + sigma;
  if (!(v0 > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "efficiency: reference speed must be positive");
  }
  return v_ego >= v0 ? 1.0 : v_ego / v0;
}

namespace detail
{
inline double peak_sub_score(std::span<const double> values, double limit)
{
  double peak = 0.0;
  for (double v : values) {
    peak = std::max(peak, std::abs(v));
  }
  return peak <= limit ? 1.0 : limit / peak;
}
}  // namespace detail

/// Mean of four peak-based sub-scores; each is 1 within its limit, limit/peak beyond.
inline double comfort_score(const MotionSamples & m, const ComfortLimits & lim)
{
  if (m.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "comfort: at least one sample is required");
  }
  const double s_xa = detail::peak_sub_score(m.lon_accel, lim.lon_accel);
  const double s_ya = detail::peak_sub_score(m.lat_accel, lim.lat_accel);
  const double s_xj = detail::peak_sub_score(m.lon_jerk, lim.lon_jerk);
  const double s_yj = detail::peak_sub_score(m.lat_jerk, lim.lat_jerk);
  return (s_xa + s_ya + s_xj + s_yj) / 4.0;
}

/// Central finite differences of uniformly spaced road-frame waypoints
/// (x longitudinal, y lateral). Fewer than 3 points yield no acceleration
/// samples and fewer than 5 no jerk samples.
inline MotionSamples motion_samples(std::span<const Point2> pts, double dt)
{
  MotionSamples m;
  const std::size_t n = pts.size();
  const double dt2 = dt * dt;
  const double dt3 = dt2 * dt;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    m.lon_accel.push_back((pts[k + 1].x - 2.0 * pts[k].x + pts[k - 1].x) / dt2);
    m.lat_accel.push_back((pts[k + 1].y - 2.0 * pts[k].y + pts[k - 1].y) / dt2);
  }
  for (std::size_t k = 2; k + 2 < n; ++k) {
    m.lon_jerk.push_back(
      (pts[k + 2].x - 2.0 * pts[k + 1].x + 2.0 * pts[k - 1].x - pts[k - 2].x) / (2.0 * dt3));
    m.lat_jerk.push_back(
      (pts[k + 2].y - 2.0 * pts[k + 1].y + 2.0 * pts[k - 1].y - pts[k - 2].y) / (2.0 * dt3));
  }
  return m;
}

/// Time to collision with the vehicle ahead; infinite unless closing.
inline double ttc(double d, double v_ego, double v_lead)
{
  if (d < 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "ttc: distance must be non-negative");
  }
  const double v_rel = v_ego - v_lead;
  if (v_rel <= 0.0) {
    return kInfinity;
  }
  return d / v_rel;
}

inline double safety_score(double t_ego, double t_t)
{
  if (!(t_t > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "safety: TTC threshold must be positive");
  }
  if (t_ego < 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "safety: TTC must be non-negative");
  }
  return t_ego >= t_t ? 1.0 : t_ego / t_t;
}

inline double driving_score(double cs, double es, double ss, const ScoreWeights & w)
{
  return std::pow(w.alpha_pen, w.lambda1) * std::pow(w.beta_pen, w.lambda2) *
         (w.k1 * cs + w.k2 * es + w.k3 * ss);
}

/// Mean per-waypoint Euclidean distance over N scenarios x K waypoints.
inline double l2_error(
  const std::vector<std::vector<Point2>> & pred, const std::vector<std::vector<Point2>> & truth)
{
  if (pred.size() != truth.size() || pred.empty()) {
    throw Error(ErrorKind::kShape, "l2: scenario counts differ or are zero");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    if (pred[j].size() != truth[j].size() || pred[j].size() != pred.front().size()) {
      throw Error(ErrorKind::kShape, "l2: waypoint counts differ");
    }
    for (std::size_t i = 0; i < pred[j].size(); ++i) {
      sum += distance(pred[j][i], truth[j][i]);
      ++count;
    }
  }
  if (count == 0) {
    throw Error(ErrorKind::kShape, "l2: no waypoints");
  }
  return sum / static_cast<double>(count);
}

inline double collision_rate(std::span<const int> collisions, double horizon)
{
  if (!(horizon > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "collision rate: horizon must be positive");
  }
  if (collisions.empty()) {
    throw Error(ErrorKind::kShape, "collision rate: no scenarios");
  }
  double sum = 0.0;
  for (int c : collisions) {
    sum += c / horizon;
  }
  return sum / static_cast<double>(collisions.size());
}

inline double rmse(std::span<const double> pred, std::span<const double> truth)
{
  if (pred.empty() || pred.size() != truth.size()) {
    throw Error(ErrorKind::kShape, "rmse: inputs must be non-empty and equally long");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = truth[i] - pred[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(pred.size()));
}

}  // namespace comerge::metrics

#endif  // COMERGE__METRICS_HPP_
