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

#ifndef COMERGE__SCENARIO_HPP_
#define COMERGE__SCENARIO_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "comerge/dynamics.hpp"
#include "comerge/error.hpp"
#include "comerge/geometry.hpp"
#include "comerge/rng.hpp"

// Road layout: straight road along +x. Lane 0 is the leftmost main lane; lane
// indices grow to the right and ramp lanes follow the main lanes. Lane i has its
// centre at y = -(i + 0.5) * lane_width. Ramp lanes exist on
// [ramp_start_s, merge_point_s]; past the merge point only lanes
// [0, post_merge_lanes) continue. Station s is the x coordinate.
namespace comerge::scenario
{

enum class MergeCondition
{
  kConflicting,
  kNonConflicting,
};

struct CollaborativeArea
{
  double s_start{220.0};
  double s_end{300.0};
};

struct RoadNetwork
{
  int main_lanes{3};
  int ramp_lanes{1};
  int post_merge_lanes{3};
  double lane_width{3.5};
  double road_length{1000.0};
  double ramp_start_s{0.0};
  double merge_point_s{300.0};
  CollaborativeArea collab;
  std::vector<std::vector<Point2>> centerlines;

  int total_lanes() const {return main_lanes + ramp_lanes;}
  bool is_ramp_lane(int lane) const {return lane >= main_lanes && lane < total_lanes();}
  double lane_center_y(int lane) const {return -(lane + 0.5) * lane_width;}

  bool lane_exists(int lane, double s) const
  {
    if (lane < 0 || lane >= total_lanes() || s < 0.0 || s > road_length) {
      return false;
    }
    if (is_ramp_lane(lane) && s < ramp_start_s) {
      return false;
    }
    return s <= merge_point_s || lane < post_merge_lanes;
  }

  /// Last station at which the lane exists.
  double lane_end(int lane) const
  {
    return lane < post_merge_lanes ? road_length : merge_point_s;
  }

  int lane_count_at(double s) const
  {
    return s <= merge_point_s ? total_lanes() : post_merge_lanes;
  }

  /// Lane containing the point, or nullopt when the point is off the road.
  std::optional<int> locate(double x, double y) const
  {
    const double f = -y / lane_width;
    if (!std::isfinite(f) || f < 0.0) {
      return std::nullopt;
    }
    const int lane = static_cast<int>(std::floor(f));
    if (!lane_exists(lane, x)) {
      return std::nullopt;
    }
    return lane;
  }

  /// Throws kConfig naming the broken invariant.
  void validate() const
  {
    auto require = [](bool ok, const std::string & what) {
        if (!ok) {
          throw Error(ErrorKind::kConfig, "scenario: " + what);
        }
      };
    require(main_lanes >= 1, "main_lanes must be >= 1");
    require(ramp_lanes >= 1, "ramp_lanes must be >= 1");
    require(post_merge_lanes >= 1, "post_merge_lanes must be >= 1");
    require(lane_width > 0.0, "lane_width must be positive");
    require(road_length > merge_point_s, "road_length must exceed merge_point_s");
    require(ramp_start_s >= 0.0 && ramp_start_s < merge_point_s, "ramp_start_s must lie before the merge point");
    require(collab.s_start < collab.s_end, "collab_area start must precede its end");
    require(collab.s_end <= merge_point_s, "collab_area must end at or before the merge point");
    require(collab.s_start >= ramp_start_s, "collab_area must lie on the ramp");
  }

  /// Fills `centerlines` with one straight polyline per lane, 10 m spacing.
  void build_centerlines()
  {
    centerlines.clear();
    for (int lane = 0; lane < total_lanes(); ++lane) {
      const double s0 = is_ramp_lane(lane) ? ramp_start_s : 0.0;
      const double s1 = lane_end(lane);
      std::vector<Point2> line;
      for (double s = s0; s < s1; s += 10.0) {
        line.push_back({s, lane_center_y(lane)});
      }
      line.push_back({s1, lane_center_y(lane)});
      centerlines.push_back(std::move(line));
    }
  }
};

inline MergeCondition classify_merge_condition(const RoadNetwork & net)
{
  return net.main_lanes + net.ramp_lanes > net.post_merge_lanes ?
         MergeCondition::kConflicting : MergeCondition::kNonConflicting;
}

/// Closed-interval membership of a ramp vehicle's station in the collaborative area.
inline bool in_collaborative_area(const dynamics::VehicleState & state, const RoadNetwork & net)
{
  const auto lane = net.locate(state.x, state.y);
  if (!lane) {
    throw Error(ErrorKind::kOffRoad, "vehicle is not on any lane");
  }
  if (!net.is_ramp_lane(*lane)) {
    return false;
  }
  return state.x >= net.collab.s_start && state.x <= net.collab.s_end;
}

struct Route
{
  std::vector<int> lanes;
  std::vector<Point2> centerline;
};

/// Planned lateral transition between two adjacent lanes along the route.
struct LaneTransition
{
  int from{0};
  int to{0};
  double start_s{0.0};
  double length{30.0};
};

/// Quintic smoothstep with zero slope and curvature at both ends.
inline double smoothstep5(double t)
{
  t = std::clamp(t, 0.0, 1.0);
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

inline constexpr int kDefaultCenterlineSamples = 50;

/// Samples the route reference line uniformly in arc length on [s_from, s_to].
/// With a transition, the reference blends from the `from` lane centre to the
/// `to` lane centre over the transition span.
inline Route sample_route(
  const RoadNetwork & net, std::vector<int> lanes, double s_from, double s_to,
  int n_c = kDefaultCenterlineSamples, std::optional<LaneTransition> transition = std::nullopt)
{
  if (lanes.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "route needs at least one lane");
  }
  if (n_c < 2 || !(s_to > s_from)) {
    throw Error(ErrorKind::kInvalidArgument, "route needs n_c >= 2 samples over a positive span");
  }
  for (std::size_t i = 1; i < lanes.size(); ++i) {
    if (std::abs(lanes[i] - lanes[i - 1]) != 1) {
      throw Error(ErrorKind::kInvalidArgument, "consecutive route lanes must be adjacent");
    }
  }
  Route route;
  route.lanes = std::move(lanes);
  route.centerline.reserve(static_cast<std::size_t>(n_c));
  const double base_y = net.lane_center_y(route.lanes.front());
  for (int k = 0; k < n_c; ++k) {
    const double s = s_from + (s_to - s_from) * k / (n_c - 1);
    double y = base_y;
    if (transition) {
      const double y0 = net.lane_center_y(transition->from);
      const double y1 = net.lane_center_y(transition->to);
      const double tau = transition->length > 0.0 ?
        (s - transition->start_s) / transition->length : (s >= transition->start_s ? 1.0 : 0.0);
      y = y0 + (y1 - y0) * smoothstep5(tau);
    }
    route.centerline.push_back({s, y});
  }
  return route;
}

/// Distance from `p` to the sampled centerline polyline.
inline double nearest_centerline_distance(Point2 p, const Route & route)
{
  const auto & c = route.centerline;
  if (c.empty()) {
    return std::numeric_limits<double>::infinity();
  }
  double best = dot(p - c.front(), p - c.front());
  for (std::size_t i = 1; i < c.size(); ++i) {
    const double gap_x = std::max({0.0, std::min(c[i - 1].x, c[i].x) - p.x, p.x - std::max(c[i - 1].x, c[i].x)});
    if (gap_x * gap_x >= best) {
      continue;
    }
    const Point2 seg = c[i] - c[i - 1];
    const Point2 rel = p - c[i - 1];
    const double len2 = dot(seg, seg);
    const double t = len2 > 0.0 ? std::clamp(dot(rel, seg) / len2, 0.0, 1.0) : 0.0;
    const Point2 d = rel - t * seg;
    best = std::min(best, dot(d, d));
  }
  return std::sqrt(best);
}

struct SpawnSpec
{
  int lane{0};
  double station{0.0};
  double speed{10.0};
};

struct ScenarioConfig
{
  RoadNetwork network;
  std::vector<SpawnSpec> spawns;
  double spawn_jitter{0.0};        // uniform station jitter, +-m
  double speed_jitter{0.0};        // uniform speed jitter, +-m/s
  double min_spawn_gap{2.0};       // bumper-to-bumper clearance, m
};

struct Placement
{
  int id{0};
  int lane{0};
  dynamics::VehicleState state;
  double speed{0.0};
};

struct Scenario
{
  RoadNetwork network;
  std::vector<Placement> placements;
};

/// The reference scenario: 3 main lanes, one ramp lane, 3 lanes after the merge.
inline ScenarioConfig default_scenario_config()
{
  ScenarioConfig cfg;
  cfg.spawns = {
    {0, 30.0, 10.0}, {0, 90.0, 10.0}, {0, 150.0, 10.0},
    {1, 10.0, 10.0}, {1, 70.0, 10.0}, {1, 130.0, 10.0},
    {2, 20.0, 10.0}, {2, 75.0, 10.0}, {2, 130.0, 10.0}, {2, 185.0, 10.0},
    {3, 120.0, 10.0}, {3, 170.0, 10.0},
  };
  cfg.spawn_jitter = 4.0;
  cfg.speed_jitter = 0.5;
  return cfg;
}

/// Validates the network and places vehicles. Ids follow spawn order; jitter
/// draws come from the "spawn" stream of `seed`.
inline Scenario build_scenario(
  const ScenarioConfig & cfg, const dynamics::VehicleParams & params, std::uint64_t seed)
{
  cfg.network.validate();
  if (classify_merge_condition(cfg.network) != MergeCondition::kConflicting) {
    throw Error(
            ErrorKind::kConfig,
            "scenario: non-conflicting merge (main_lanes + ramp_lanes <= post_merge_lanes) is not simulated");
  }
  if (cfg.spawn_jitter < 0.0 || cfg.speed_jitter < 0.0 || cfg.min_spawn_gap < 0.0) {
    throw Error(ErrorKind::kConfig, "scenario: jitter and spawn gap must be non-negative");
  }
  Scenario sc;
  sc.network = cfg.network;
  sc.network.build_centerlines();

  NamedStream rng(seed, "spawn");
  int id = 0;
  for (const SpawnSpec & sp : cfg.spawns) {
    const double ds = cfg.spawn_jitter > 0.0 ? rng.uniform(-cfg.spawn_jitter, cfg.spawn_jitter) : 0.0;
    const double dv = cfg.speed_jitter > 0.0 ? rng.uniform(-cfg.speed_jitter, cfg.speed_jitter) : 0.0;
    Placement p;
    p.id = id++;
    p.lane = sp.lane;
    p.state = {sp.station + ds, sc.network.lane_center_y(sp.lane), 0.0, 0.0};
    p.speed = std::clamp(sp.speed + dv, 0.0, params.u_max);
    if (!sc.network.lane_exists(sp.lane, p.state.x)) {
      throw Error(
              ErrorKind::kConfig,
              "scenario: spawn " + std::to_string(p.id) + " is not on an existing lane");
    }
    sc.placements.push_back(p);
  }
  for (std::size_t i = 0; i < sc.placements.size(); ++i) {
    for (std::size_t j = i + 1; j < sc.placements.size(); ++j) {
      const Placement & a = sc.placements[i];
      const Placement & b = sc.placements[j];
      if (a.lane == b.lane &&
        std::abs(a.state.x - b.state.x) < params.length + cfg.min_spawn_gap)
      {
        throw Error(
                ErrorKind::kConfig,
                "scenario: spawns " + std::to_string(a.id) + " and " + std::to_string(b.id) +
                " overlap");
      }
    }
  }
  return sc;
}

}  // namespace comerge::scenario

#endif  // COMERGE__SCENARIO_HPP_
