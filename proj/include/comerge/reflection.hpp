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

#ifndef COMERGE__REFLECTION_HPP_
#define COMERGE__REFLECTION_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "comerge/dynamics.hpp"
#include "comerge/error.hpp"
#include "comerge/obb.hpp"
#include "comerge/observation.hpp"
#include "comerge/perception.hpp"
#include "comerge/planning.hpp"
#include "comerge/scenario.hpp"
#include "comerge/trajectory.hpp"

namespace comerge::reflection
{

struct Thresholds
{
  double eps_col{0.05};  // IoU
  double eps_p{1.0};     // m
  double eps_e{0.5};
  double eps_c{0.5};
  double alpha{1.0};     // trajectory term weight in the reflection loss

  void validate() const
  {
    if (!(eps_col > 0.0 && eps_col < 1.0)) {
      throw Error(ErrorKind::kConfig, "thresholds: eps_col must lie in (0, 1)");
    }
    if (!(eps_p > 0.0 && eps_e > 0.0 && eps_c > 0.0)) {
      throw Error(ErrorKind::kConfig, "thresholds: eps_p, eps_e and eps_c must be positive");
    }
    if (!(alpha >= 0.0)) {
      throw Error(ErrorKind::kConfig, "thresholds: alpha must be >= 0");
    }
  }
};

enum class FailureKind
{
  kCollision,
  kRouteDeviation,
  kLowEfficiency,
  kLowComfort,
};

inline constexpr std::string_view to_string(FailureKind k)
{
  switch (k) {
    case FailureKind::kCollision: return "collision";
    case FailureKind::kRouteDeviation: return "route_deviation";
    case FailureKind::kLowEfficiency: return "low_efficiency";
    case FailureKind::kLowComfort: return "low_comfort";
  }
  return "unknown";
}

inline std::optional<FailureKind> parse_failure_kind(std::string_view s)
{
  for (FailureKind k : {FailureKind::kCollision, FailureKind::kRouteDeviation,
      FailureKind::kLowEfficiency, FailureKind::kLowComfort})
  {
    if (to_string(k) == s) {
      return k;
    }
  }
  return std::nullopt;
}

struct FailureCase
{
  FailureKind kind{FailureKind::kCollision};
  long tick{0};
  int agent{0};
  double measured{0.0};
  double threshold{0.0};
  int other{-1};  // the neighbour involved in a predicted collision

  bool operator==(const FailureCase &) const = default;
};

struct NeighborPrediction
{
  int id{0};
  dynamics::VehicleState state;
  dynamics::ControlInput control;
  std::vector<dynamics::VehicleState> path;  // optional roll-out, path[k] at k * dt
};

/// Held-control roll-out of `n` samples starting at `s`.
inline std::vector<dynamics::VehicleState> rollout(
  const dynamics::VehicleState & s, const dynamics::ControlInput & c, const dynamics::VehicleParams & p,
  double dt, std::size_t n)
{
  std::vector<dynamics::VehicleState> out;
  out.reserve(n);
  dynamics::VehicleState x = s;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) {
      x = dynamics::step(x, c, p, dt);
    }
    out.push_back(x);
  }
  return out;
}

/// Everything the detectors look at for one agent at one tick.
struct TickContext
{
  int agent{0};
  long tick{0};
  planning::Trajectory trajectory;  // world frame, points[0] = current rear axle
  double heading{0.0};              // current heading, used where waypoints coincide
  dynamics::VehicleParams vehicle;
  std::vector<NeighborPrediction> neighbors;
  scenario::Route route;
  double es{1.0};
  double cs{1.0};
};

/// Largest predicted IoU between the ego's waypoints and neighbours rolled
/// forward under held controls, and the neighbour that produced it.
inline std::pair<double, int> predicted_max_iou(const TickContext & ctx)
{
  const auto & q = ctx.trajectory.points;
  double best = 0.0;
  int who = -1;
  // Neighbours that cannot come within one box diagonal of any waypoint are
  // skipped; held controls bound their travel by u * duration.
  double ego_reach = 0.0;
  for (const Point2 & p : q) {
    ego_reach = std::max(ego_reach, distance(p, q.front()));
  }
  const double duration = q.empty() ? 0.0 : static_cast<double>(q.size() - 1) * ctx.trajectory.dt;
  const double diagonal = std::hypot(ctx.vehicle.length, ctx.vehicle.width);
  std::vector<dynamics::VehicleState> states;
  std::vector<const NeighborPrediction *> active;
  for (const auto & n : ctx.neighbors) {
    if (!q.empty() &&
      distance(Point2{n.state.x, n.state.y}, q.front()) >
      ego_reach + std::abs(n.control.u) * duration + 2.0 * diagonal)
    {
      continue;
    }
    states.push_back(n.state);
    active.push_back(&n);
  }
  double heading = ctx.heading;
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (k > 0) {
      for (std::size_t j = 0; j < states.size(); ++j) {
        states[j] = active[j]->path.size() > k ? active[j]->path[k] :
          dynamics::step(states[j], active[j]->control, ctx.vehicle, ctx.trajectory.dt);
      }
    }
    if (k + 1 < q.size() && distance(q[k + 1], q[k]) > 1e-6) {
      heading = std::atan2(q[k + 1].y - q[k].y, q[k + 1].x - q[k].x);
    }
    const dynamics::VehicleState ego{q[k].x, q[k].y, heading, 0.0};
    const OrientedBox eb = vehicle_box(ego, ctx.vehicle);
    for (std::size_t j = 0; j < states.size(); ++j) {
      const auto & s = states[j];
      if (std::abs(s.x - ego.x) > 2.0 * ctx.vehicle.length || std::abs(s.y - ego.y) > 2.0 * ctx.vehicle.length) {
        continue;
      }
      const double iou = obb_iou(eb, vehicle_box(s, ctx.vehicle));
      if (iou > best) {
        best = iou;
        who = active[j]->id;
      }
    }
  }
  return {best, who};
}

/// Largest distance from any waypoint to the route's sampled centerline.
inline double max_route_deviation(const planning::Trajectory & t, const scenario::Route & route)
{
  double worst = 0.0;
  for (const Point2 & p : t.points) {
    worst = std::max(worst, scenario::nearest_centerline_distance(p, route));
  }
  return worst;
}

/// Independent checks in the order collision, route deviation, efficiency, comfort.
inline std::vector<FailureCase> detect_failures(const TickContext & ctx, const Thresholds & thr)
{
  std::vector<FailureCase> out;
  const auto [iou, other] = predicted_max_iou(ctx);
  if (iou > thr.eps_col) {
    out.push_back({FailureKind::kCollision, ctx.tick, ctx.agent, iou, thr.eps_col, other});
  }
  if (!ctx.route.centerline.empty()) {
    const double dev = max_route_deviation(ctx.trajectory, ctx.route);
    if (dev > thr.eps_p) {
      out.push_back({FailureKind::kRouteDeviation, ctx.tick, ctx.agent, dev, thr.eps_p, -1});
    }
  }
  if (ctx.es < thr.eps_e) {
    out.push_back({FailureKind::kLowEfficiency, ctx.tick, ctx.agent, ctx.es, thr.eps_e, -1});
  }
  if (ctx.cs < thr.eps_c) {
    out.push_back({FailureKind::kLowComfort, ctx.tick, ctx.agent, ctx.cs, thr.eps_c, -1});
  }
  return out;
}

/// Mean squared Euclidean waypoint error.
inline double trajectory_mse(const planning::Trajectory & predicted, const planning::Trajectory & target)
{
  if (predicted.points.size() != target.points.size() || predicted.points.empty()) {
    throw Error(ErrorKind::kShape, "reflection loss: trajectories must be non-empty and equally long");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.points.size(); ++i) {
    const Point2 d = predicted.points[i] - target.points[i];
    sum += dot(d, d);
  }
  return sum / static_cast<double>(predicted.points.size());
}

/// lm_part + alpha * MSE. lm_part is expected to be the length-normalised LM loss.
inline double reflection_loss(
  double lm_part, const planning::Trajectory & predicted, const planning::Trajectory & target, double alpha)
{
  if (!(alpha >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "reflection loss: alpha must be >= 0");
  }
  return lm_part + alpha * trajectory_mse(predicted, target);
}

struct ReflectionRecord
{
  std::string prompt;
  std::string target_text;
  planning::Trajectory target_trajectory;  // ego-relative
  FailureKind failure_kind{FailureKind::kCollision};
  long episode{0};
  long tick{0};

  bool operator==(const ReflectionRecord &) const = default;
};

/// The trace slice a record is built from.
struct ReflectionInput
{
  long episode{0};
  Observation observation;  // noise-free
  std::vector<Message> messages;
  HistoryBuffer history;
  planning::Decision decision;
  planning::PlanningContext context;
  planning::BaselineParams baseline;
};

namespace detail
{
inline std::string fmt(double v, int digits = 2)
{
  return perception::detail::fixed(v, digits);
}

inline std::array<MetaAction, 2> preferences(FailureKind k)
{
  switch (k) {
    case FailureKind::kCollision: return {MetaAction::kDec, MetaAction::kIdle};
    case FailureKind::kRouteDeviation: return {MetaAction::kIdle, MetaAction::kDec};
    case FailureKind::kLowEfficiency: return {MetaAction::kAcc, MetaAction::kIdle};
    case FailureKind::kLowComfort: return {MetaAction::kIdle, MetaAction::kDec};
  }
  return {MetaAction::kDec, MetaAction::kIdle};
}

/// Whether a candidate answer addresses the hazard at all.
inline bool addresses(FailureKind k, MetaAction a)
{
  switch (k) {
    case FailureKind::kCollision: return a != MetaAction::kAcc && !is_lane_change(a);
    case FailureKind::kRouteDeviation: return !is_lane_change(a);
    case FailureKind::kLowEfficiency: return a != MetaAction::kDec;
    case FailureKind::kLowComfort: return a != MetaAction::kAcc && !is_lane_change(a);
  }
  return true;
}

inline std::string describe(const FailureCase & f)
{
  switch (f.kind) {
    case FailureKind::kCollision:
      return "Collision risk: the planned waypoints overlap vehicle " + std::to_string(f.other) +
             " with predicted IoU " + fmt(f.measured, 3) + " above " + fmt(f.threshold, 3) + ".";
    case FailureKind::kRouteDeviation:
      return "Route deviation: a planned waypoint lies " + fmt(f.measured) +
             " m from the route centerline, more than " + fmt(f.threshold) + " m.";
    case FailureKind::kLowEfficiency:
      return "Low efficiency: efficiency score " + fmt(f.measured, 3) + " is below " + fmt(f.threshold, 3) + ".";
    case FailureKind::kLowComfort:
      return "Low comfort: comfort score " + fmt(f.measured, 3) + " is below " + fmt(f.threshold, 3) + ".";
  }
  return "";
}

inline std::string section_title(FailureKind k)
{
  switch (k) {
    case FailureKind::kCollision: return "=== COLLISION ===\n";
    case FailureKind::kRouteDeviation: return "=== ROUTE DEVIATION ===\n";
    case FailureKind::kLowEfficiency: return "=== LOW EFFICIENCY ===\n";
    case FailureKind::kLowComfort: return "=== LOW COMFORT ===\n";
  }
  return "=== FAILURE ===\n";
}

inline planning::Trajectory to_ego_frame(const planning::Trajectory & t, Point2 origin)
{
  planning::Trajectory out;
  out.dt = t.dt;
  for (const Point2 & p : t.points) {
    out.points.push_back(p - origin);
  }
  return out;
}
}  // namespace detail

/// The corrected meta-action: the baseline's answer when it differs from the
/// failed action and addresses the hazard, otherwise the first per-kind
/// preference that is not the failed action.
inline MetaAction corrected_action(const FailureCase & failure, const ReflectionInput & in)
{
  const MetaAction failed = in.decision.meta_action;
  const planning::Decision base =
    planning::baseline_decide(in.observation, in.messages, in.history, in.context, in.baseline);
  if (base.meta_action != failed && detail::addresses(failure.kind, base.meta_action)) {
    return base.meta_action;
  }
  for (MetaAction a : detail::preferences(failure.kind)) {
    if (a != failed) {
      return a;
    }
  }
  return MetaAction::kDec;
}

inline ReflectionRecord emit_reflection_record(const FailureCase & failure, const ReflectionInput & in)
{
  using detail::fmt;
  const Observation & obs = in.observation;
  const Point2 origin{obs.ego.x, obs.ego.y};
  const auto ranked = perception::rank_critical_objects(obs, in.context.network);
  const auto scene = perception::build_scene_description(obs, in.context.network, ranked);

  std::string prompt;
  prompt += "=== SCENE ===\n" + scene.text;
  prompt += "=== DECISION ===\n";
  prompt += "Meta-action: " + std::string(to_token(in.decision.meta_action)) + "\n";
  prompt += "Reasoning: " + (in.decision.rationale.empty() ? std::string("none") : in.decision.rationale) + "\n";
  prompt += "Trajectory: " + planning::tokenize_trajectory(detail::to_ego_frame(in.decision.trajectory, origin)).str() + "\n";
  prompt += detail::section_title(failure.kind);
  prompt += "Tick " + std::to_string(failure.tick) + ", agent " + std::to_string(failure.agent) + ". " +
    detail::describe(failure) + "\n";
  prompt += "=== TASK ===\n";
  prompt += "Reflect on why the decision led to this failure, then give a corrected decision.\n";

  const MetaAction wanted = corrected_action(failure, in);
  const planning::RefinedPlan plan = planning::refine_with_fallback(wanted, obs, in.context);

  ReflectionRecord r;
  r.prompt = std::move(prompt);
  r.target_text = "Reflection: " + detail::describe(failure) + " The decision " +
    std::string(to_token(in.decision.meta_action)) + " did not account for it.\n" +
    "Correction: " + std::string(to_token(plan.meta)) + (plan.fell_back ? " (the preferred " +
    std::string(to_token(wanted)) + " is infeasible here)" : std::string()) + ".\n" +
    "Meta-action: " + std::string(to_token(plan.meta));
  r.target_trajectory = detail::to_ego_frame(plan.trajectory, origin);
  r.failure_kind = failure.kind;
  r.episode = in.episode;
  r.tick = failure.tick;
  return r;
}

}  // namespace comerge::reflection

#endif  // COMERGE__REFLECTION_HPP_
