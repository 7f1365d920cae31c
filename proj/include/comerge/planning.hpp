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

#ifndef COMERGE__PLANNING_HPP_
#define COMERGE__PLANNING_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "comerge/dynamics.hpp"
#include "comerge/error.hpp"
#include "comerge/message.hpp"
#include "comerge/meta_action.hpp"
#include "comerge/metrics.hpp"
#include "comerge/observation.hpp"
#include "comerge/perception.hpp"
#include "comerge/quintic.hpp"
#include "comerge/scenario.hpp"
#include "comerge/trajectory.hpp"
#include "comerge/transport.hpp"

namespace comerge::planning
{

struct Decision
{
  MetaAction meta_action{MetaAction::kIdle};
  Trajectory trajectory;
  std::string rationale;
  std::optional<Message> message;
  bool fallback{false};
  std::string diagnostic;  // why the fallback happened
};

struct RefineOptions
{
  double horizon{3.0};            // s
  double dt{0.1};                 // s
  double maneuver_window{3.0};    // s, lane-change duration
  double min_lateral_time{1.0};   // s, floor for finishing an active lane change
  double standstill_speed{1e-3};  // m/s, below this a non-Acc plan is stationary
  double low_speed{1.0};          // m/s, below this no lateral re-centring
  double epsilon_speed{dynamics::kDefaultEpsilonSpeed};
};

/// Lane index reached by the meta-action from `lane`.
inline int target_lane(MetaAction meta, int lane)
{
  switch (meta) {
    case MetaAction::kLeft: return lane - 1;
    case MetaAction::kRight: return lane + 1;
    default: return lane;
  }
}

/// A lane change is legal when the target lane exists now and where the maneuver ends.
inline bool meta_legal(
  MetaAction meta, int lane, double station, double speed, const scenario::RoadNetwork & net,
  double window)
{
  if (!is_lane_change(meta)) {
    return true;
  }
  const int to = target_lane(meta, lane);
  return net.lane_exists(to, station) && net.lane_exists(to, station + speed * window);
}

namespace detail
{
struct FlatPlan
{
  QuinticSegment x;
  QuinticSegment y;
  bool stationary{false};
};

inline dynamics::FlatSample flat_sample(const FlatPlan & plan, double t)
{
  dynamics::FlatSample f;
  f.delta = {plan.x.eval(t, 0), plan.y.eval(t, 0)};
  f.d1 = {plan.x.eval(t, 1), plan.y.eval(t, 1)};
  f.d2 = {plan.x.eval(t, 2), plan.y.eval(t, 2)};
  f.d3 = {plan.x.eval(t, 3), plan.y.eval(t, 3)};
  return f;
}

inline void require_feasible(
  const dynamics::FlatSample & f, const dynamics::VehicleParams & p, double eps, std::size_t k,
  const char * what)
{
  const dynamics::FlatRecovery r = dynamics::flat_recover(f, p, eps);
  const double tol = 1e-9;
  if (r.control.u > p.u_max + tol || std::abs(r.beta) > p.beta_max + tol ||
    std::abs(r.control.omega) > p.omega_max + tol)
  {
    std::ostringstream os;
    os << what << ": sample " << k << " needs u=" << r.control.u << " beta=" << r.beta <<
      " omega=" << r.control.omega << " beyond vehicle limits";
    throw Error(ErrorKind::kInfeasibleManeuver, os.str());
  }
}
}  // namespace detail

/// Quintic flat-output plan for the meta-action, sampled at opt.dt.
///
/// Longitudinal: constant acceleration (v_T - u)/T towards v_T = u (Idle) or
/// u +- a_max T clipped to [0, u_max]. Lateral: to the target lane centre with
/// zero terminal lateral velocity and acceleration, over the maneuver window
/// (or the time left in an active lane change). The initial acceleration is
/// taken from the current speed and steering angle so the plan starts on the
/// vehicle's present curvature.
///
/// Throws kInvalidArgument when a lane change has no target lane and
/// kInfeasibleManeuver when a sample leaves the vehicle limits.
inline Trajectory refine_to_trajectory(
  MetaAction meta, const dynamics::VehicleState & state, const dynamics::ControlInput & control,
  const scenario::RoadNetwork & net, int lane, const dynamics::VehicleParams & params,
  const RefineOptions & opt = {}, std::optional<double> lateral_time_remaining = std::nullopt)
{
  if (!(opt.horizon > 0.0) || !(opt.dt > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "refine: horizon and dt must be positive");
  }
  const int n = static_cast<int>(std::lround(opt.horizon / opt.dt));
  if (n < 1) {
    throw Error(ErrorKind::kInvalidArgument, "refine: horizon shorter than one step");
  }
  const double u = std::max(0.0, control.u);
  if (is_lane_change(meta) && !meta_legal(meta, lane, state.x, u, net, opt.maneuver_window)) {
    throw Error(
            ErrorKind::kInvalidArgument,
            std::string("refine: ") + std::string(to_token(meta)) + " has no target lane from lane " +
            std::to_string(lane));
  }

  Trajectory traj;
  traj.dt = opt.dt;
  traj.points.reserve(static_cast<std::size_t>(n));
  if (u < opt.standstill_speed && meta != MetaAction::kAcc) {
    traj.points.assign(static_cast<std::size_t>(n), Point2{state.x, state.y});
    return traj;
  }

  const double T = opt.horizon;
  double v_target = u;
  if (meta == MetaAction::kAcc) {
    v_target = std::min(u + params.a_max * T, params.u_max);
  } else if (meta == MetaAction::kDec) {
    v_target = std::max(u - params.a_max * T, 0.0);
  }
  const double a_long = (v_target - u) / T;
  const double ca = std::cos(state.alpha);
  const double sa = std::sin(state.alpha);
  const double a_lat = u * u * std::tan(state.beta) / params.wheelbase;

  detail::FlatPlan plan;
  plan.x = QuinticSegment(
    {state.x, u * ca, a_long * ca - a_lat * sa},
    {state.x + 0.5 * (u + v_target) * T, v_target, a_long}, T);

  const int to = target_lane(meta, lane);
  double y_target = net.lane_center_y(to);
  double t_lat = opt.maneuver_window;
  if (!is_lane_change(meta) && lateral_time_remaining) {
    t_lat = std::max(*lateral_time_remaining, opt.min_lateral_time);
  }
  if (!is_lane_change(meta) && u < opt.low_speed) {
    y_target = state.y;
  }
  plan.y = QuinticSegment({state.y, u * sa, a_long * sa + a_lat * ca}, {y_target, 0.0, 0.0}, t_lat);

  for (int k = 0; k < n; ++k) {
    const double t = k * opt.dt;
    const dynamics::FlatSample f = detail::flat_sample(plan, t);
    const double speed = std::hypot(f.d1[0], f.d1[1]);
    if (speed > opt.epsilon_speed) {
      detail::require_feasible(f, params, opt.epsilon_speed, static_cast<std::size_t>(k), "refine");
    }
    traj.points.push_back({f.delta[0], f.delta[1]});
  }
  traj.points.front() = {state.x, state.y};
  return traj;
}

/// Straight-line braking plan along the current heading; always feasible.
inline Trajectory braking_trajectory(
  const dynamics::VehicleState & state, double speed, const dynamics::VehicleParams & params,
  const RefineOptions & opt = {})
{
  const int n = std::max(1, static_cast<int>(std::lround(opt.horizon / opt.dt)));
  Trajectory traj;
  traj.dt = opt.dt;
  const double stop_time = speed / params.a_max;
  for (int k = 0; k < n; ++k) {
    const double t = std::min(k * opt.dt, stop_time);
    const double s = speed * t - 0.5 * params.a_max * t * t;
    traj.points.push_back({state.x + s * std::cos(state.alpha), state.y + s * std::sin(state.alpha)});
  }
  return traj;
}

/// Everything a policy needs besides the observation.
struct PlanningContext
{
  scenario::RoadNetwork network;
  dynamics::VehicleParams vehicle;
  RefineOptions refine;
};

/// Result of refining with the Dec fallback chain.
struct RefinedPlan
{
  MetaAction meta{MetaAction::kIdle};
  Trajectory trajectory;
  bool fell_back{false};
  std::string note;
};

/// Refines `meta`; on infeasibility retries as Dec with progressively slower
/// lateral re-centring, and finally as a straight braking plan.
inline RefinedPlan refine_with_fallback(MetaAction meta, const Observation & obs, const PlanningContext & ctx)
{
  const dynamics::ControlInput control{obs.speed, 0.0};
  std::optional<double> remaining;
  if (obs.changing_lane) {
    remaining = obs.maneuver_remaining;
  }
  RefinedPlan out;
  try {
    out.meta = meta;
    out.trajectory = refine_to_trajectory(
      meta, obs.ego, control, ctx.network, obs.lane, ctx.vehicle, ctx.refine, remaining);
    return out;
  } catch (const Error & e) {
    if (e.kind() != ErrorKind::kInfeasibleManeuver && e.kind() != ErrorKind::kInvalidArgument) {
      throw;
    }
    out.note = e.what();
  }
  out.meta = MetaAction::kDec;
  out.fell_back = true;
  double base = remaining ? std::max(*remaining, ctx.refine.min_lateral_time) : ctx.refine.maneuver_window;
  for (int attempt = 0; attempt < 4; ++attempt, base *= 2.0) {
    try {
      out.trajectory = refine_to_trajectory(
        MetaAction::kDec, obs.ego, control, ctx.network, obs.lane, ctx.vehicle, ctx.refine,
        attempt == 0 ? remaining : std::optional<double>(base));
      return out;
    } catch (const Error & e) {
      if (e.kind() != ErrorKind::kInfeasibleManeuver) {
        throw;
      }
    }
  }
  out.trajectory = braking_trajectory(obs.ego, obs.speed, ctx.vehicle, ctx.refine);
  return out;
}

// ---------------------------------------------------------------------------
// Rule-based baseline

struct BaselineParams
{
  double gap_min{15.0};            // m, bumper to bumper
  double ttc_threshold{5.0};       // s
  double follow_min_gap{5.0};      // m
  double follow_headway{1.0};      // s
  double follow_ttc{8.0};          // s
  double cruise_speed{10.0};       // m/s, main-road target
  double speed_cap{10.5};          // m/s, never accelerate beyond
  double merge_zone_length{80.0};  // m before the merge point where ramp vehicles may change lanes
  double min_change_speed{5.5};    // m/s, slowest lane change the planner can execute
  double merge_end_margin{2.0};    // m kept between the lane crossing and the ramp end
  double stop_margin{25.0};        // m between a blocked ramp vehicle's stop point and the ramp end
};

/// A vehicle the ego must fit between when entering the target lane.
struct Conflict
{
  int id{0};
  double dx{0.0};  // rear axle minus ego rear axle, m
  double speed{0.0};
  bool from_message{false};
};

namespace detail
{
inline std::string fmt(double v)
{
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

/// Longitudinal clearance check against one conflict, `tau` seconds ahead.
inline bool gap_ok(const Conflict & c, double v_ego, double tau, double length, const BaselineParams & bp)
{
  const double dx = c.dx + (c.speed - v_ego) * tau;
  if (dx >= 0.0) {
    const double gap = dx - length;
    return gap >= bp.gap_min && metrics::ttc(gap, v_ego, c.speed) > bp.ttc_threshold;
  }
  const double gap = -dx - length;
  return gap >= bp.gap_min && metrics::ttc(gap, c.speed, v_ego) > bp.ttc_threshold;
}

struct Leader
{
  bool hazard{false};
  bool close{false};
  std::string note;
};

inline Leader check_leader(const Observation & obs, const PlanningContext & ctx, const BaselineParams & bp)
{
  Leader out;
  const double corridor = 0.5 * (ctx.network.lane_width + ctx.vehicle.width);
  const double desired = bp.follow_min_gap + bp.follow_headway * obs.speed;
  for (const NeighborInfo & n : obs.neighbors) {
    if (n.rel.x <= 0.0 || (n.lane != obs.lane && std::abs(n.rel.y) >= corridor)) {
      continue;
    }
    const double gap = std::max(0.0, n.rel.x - ctx.vehicle.length);
    const double t = metrics::ttc(gap, obs.speed, n.speed);
    if (gap < desired || t < bp.follow_ttc) {
      out.hazard = true;
      out.note = "leader " + std::to_string(n.id) + " gap " + fmt(gap) + " m, ttc " +
        (std::isinf(t) ? std::string("inf") : fmt(t)) + " s";
      return out;
    }
    if (gap < 1.5 * desired && obs.speed >= n.speed) {
      out.close = true;
      out.note = "leader " + std::to_string(n.id) + " gap " + fmt(gap) + " m";
    }
  }
  return out;
}

inline MetaAction speed_up_or_hold(double speed, double cap)
{
  return speed < cap - 0.05 ? MetaAction::kAcc : MetaAction::kIdle;
}
}  // namespace detail

/// Main-lane vehicles the ramp ego must merge between: observed neighbours in
/// the target lane plus message senders revealed there (positions advanced
/// by their speed over the message age).
inline std::vector<Conflict> merge_conflicts(
  const Observation & obs, const std::vector<Message> & messages, int target, double dt)
{
  std::vector<Conflict> out;
  for (const NeighborInfo & n : obs.neighbors) {
    if (n.lane == target) {
      out.push_back({n.id, n.rel.x, n.speed, false});
    }
  }
  for (const Message & m : messages) {
    if (m.lane != target || m.sender == obs.agent_id) {
      continue;
    }
    const bool seen = std::any_of(
      out.begin(), out.end(), [&](const Conflict & c) {return c.id == m.sender;});
    if (seen) {
      continue;
    }
    const double age = static_cast<double>(obs.tick - m.send_tick) * dt;
    out.push_back({m.sender, m.position.x + m.speed * age - obs.ego.x, m.speed, true});
  }
  return out;
}

/// Gap-acceptance reference policy. Pure: same inputs give the same Decision.
inline Decision baseline_decide(
  const Observation & obs, const std::vector<Message> & messages, const HistoryBuffer & history,
  const PlanningContext & ctx, const BaselineParams & bp = {})
{
  (void)history;
  const double L = ctx.vehicle.length;
  const double v = obs.speed;
  const double window = ctx.refine.maneuver_window;
  MetaAction meta = MetaAction::kIdle;
  std::string why;

  const detail::Leader leader = detail::check_leader(obs, ctx, bp);
  if (leader.hazard) {
    meta = MetaAction::kDec;
    why = "follow: " + leader.note;
  } else if (obs.on_ramp && !obs.changing_lane) {
    const int target = obs.lane - 1;
    const auto conflicts = merge_conflicts(obs, messages, target, ctx.refine.dt);
    const double dist = obs.distance_to_merge;
    const bool room = dist >= v * window / 2.0 + bp.merge_end_margin;
    const bool in_zone = dist <= bp.merge_zone_length;
    const double arrive = in_zone ? 0.0 : (dist - bp.merge_zone_length) / std::max(v, 1.0);
    std::vector<const Conflict *> blocking;
    for (const Conflict & c : conflicts) {
      if (!detail::gap_ok(c, v, arrive, L, bp) || !detail::gap_ok(c, v, arrive + window, L, bp)) {
        blocking.push_back(&c);
      }
    }
    const bool any_ahead = std::any_of(
      blocking.begin(), blocking.end(), [](const Conflict * c) {return c->dx > 0.0;});
    const bool last_chance = dist < v * v / (2.0 * ctx.vehicle.a_max) + bp.stop_margin;
    if (blocking.empty() && in_zone && room && v >= bp.min_change_speed) {
      meta = MetaAction::kLeft;
      why = "ramp: " + std::to_string(conflicts.size()) + " target-lane vehicles, all gaps >= " +
        detail::fmt(bp.gap_min) + " m with ttc > " + detail::fmt(bp.ttc_threshold) + " s";
    } else if (blocking.empty() && (room || !in_zone)) {
      meta = leader.close ? MetaAction::kIdle : detail::speed_up_or_hold(v, bp.speed_cap);
      why = in_zone ? "ramp: gap open, building speed for the lane change" :
        "ramp: projected merge gap acceptable";
    } else if (blocking.empty()) {
      meta = MetaAction::kDec;
      why = "ramp: too close to the ramp end to change lanes";
    } else if (any_ahead) {
      meta = MetaAction::kDec;
      why = "ramp: yield, vehicle " + std::to_string(blocking.front()->id) + " ahead in the target gap";
    } else if (last_chance) {
      meta = MetaAction::kDec;
      why = "ramp: vehicle " + std::to_string(blocking.front()->id) +
        " alongside or behind near the ramp end, stopping";
    } else {
      meta = leader.close ? MetaAction::kIdle : detail::speed_up_or_hold(v, bp.speed_cap);
      why = "ramp: pulling ahead of vehicle " + std::to_string(blocking.front()->id);
    }
  } else {
    // Main road: yield to a ramp vehicle that announced itself ahead of us.
    std::string yield;
    if (obs.distance_to_merge >= 0.0 && !obs.changing_lane) {
      for (const Message & m : messages) {
        if (!m.on_ramp || m.lane - 1 != obs.lane || m.sender == obs.agent_id) {
          continue;
        }
        const double age = static_cast<double>(obs.tick - m.send_tick) * ctx.refine.dt;
        const double dx = m.position.x + m.speed * age - obs.ego.x;
        if (dx < 0.0) {
          continue;
        }
        const double gap = std::max(0.0, dx - L);
        const double gap_later = dx + (m.speed - v) * window - L;
        if (gap < bp.gap_min || gap_later < bp.gap_min ||
          metrics::ttc(gap, v, m.speed) < bp.ttc_threshold)
        {
          yield = "main: ramp vehicle " + std::to_string(m.sender) + " committed " +
            std::string(to_token(m.committed)) + ", predicted gap " + detail::fmt(std::min(gap, gap_later)) +
            " m < " + detail::fmt(bp.gap_min) + " m";
          break;
        }
      }
    }
    if (!yield.empty()) {
      meta = MetaAction::kDec;
      why = yield;
    } else if (leader.close) {
      meta = MetaAction::kIdle;
      why = "follow: " + leader.note;
    } else {
      meta = detail::speed_up_or_hold(v, bp.cruise_speed);
      why = meta == MetaAction::kAcc ? "main: below cruise speed" : "main: cruising";
    }
  }

  const RefinedPlan plan = refine_with_fallback(meta, obs, ctx);
  Decision d;
  d.meta_action = plan.meta;
  d.trajectory = plan.trajectory;
  d.rationale = why;
  if (plan.fell_back) {
    d.rationale += "; " + std::string(to_token(meta)) + " infeasible, decelerating";
  }
  return d;
}

// ---------------------------------------------------------------------------
// External reasoner protocol

/// Request document: labelled sections, each introduced by "=== NAME ===".
inline std::string build_prompt(
  const Observation & obs, const std::vector<Message> & messages, const HistoryBuffer & history,
  const PlanningContext & ctx)
{
  using detail::fmt;
  const auto ranked = perception::rank_critical_objects(obs, ctx.network);
  std::string p;
  p += "=== SCENE ===\n";
  p += perception::build_scene_description(obs, ctx.network, ranked).text;
  p += "=== EGO ===\n";
  p += "id " + std::to_string(obs.agent_id) + " tick " + std::to_string(obs.tick) + " lane " +
    std::to_string(obs.lane) + (obs.on_ramp ? " ramp" : " main") + " x " + fmt(obs.ego.x) + " y " +
    fmt(obs.ego.y) + " heading " + fmt(obs.ego.alpha) + " speed " + fmt(obs.speed) +
    " merge_distance " + fmt(obs.distance_to_merge) + "\n";
  p += "=== NEIGHBORS ===\n";
  if (obs.neighbors.empty()) {
    p += "none\n";
  }
  for (const NeighborInfo & n : obs.neighbors) {
    p += "id " + std::to_string(n.id) + " lane " + std::to_string(n.lane) + " dx " + fmt(n.rel.x) +
      " dy " + fmt(n.rel.y) + " speed " + fmt(n.speed) + "\n";
  }
  p += "=== MESSAGES ===\n";
  if (messages.empty()) {
    p += "none\n";
  }
  for (const Message & m : messages) {
    p += "from " + std::to_string(m.sender) + " sent " + std::to_string(m.send_tick) + " lane " +
      std::to_string(m.lane) + (m.on_ramp ? " ramp" : " main") + " x " + fmt(m.position.x) + " y " +
      fmt(m.position.y) + " speed " + fmt(m.speed) + " merge_distance " + fmt(m.distance_to_merge) +
      " commits " + std::string(to_token(m.committed)) + " for " + fmt(m.window) + " s\n";
  }
  p += "=== HISTORY ===\n";
  if (history.empty()) {
    p += "none\n";
  }
  for (const auto & [o, a] : history.entries()) {
    p += "tick " + std::to_string(o.tick) + " lane " + std::to_string(o.lane) + " speed " + fmt(o.speed) +
      " action " + std::string(to_token(a)) + "\n";
  }
  p += "=== INSTRUCTIONS ===\n";
  p += "Think step by step. First identify the vehicles that can conflict with you at the merge.\n";
  p += "Then use the messages to infer what they intend to do next.\n";
  p += "Then choose one meta-action for the next " + fmt(ctx.refine.horizon) + " s.\n";
  p += "Reply with the meta-action on line 1, one of LEFT RIGHT IDLE ACC DEC.\n";
  p += "Line 2 may hold waypoints every " + fmt(ctx.refine.dt) +
    " s as \"x,y;\" pairs in metres relative to your current position, or stay empty.\n";
  p += "Further lines hold your reasoning.\n";
  return p;
}

struct ParsedResponse
{
  MetaAction meta{MetaAction::kIdle};
  std::optional<std::vector<Point2>> waypoints;  // ego-relative
  std::string rationale;
};

/// Response grammar: line 1 a meta-action token, optional line 2 a token
/// trajectory, remaining lines free text. Throws kParse.
inline ParsedResponse parse_response(const std::string & text)
{
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) {
    lines.push_back(cur);
  }
  auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
  if (lines.empty()) {
    throw Error(ErrorKind::kParse, "response: empty");
  }
  const std::string head = trim(lines[0]);
  const auto meta = parse_meta_action(head);
  if (!meta) {
    throw Error(ErrorKind::kParse, "response: unknown meta-action \"" + head + "\"");
  }
  ParsedResponse r;
  r.meta = *meta;
  if (lines.size() > 1) {
    const std::string traj = trim(lines[1]);
    if (!traj.empty()) {
      r.waypoints = detokenize_points(traj);
    }
  }
  for (std::size_t i = 2; i < lines.size(); ++i) {
    if (!r.rationale.empty()) {
      r.rationale += "\n";
    }
    r.rationale += lines[i];
  }
  return r;
}

/// Finite-difference feasibility of a supplied trajectory: spacing, and the
/// flat-recovered speed, steering angle and steering rate at interior samples.
/// Throws kInfeasibleManeuver.
inline void check_trajectory_feasible(
  const Trajectory & t, const dynamics::VehicleParams & p, double eps = dynamics::kDefaultEpsilonSpeed)
{
  const auto & q = t.points;
  const double dt = t.dt;
  const double slack = 2.0 * kTokenGrid;
  for (std::size_t k = 1; k < q.size(); ++k) {
    if (distance(q[k], q[k - 1]) > p.u_max * dt + slack) {
      throw Error(
              ErrorKind::kInfeasibleManeuver,
              "trajectory: spacing at waypoint " + std::to_string(k) + " exceeds u_max*dt");
    }
  }
  for (std::size_t k = 2; k + 2 < q.size(); ++k) {
    dynamics::FlatSample f;
    f.delta = {q[k].x, q[k].y};
    f.d1 = {(q[k + 1].x - q[k - 1].x) / (2 * dt), (q[k + 1].y - q[k - 1].y) / (2 * dt)};
    f.d2 = {(q[k + 1].x - 2 * q[k].x + q[k - 1].x) / (dt * dt),
      (q[k + 1].y - 2 * q[k].y + q[k - 1].y) / (dt * dt)};
    f.d3 = {(q[k + 2].x - 2 * q[k + 1].x + 2 * q[k - 1].x - q[k - 2].x) / (2 * dt * dt * dt),
      (q[k + 2].y - 2 * q[k + 1].y + 2 * q[k - 1].y - q[k - 2].y) / (2 * dt * dt * dt)};
    if (std::hypot(f.d1[0], f.d1[1]) <= std::max(eps, 0.5)) {
      continue;  // curvature is not resolvable at a near standstill on the 1 cm grid
    }
    detail::require_feasible(f, p, eps, k, "trajectory");
  }
}

/// Queries the external reasoner. Any transport, grammar, legality or
/// feasibility problem yields the baseline decision with the fallback flag set.
inline Decision external_decide(
  const Observation & obs, const std::vector<Message> & messages, const HistoryBuffer & history,
  const PlanningContext & ctx, Transport & transport, std::chrono::milliseconds timeout,
  const BaselineParams & bp = {})
{
  auto fallback = [&](const std::string & why) {
      Decision d = baseline_decide(obs, messages, history, ctx, bp);
      d.fallback = true;
      d.diagnostic = why;
      return d;
    };
  std::string reply;
  try {
    reply = transport.exchange(build_prompt(obs, messages, history, ctx), timeout);
  } catch (const Error & e) {
    return fallback(e.what());
  }
  ParsedResponse parsed;
  try {
    parsed = parse_response(reply);
  } catch (const Error & e) {
    return fallback(e.what());
  }
  const bool changing = is_lane_change(parsed.meta);
  if (changing && (obs.changing_lane ||
    !meta_legal(parsed.meta, obs.lane, obs.ego.x, obs.speed, ctx.network, ctx.refine.maneuver_window)))
  {
    return fallback("response: " + std::string(to_token(parsed.meta)) + " is not legal here");
  }
  Decision d;
  d.meta_action = parsed.meta;
  d.rationale = parsed.rationale;
  if (!parsed.waypoints) {
    try {
      d.trajectory = refine_to_trajectory(
        parsed.meta, obs.ego, {obs.speed, 0.0}, ctx.network, obs.lane, ctx.vehicle, ctx.refine,
        obs.changing_lane ? std::optional<double>(obs.maneuver_remaining) : std::nullopt);
    } catch (const Error & e) {
      return fallback(e.what());
    }
    return d;
  }
  const auto & rel = *parsed.waypoints;
  if (rel.size() < 2) {
    return fallback("response: trajectory needs at least two waypoints");
  }
  if (norm(rel.front()) > kTokenGrid) {
    return fallback("response: trajectory must start at the ego position (0,0)");
  }
  Trajectory t;
  t.dt = ctx.refine.dt;
  for (const Point2 & r : rel) {
    t.points.push_back({obs.ego.x + r.x, obs.ego.y + r.y});
  }
  t.points.front() = {obs.ego.x, obs.ego.y};
  try {
    check_trajectory_feasible(t, ctx.vehicle, ctx.refine.epsilon_speed);
  } catch (const Error & e) {
    return fallback(e.what());
  }
  const Point2 end = t.points.back();
  const auto end_lane = ctx.network.locate(end.x, end.y);
  if (!end_lane || *end_lane != target_lane(parsed.meta, obs.lane)) {
    return fallback("response: trajectory does not end in the lane implied by " +
             std::string(to_token(parsed.meta)));
  }
  d.trajectory = std::move(t);
  return d;
}

}  // namespace comerge::planning

#endif  // COMERGE__PLANNING_HPP_
