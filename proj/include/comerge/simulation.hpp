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

#ifndef COMERGE__SIMULATION_HPP_
#define COMERGE__SIMULATION_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "comerge/dynamics.hpp"
#include "comerge/error.hpp"
#include "comerge/metrics.hpp"
#include "comerge/obb.hpp"
#include "comerge/observation.hpp"
#include "comerge/planning.hpp"
#include "comerge/rng.hpp"
#include "comerge/scenario.hpp"

namespace comerge::simulation
{

enum class EventKind
{
  kCollision,
  kOffRoad,
  kMergeCompleted,
  kSpeedViolation,
};

inline constexpr std::string_view to_string(EventKind k)
{
  switch (k) {
    case EventKind::kCollision: return "collision";
    case EventKind::kOffRoad: return "off_road";
    case EventKind::kMergeCompleted: return "merge_completed";
    case EventKind::kSpeedViolation: return "speed_violation";
  }
  return "unknown";
}

inline std::optional<EventKind> parse_event_kind(std::string_view s)
{
  for (EventKind k : {EventKind::kCollision, EventKind::kOffRoad, EventKind::kMergeCompleted,
      EventKind::kSpeedViolation})
  {
    if (to_string(k) == s) {
      return k;
    }
  }
  return std::nullopt;
}

struct Event
{
  EventKind kind{EventKind::kCollision};
  long tick{0};
  std::vector<int> agents;  // ascending
  double value{0.0};        // IoU for collisions, speed for violations

  bool operator==(const Event &) const = default;
};

enum class Outcome
{
  kActive,
  kMergeCompleted,
  kCollision,
  kOffRoad,
  kHorizonEnd,
};

inline constexpr std::string_view to_string(Outcome o)
{
  switch (o) {
    case Outcome::kActive: return "active";
    case Outcome::kMergeCompleted: return "merge_completed";
    case Outcome::kCollision: return "collision";
    case Outcome::kOffRoad: return "off_road";
    case Outcome::kHorizonEnd: return "horizon_end";
  }
  return "unknown";
}

/// Lane change in progress. The logical lane is already `to`.
struct Maneuver
{
  int from{0};
  int to{0};
  double elapsed{0.0};   // s
  double window{3.0};    // s
  double start_s{0.0};   // station where it began
  double length{30.0};   // m, nominal span for the route reference

  bool operator==(const Maneuver &) const = default;
};

struct Agent
{
  int id{0};
  dynamics::VehicleState state;
  dynamics::ControlInput control;
  int lane{0};
  bool ramp_origin{false};
  std::optional<Maneuver> maneuver;
  bool alive{true};
  bool speeding{false};
  Outcome outcome{Outcome::kActive};

  bool operator==(const Agent &) const = default;
};

struct SimConfig
{
  double dt{0.1};
  double sensing_radius{100.0};
  double noise_sigma{0.0};        // m, additive observation noise on neighbour positions
  double merge_tolerance{0.5};    // m from the target centre to finish a lane change
  double speed_limit{metrics::kSpeedViolationThreshold};
  double maneuver_window{3.0};
  dynamics::VehicleParams vehicle;

  void validate() const
  {
    auto require = [](bool ok, const char * what) {
        if (!ok) {
          throw Error(ErrorKind::kConfig, std::string("run: ") + what);
        }
      };
    require(dt > 0.0, "dt must be positive");
    require(sensing_radius > 0.0, "sensing_radius must be positive");
    require(noise_sigma >= 0.0, "noise_sigma must be >= 0");
    require(merge_tolerance > 0.0, "merge_tolerance must be positive");
    require(maneuver_window > 0.0, "maneuver_window must be positive");
    vehicle.validate();
  }
};

/// Joint state: every agent (alive or retired) ordered by id plus the environment descriptor.
struct SimState
{
  long tick{0};
  double time{0.0};
  std::vector<Agent> agents;
  std::string network_id{"ramp-merge"};
  scenario::MergeCondition condition{scenario::MergeCondition::kConflicting};

  bool operator==(const SimState &) const = default;
};

inline SimState initial_state(const scenario::Scenario & sc)
{
  SimState s;
  s.condition = scenario::classify_merge_condition(sc.network);
  for (const scenario::Placement & p : sc.placements) {
    Agent a;
    a.id = p.id;
    a.state = p.state;
    a.control = {p.speed, 0.0};
    a.lane = p.lane;
    a.ramp_origin = sc.network.is_ramp_lane(p.lane);
    s.agents.push_back(a);
  }
  std::sort(s.agents.begin(), s.agents.end(), [](const Agent & a, const Agent & b) {return a.id < b.id;});
  for (std::size_t i = 1; i < s.agents.size(); ++i) {
    if (s.agents[i].id == s.agents[i - 1].id) {
      throw Error(ErrorKind::kInvalidArgument, "duplicate agent id " + std::to_string(s.agents[i].id));
    }
  }
  return s;
}

inline const Agent & find_agent(const SimState & sim, int id)
{
  const auto it = std::lower_bound(
    sim.agents.begin(), sim.agents.end(), id, [](const Agent & a, int v) {return a.id < v;});
  if (it == sim.agents.end() || it->id != id) {
    throw Error(ErrorKind::kUnknownAgent, "unknown agent id " + std::to_string(id));
  }
  return *it;
}

inline std::vector<int> alive_ids(const SimState & sim)
{
  std::vector<int> ids;
  for (const Agent & a : sim.agents) {
    if (a.alive) {
      ids.push_back(a.id);
    }
  }
  return ids;
}

/// Reference line for route-deviation checks: the agent's lane, blended
/// through an active lane change, from just behind the agent to the end of
/// its planning horizon.
inline scenario::Route current_route(
  const Agent & a, const scenario::RoadNetwork & net, double horizon, double u_max,
  int n_c = scenario::kDefaultCenterlineSamples)
{
  const double s0 = a.state.x - 1.0;
  const double s1 = a.state.x + std::max(u_max * horizon, 10.0);
  if (a.maneuver) {
    const Maneuver & m = *a.maneuver;
    return scenario::sample_route(
      net, {m.from, m.to}, s0, s1, n_c,
      scenario::LaneTransition{m.from, m.to, m.start_s, m.length});
  }
  return scenario::sample_route(net, {a.lane}, s0, s1, n_c);
}

/// Route the agent follows once `meta` is executed: a lane change decided
/// now already bends toward the target lane.
inline scenario::Route intended_route(
  const Agent & a, MetaAction meta, const scenario::RoadNetwork & net, const SimConfig & cfg,
  double horizon, int n_c = scenario::kDefaultCenterlineSamples)
{
  if (!is_lane_change(meta) || a.maneuver) {
    return current_route(a, net, horizon, cfg.vehicle.u_max, n_c);
  }
  const int to = planning::target_lane(meta, a.lane);
  if (!net.lane_exists(to, a.state.x)) {
    return current_route(a, net, horizon, cfg.vehicle.u_max, n_c);
  }
  Agent b = a;
  b.maneuver = Maneuver{a.lane, to, 0.0, cfg.maneuver_window, a.state.x,
    std::max(a.control.u, 1.0) * cfg.maneuver_window};
  return current_route(b, net, horizon, cfg.vehicle.u_max, n_c);
}

/// Partial view of one agent. With `noise` and a positive sigma, neighbour
/// positions carry additive Gaussian noise (two draws per other alive agent,
/// in id order, whether or not it ends up in range).
inline Observation observe(
  const SimState & sim, int agent_id, const scenario::RoadNetwork & net, const SimConfig & cfg,
  NamedStream * noise = nullptr)
{
  const Agent & ego = find_agent(sim, agent_id);
  if (!ego.alive) {
    throw Error(ErrorKind::kInvalidArgument, "agent " + std::to_string(agent_id) + " has retired");
  }
  Observation o;
  o.agent_id = ego.id;
  o.tick = sim.tick;
  o.time = sim.time;
  o.ego = ego.state;
  o.speed = ego.control.u;
  o.lane = ego.lane;
  o.lane_count = net.lane_count_at(ego.state.x);
  o.main_lanes = net.main_lanes;
  o.post_merge_lanes = net.post_merge_lanes;
  o.on_ramp = net.is_ramp_lane(ego.lane);
  o.changing_lane = ego.maneuver.has_value();
  if (ego.maneuver) {
    o.maneuver_remaining = std::max(0.0, ego.maneuver->window - ego.maneuver->elapsed);
  }
  o.distance_to_merge = net.merge_point_s - ego.state.x;
  const bool noisy = noise != nullptr && cfg.noise_sigma > 0.0;
  for (const Agent & other : sim.agents) {
    if (!other.alive || other.id == ego.id) {
      continue;
    }
    Point2 rel{other.state.x - ego.state.x, other.state.y - ego.state.y};
    if (noisy) {
      rel.x += cfg.noise_sigma * noise->normal();
      rel.y += cfg.noise_sigma * noise->normal();
    }
    const double d = norm(rel);
    if (d > cfg.sensing_radius) {
      continue;
    }
    o.neighbors.push_back({other.id, rel, other.control.u, other.lane, d});
  }
  std::sort(
    o.neighbors.begin(), o.neighbors.end(), [](const NeighborInfo & a, const NeighborInfo & b) {
      return std::tie(a.distance, a.id) < std::tie(b.distance, b.id);
    });
  return o;
}

/// Control that follows the first step of a trajectory: the planned speed at
/// t = dt and a steering rate that reaches the planned steering angle at t = dt.
inline dynamics::ControlInput tracking_control(
  const planning::Trajectory & traj, const dynamics::VehicleState & s,
  const dynamics::VehicleParams & p)
{
  const auto & q = traj.points;
  const double dt = traj.dt;
  dynamics::ControlInput c;
  if (q.size() < 2) {
    return c;
  }
  if (q.size() < 3) {
    c.u = std::min(distance(q[1], q[0]) / dt, p.u_max);
    c.omega = std::clamp(-s.beta / dt, -p.omega_max, p.omega_max);
    return c;
  }
  const Point2 v{(q[2].x - q[0].x) / (2.0 * dt), (q[2].y - q[0].y) / (2.0 * dt)};
  const Point2 a{(q[2].x - 2.0 * q[1].x + q[0].x) / (dt * dt), (q[2].y - 2.0 * q[1].y + q[0].y) / (dt * dt)};
  const double speed = norm(v);
  c.u = std::clamp(speed, 0.0, p.u_max);
  double beta_target = 0.0;
  if (speed > 0.5) {
    beta_target = std::atan(cross(v, a) * p.wheelbase / (speed * speed * speed));
  } else {
    beta_target = s.beta;
  }
  beta_target = std::clamp(beta_target, -p.beta_max, p.beta_max);
  c.omega = std::clamp((beta_target - s.beta) / dt, -p.omega_max, p.omega_max);
  return c;
}

/// What an agent executes this tick.
struct Command
{
  MetaAction meta{MetaAction::kIdle};
  planning::Trajectory trajectory;
};

struct StepResult
{
  SimState state;
  std::vector<Event> events;
};

/// One synchronous tick. Agents are stepped in ascending id; events come out
/// as collisions (ascending id pairs), off-road, merge completions, then
/// speed violations. A retired agent keeps its last state.
inline StepResult advance(
  const SimState & sim, const std::map<int, Command> & commands, const scenario::RoadNetwork & net,
  const SimConfig & cfg)
{
  StepResult out;
  SimState & next = out.state;
  next = sim;
  const dynamics::VehicleParams & p = cfg.vehicle;
  for (const auto & [id, cmd] : commands) {
    if (!find_agent(sim, id).alive) {
      throw Error(ErrorKind::kInvalidArgument, "command for retired agent " + std::to_string(id));
    }
  }
  std::vector<std::size_t> stepped;
  for (std::size_t i = 0; i < next.agents.size(); ++i) {
    Agent & a = next.agents[i];
    if (!a.alive) {
      continue;
    }
    const auto it = commands.find(a.id);
    if (it == commands.end()) {
      throw Error(ErrorKind::kInvalidArgument, "no decision for agent " + std::to_string(a.id));
    }
    const Command & cmd = it->second;
    if (std::abs(cmd.trajectory.dt - cfg.dt) > 1e-12) {
      throw Error(
              ErrorKind::kInvalidArgument,
              "trajectory time base " + std::to_string(cmd.trajectory.dt) + " s does not match dt " +
              std::to_string(cfg.dt) + " s");
    }
    if (is_lane_change(cmd.meta) && !a.maneuver) {
      const int to = planning::target_lane(cmd.meta, a.lane);
      if (!net.lane_exists(to, a.state.x)) {
        throw Error(ErrorKind::kInvalidArgument, "lane change into a missing lane by agent " + std::to_string(a.id));
      }
      a.maneuver = Maneuver{a.lane, to, 0.0, cfg.maneuver_window, a.state.x,
        std::max(a.control.u, 1.0) * cfg.maneuver_window};
      a.lane = to;
    }
    a.control = tracking_control(cmd.trajectory, a.state, p);
    a.state = dynamics::step(a.state, a.control, p, cfg.dt);
    if (a.maneuver) {
      a.maneuver->elapsed += cfg.dt;
      const bool done = a.maneuver->elapsed >= a.maneuver->window - 1e-9 &&
        std::abs(a.state.y - net.lane_center_y(a.maneuver->to)) < cfg.merge_tolerance;
      if (done) {
        a.maneuver.reset();
      }
    }
    stepped.push_back(i);
  }
  next.tick = sim.tick + 1;
  next.time = static_cast<double>(next.tick) * cfg.dt;

  std::vector<bool> collided(next.agents.size(), false);
  for (std::size_t x = 0; x < stepped.size(); ++x) {
    for (std::size_t y = x + 1; y < stepped.size(); ++y) {
      const Agent & a = next.agents[stepped[x]];
      const Agent & b = next.agents[stepped[y]];
      if (std::abs(a.state.x - b.state.x) > 2.0 * p.length ||
        std::abs(a.state.y - b.state.y) > 2.0 * p.length)
      {
        continue;
      }
      const double iou = reflection::obb_iou(reflection::vehicle_box(a.state, p), reflection::vehicle_box(b.state, p));
      if (iou > 0.0) {
        out.events.push_back({EventKind::kCollision, next.tick, {a.id, b.id}, iou});
        collided[stepped[x]] = true;
        collided[stepped[y]] = true;
      }
    }
  }
  std::vector<Event> off, merged, speeding;
  for (std::size_t i : stepped) {
    Agent & a = next.agents[i];
    if (collided[i]) {
      a.alive = false;
      a.outcome = Outcome::kCollision;
    } else if (!net.locate(a.state.x, a.state.y)) {
      a.alive = false;
      a.outcome = Outcome::kOffRoad;
      off.push_back({EventKind::kOffRoad, next.tick, {a.id}, 0.0});
    } else if (a.ramp_origin && !a.maneuver && !net.is_ramp_lane(a.lane)) {
      a.alive = false;
      a.outcome = Outcome::kMergeCompleted;
      merged.push_back({EventKind::kMergeCompleted, next.tick, {a.id}, 0.0});
    }
    const bool over = a.control.u > cfg.speed_limit;
    if (over && !a.speeding) {
      speeding.push_back({EventKind::kSpeedViolation, next.tick, {a.id}, a.control.u});
    }
    a.speeding = over;
  }
  for (auto * v : {&off, &merged, &speeding}) {
    out.events.insert(out.events.end(), v->begin(), v->end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-tick scores and rewards

struct ScoreSettings
{
  metrics::ComfortLimits comfort;
  double ttc_threshold{5.0};
  double speed_limit{metrics::kSpeedViolationThreshold};  // v_lmt for ES
  double sigma{0.0};
};

struct StepScores
{
  double cs{1.0};
  double es{1.0};
  double ss{1.0};
  double ttc{metrics::kInfinity};

  bool operator==(const StepScores &) const = default;
};

/// Smallest TTC to any vehicle ahead in the agent's lane or lateral corridor.
inline double leader_ttc(const SimState & sim, const Agent & ego, const scenario::RoadNetwork & net, const SimConfig & cfg)
{
  const double corridor = 0.5 * (net.lane_width + cfg.vehicle.width);
  double best = metrics::kInfinity;
  for (const Agent & o : sim.agents) {
    if (!o.alive || o.id == ego.id) {
      continue;
    }
    const double dx = o.state.x - ego.state.x;
    if (dx <= 0.0 || (o.lane != ego.lane && std::abs(o.state.y - ego.state.y) >= corridor)) {
      continue;
    }
    const double gap = std::max(0.0, dx - cfg.vehicle.length);
    best = std::min(best, metrics::ttc(gap, ego.control.u, o.control.u));
  }
  return best;
}

/// CS from the decision trajectory, ES against neighbours within sensing
/// range (or the speed limit when alone), SS from the leader TTC.
inline StepScores step_scores(
  const SimState & sim, int agent_id, const planning::Trajectory & traj, const scenario::RoadNetwork & net,
  const SimConfig & cfg, const ScoreSettings & ss)
{
  const Agent & ego = find_agent(sim, agent_id);
  StepScores s;
  const auto samples = metrics::motion_samples(std::span<const Point2>(traj.points), traj.dt);
  s.cs = samples.empty() ? 1.0 : metrics::comfort_score(samples, ss.comfort);
  double sum = 0.0;
  int count = 0;
  for (const Agent & o : sim.agents) {
    if (!o.alive || o.id == ego.id) {
      continue;
    }
    if (distance(Point2{o.state.x, o.state.y}, Point2{ego.state.x, ego.state.y}) <= cfg.sensing_radius) {
      sum += o.control.u;
      ++count;
    }
  }
  const double v_avg = count > 0 ? sum / count : ss.speed_limit;
  const double v0 = std::min(v_avg, ss.speed_limit) + ss.sigma;
  s.es = v0 > 0.0 ? metrics::efficiency_score(ego.control.u, v_avg, ss.speed_limit, ss.sigma) : 1.0;
  s.ttc = leader_ttc(sim, ego, net, cfg);
  s.ss = metrics::safety_score(s.ttc, ss.ttc_threshold);
  return s;
}

inline double reward(const StepScores & s, bool collided, const metrics::ScoreWeights & w, double collision_penalty)
{
  return w.k1 * s.cs + w.k2 * s.es + w.k3 * s.ss - (collided ? collision_penalty : 0.0);
}

inline double discounted_return(std::span<const double> rewards, double gamma)
{
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "discount factor must lie in [0, 1]");
  }
  double total = 0.0;
  double g = 1.0;
  for (double r : rewards) {
    total += g * r;
    g *= gamma;
  }
  return total;
}

}  // namespace comerge::simulation

#endif  // COMERGE__SIMULATION_HPP_
