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

#ifndef COMERGE__HARNESS__CONFIG_HPP_
#define COMERGE__HARNESS__CONFIG_HPP_

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "comerge/communication.hpp"
#include "comerge/dynamics.hpp"
#include "comerge/error.hpp"
#include "comerge/metrics.hpp"
#include "comerge/planning.hpp"
#include "comerge/reflection.hpp"
#include "comerge/rng.hpp"
#include "comerge/scenario.hpp"
#include "comerge/simulation.hpp"
#include "comerge/transport.hpp"

// Run configuration. The file is a JSON object with the sections scenario
// (required), vehicles, policies, channel, thresholds, weights and run.
// Omitted keys take their defaults; unknown keys are rejected.
namespace comerge::harness
{

using Json = nlohmann::ordered_json;

inline constexpr const char * kEndpointEnv = "COMERGE_REASONER_ENDPOINT";

struct PolicySpec
{
  std::string kind{"baseline"};  // baseline | external
  std::string endpoint;          // tcp://host:port or exec:command

  bool operator==(const PolicySpec &) const = default;
};

struct PolicyConfig
{
  PolicySpec default_policy;
  std::map<int, PolicySpec> overrides;  // by agent id
  long timeout_ms{2000};
  planning::BaselineParams baseline;

  const PolicySpec & for_agent(int id) const
  {
    const auto it = overrides.find(id);
    return it == overrides.end() ? default_policy : it->second;
  }
};

struct WeightsConfig
{
  metrics::ScoreWeights weights;
  double collision_penalty{1.0};
  simulation::ScoreSettings scores;
};

struct RunSettings
{
  std::uint64_t seed{0};
  long horizon{400};  // ticks
  double dt{0.1};
  double plan_horizon{3.0};
  double maneuver_window{3.0};
  double sensing_radius{100.0};
  double noise_sigma{0.0};
  long history_cap{10};
  int centerline_samples{scenario::kDefaultCenterlineSamples};
  double merge_tolerance{0.5};
  double gamma{1.0};
};

struct RunConfig
{
  scenario::ScenarioConfig scenario{scenario::default_scenario_config()};
  dynamics::VehicleParams vehicle;
  PolicyConfig policies;
  communication::ChannelConfig channel;
  reflection::Thresholds thresholds;
  WeightsConfig weights;
  RunSettings run;

  simulation::SimConfig sim_config() const
  {
    simulation::SimConfig c;
    c.dt = run.dt;
    c.sensing_radius = run.sensing_radius;
    c.noise_sigma = run.noise_sigma;
    c.merge_tolerance = run.merge_tolerance;
    c.speed_limit = weights.scores.speed_limit;
    c.maneuver_window = run.maneuver_window;
    c.vehicle = vehicle;
    return c;
  }

  planning::PlanningContext planning_context(const scenario::RoadNetwork & net) const
  {
    planning::PlanningContext ctx;
    ctx.network = net;
    ctx.vehicle = vehicle;
    ctx.refine.horizon = run.plan_horizon;
    ctx.refine.dt = run.dt;
    ctx.refine.maneuver_window = run.maneuver_window;
    return ctx;
  }
};

namespace detail
{
/// Reads one JSON object, remembering which keys were consumed.
class Section
{
public:
  Section(const Json & obj, std::string path)
  : obj_(obj), path_(std::move(path))
  {
    if (!obj_.is_object()) {
      throw Error(ErrorKind::kConfig, path_ + ": expected an object");
    }
  }

  template<typename T>
  void read(const char * key, T & out)
  {
    seen_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end()) {
      return;
    }
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) {
          throw Error(ErrorKind::kConfig, "");
        }
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) {
          throw Error(ErrorKind::kConfig, "");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) {
          throw Error(ErrorKind::kConfig, "");
        }
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) {
          throw Error(ErrorKind::kConfig, "");
        }
      }
      out = it->template get<T>();
    } catch (const std::exception &) {
      throw Error(ErrorKind::kConfig, name(key) + ": wrong type");
    }
  }

  const Json * child(const char * key)
  {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string name(const std::string & key) const {return path_ + "." + key;}

  void finish() const
  {
    for (const auto & [k, v] : obj_.items()) {
      if (!seen_.count(k)) {
        throw Error(ErrorKind::kConfig, name(k) + ": unknown key");
      }
    }
  }

private:
  const Json & obj_;
  std::string path_;
  std::set<std::string> seen_;
};

inline PolicySpec read_policy(const Json & j, const std::string & path)
{
  Section s(j, path);
  PolicySpec p;
  s.read("kind", p.kind);
  s.read("endpoint", p.endpoint);
  s.finish();
  if (p.kind != "baseline" && p.kind != "external") {
    throw Error(ErrorKind::kConfig, path + ".kind: expected baseline or external");
  }
  if (p.kind == "external") {
    if (p.endpoint.empty()) {
      throw Error(ErrorKind::kConfig, path + ".endpoint: required for external policies");
    }
    (void)planning::make_transport(p.endpoint);
  }
  return p;
}
}  // namespace detail

/// Builds a validated RunConfig from parsed JSON.
inline RunConfig parse_config(const Json & root)
{
  using detail::Section;
  if (!root.is_object()) {
    throw Error(ErrorKind::kConfig, "config: top level must be an object");
  }
  RunConfig c;
  Section top(root, "config");
  const Json * sc = top.child("scenario");
  if (!sc) {
    throw Error(ErrorKind::kConfig, "scenario: missing required section");
  }
  {
    Section s(*sc, "scenario");
    auto & n = c.scenario.network;
    s.read("main_lanes", n.main_lanes);
    s.read("ramp_lanes", n.ramp_lanes);
    s.read("post_merge_lanes", n.post_merge_lanes);
    s.read("lane_width", n.lane_width);
    s.read("road_length", n.road_length);
    s.read("ramp_start", n.ramp_start_s);
    s.read("merge_point", n.merge_point_s);
    if (const Json * ca = s.child("collab_area")) {
      Section a(*ca, "scenario.collab_area");
      a.read("start", n.collab.s_start);
      a.read("end", n.collab.s_end);
      a.finish();
    }
    s.read("spawn_jitter", c.scenario.spawn_jitter);
    s.read("speed_jitter", c.scenario.speed_jitter);
    s.read("min_spawn_gap", c.scenario.min_spawn_gap);
    if (const Json * sp = s.child("spawns")) {
      if (!sp->is_array()) {
        throw Error(ErrorKind::kConfig, "scenario.spawns: expected an array");
      }
      c.scenario.spawns.clear();
      for (std::size_t i = 0; i < sp->size(); ++i) {
        Section e((*sp)[i], "scenario.spawns[" + std::to_string(i) + "]");
        scenario::SpawnSpec spec;
        e.read("lane", spec.lane);
        e.read("station", spec.station);
        e.read("speed", spec.speed);
        e.finish();
        c.scenario.spawns.push_back(spec);
      }
    }
    s.finish();
    n.validate();
    if (scenario::classify_merge_condition(n) != scenario::MergeCondition::kConflicting) {
      throw Error(
              ErrorKind::kConfig,
              "scenario: non-conflicting merge (main_lanes + ramp_lanes <= post_merge_lanes) is not simulated");
    }
  }
  if (const Json * v = top.child("vehicles")) {
    Section s(*v, "vehicles");
    s.read("wheelbase", c.vehicle.wheelbase);
    s.read("length", c.vehicle.length);
    s.read("width", c.vehicle.width);
    s.read("u_max", c.vehicle.u_max);
    s.read("a_max", c.vehicle.a_max);
    s.read("beta_max", c.vehicle.beta_max);
    s.read("omega_max", c.vehicle.omega_max);
    s.finish();
  }
  try {
    c.vehicle.validate();
  } catch (const Error & e) {
    throw Error(ErrorKind::kConfig, e.what());
  }
  if (const Json * p = top.child("policies")) {
    Section s(*p, "policies");
    if (const Json * d = s.child("default")) {
      c.policies.default_policy = detail::read_policy(*d, "policies.default");
    }
    if (const Json * o = s.child("overrides")) {
      if (!o->is_object()) {
        throw Error(ErrorKind::kConfig, "policies.overrides: expected an object keyed by agent id");
      }
      for (const auto & [k, v] : o->items()) {
        int id = -1;
        try {
          std::size_t used = 0;
          id = std::stoi(k, &used);
          if (used != k.size() || id < 0) {
            throw std::invalid_argument(k);
          }
        } catch (const std::exception &) {
          throw Error(ErrorKind::kConfig, "policies.overrides." + k + ": key must be an agent id");
        }
        c.policies.overrides[id] = detail::read_policy(v, "policies.overrides." + k);
      }
    }
    s.read("timeout_ms", c.policies.timeout_ms);
    if (const Json * b = s.child("baseline")) {
      Section bs(*b, "policies.baseline");
      auto & bp = c.policies.baseline;
      bs.read("gap_min", bp.gap_min);
      bs.read("ttc_threshold", bp.ttc_threshold);
      bs.read("follow_min_gap", bp.follow_min_gap);
      bs.read("follow_headway", bp.follow_headway);
      bs.read("follow_ttc", bp.follow_ttc);
      bs.read("cruise_speed", bp.cruise_speed);
      bs.read("speed_cap", bp.speed_cap);
      bs.read("merge_zone_length", bp.merge_zone_length);
      bs.read("min_change_speed", bp.min_change_speed);
      bs.read("merge_end_margin", bp.merge_end_margin);
      bs.read("stop_margin", bp.stop_margin);
      bs.finish();
    }
    s.finish();
    if (c.policies.timeout_ms <= 0) {
      throw Error(ErrorKind::kConfig, "policies.timeout_ms: must be positive");
    }
  }
  if (const Json * ch = top.child("channel")) {
    Section s(*ch, "channel");
    s.read("enabled", c.channel.enabled);
    s.read("delay", c.channel.delay);
    s.read("drop_probability", c.channel.drop_probability);
    s.read("main_road_window", c.channel.main_road_window);
    s.finish();
  }
  c.channel.validate();
  if (const Json * t = top.child("thresholds")) {
    Section s(*t, "thresholds");
    s.read("eps_col", c.thresholds.eps_col);
    s.read("eps_p", c.thresholds.eps_p);
    s.read("eps_e", c.thresholds.eps_e);
    s.read("eps_c", c.thresholds.eps_c);
    s.read("alpha", c.thresholds.alpha);
    s.finish();
  }
  c.thresholds.validate();
  if (const Json * w = top.child("weights")) {
    Section s(*w, "weights");
    auto & sw = c.weights.weights;
    s.read("k1", sw.k1);
    s.read("k2", sw.k2);
    s.read("k3", sw.k3);
    s.read("alpha_pen", sw.alpha_pen);
    s.read("beta_pen", sw.beta_pen);
    s.read("collision_penalty", c.weights.collision_penalty);
    s.read("ttc_threshold", c.weights.scores.ttc_threshold);
    s.read("speed_limit", c.weights.scores.speed_limit);
    s.read("sigma", c.weights.scores.sigma);
    if (const Json * cl = s.child("comfort")) {
      Section cs(*cl, "weights.comfort");
      auto & lim = c.weights.scores.comfort;
      cs.read("lon_accel", lim.lon_accel);
      cs.read("lat_accel", lim.lat_accel);
      cs.read("lon_jerk", lim.lon_jerk);
      cs.read("lat_jerk", lim.lat_jerk);
      cs.finish();
    }
    s.finish();
  }
  try {
    c.weights.weights.validate();
  } catch (const Error & e) {
    throw Error(ErrorKind::kConfig, e.what());
  }
  {
    const auto & lim = c.weights.scores.comfort;
    if (!(lim.lon_accel > 0 && lim.lat_accel > 0 && lim.lon_jerk > 0 && lim.lat_jerk > 0)) {
      throw Error(ErrorKind::kConfig, "weights.comfort: limits must be positive");
    }
    if (!(c.weights.scores.ttc_threshold > 0.0) || !(c.weights.scores.speed_limit > 0.0) ||
      c.weights.scores.sigma < 0.0 || c.weights.collision_penalty < 0.0)
    {
      throw Error(ErrorKind::kConfig, "weights: ttc_threshold and speed_limit must be positive, sigma and collision_penalty >= 0");
    }
  }
  if (const Json * r = top.child("run")) {
    Section s(*r, "run");
    s.read("seed", c.run.seed);
    s.read("horizon", c.run.horizon);
    s.read("dt", c.run.dt);
    s.read("plan_horizon", c.run.plan_horizon);
    s.read("maneuver_window", c.run.maneuver_window);
    s.read("sensing_radius", c.run.sensing_radius);
    s.read("noise_sigma", c.run.noise_sigma);
    s.read("history_cap", c.run.history_cap);
    s.read("centerline_samples", c.run.centerline_samples);
    s.read("merge_tolerance", c.run.merge_tolerance);
    s.read("gamma", c.run.gamma);
    s.finish();
  }
  if (c.run.horizon < 0) {
    throw Error(ErrorKind::kConfig, "run.horizon: must be >= 0");
  }
  if (c.run.history_cap < 0) {
    throw Error(ErrorKind::kConfig, "run.history_cap: must be >= 0");
  }
  if (c.run.centerline_samples < 2) {
    throw Error(ErrorKind::kConfig, "run.centerline_samples: must be >= 2");
  }
  if (!(c.run.plan_horizon >= c.run.dt)) {
    throw Error(ErrorKind::kConfig, "run.plan_horizon: must cover at least one step");
  }
  if (!(c.run.gamma >= 0.0 && c.run.gamma <= 1.0)) {
    throw Error(ErrorKind::kConfig, "run.gamma: must lie in [0, 1]");
  }
  c.sim_config().validate();
  top.finish();
  return c;
}

inline RunConfig parse_config_text(const std::string & text)
{
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error & e) {
    throw Error(ErrorKind::kConfig, std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline RunConfig load_config(const std::string & path)
{
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::kIo, "cannot open config file " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

namespace detail
{
inline Json policy_json(const PolicySpec & p)
{
  Json j;
  j["kind"] = p.kind;
  j["endpoint"] = p.endpoint;
  return j;
}
}  // namespace detail

/// Complete canonical form: every key, in a fixed order.
inline Json config_to_json(const RunConfig & c)
{
  Json j;
  const auto & n = c.scenario.network;
  Json sc;
  sc["main_lanes"] = n.main_lanes;
  sc["ramp_lanes"] = n.ramp_lanes;
  sc["post_merge_lanes"] = n.post_merge_lanes;
  sc["lane_width"] = n.lane_width;
  sc["road_length"] = n.road_length;
  sc["ramp_start"] = n.ramp_start_s;
  sc["merge_point"] = n.merge_point_s;
  sc["collab_area"] = Json{{"start", n.collab.s_start}, {"end", n.collab.s_end}};
  sc["spawn_jitter"] = c.scenario.spawn_jitter;
  sc["speed_jitter"] = c.scenario.speed_jitter;
  sc["min_spawn_gap"] = c.scenario.min_spawn_gap;
  Json spawns = Json::array();
  for (const auto & s : c.scenario.spawns) {
    spawns.push_back(Json{{"lane", s.lane}, {"station", s.station}, {"speed", s.speed}});
  }
  sc["spawns"] = spawns;
  j["scenario"] = sc;
  const auto & v = c.vehicle;
  j["vehicles"] = Json{{"wheelbase", v.wheelbase}, {"length", v.length}, {"width", v.width},
    {"u_max", v.u_max}, {"a_max", v.a_max}, {"beta_max", v.beta_max}, {"omega_max", v.omega_max}};
  Json pol;
  pol["default"] = detail::policy_json(c.policies.default_policy);
  Json ov = Json::object();
  for (const auto & [id, p] : c.policies.overrides) {
    ov[std::to_string(id)] = detail::policy_json(p);
  }
  pol["overrides"] = ov;
  pol["timeout_ms"] = c.policies.timeout_ms;
  const auto & bp = c.policies.baseline;
  pol["baseline"] = Json{{"gap_min", bp.gap_min}, {"ttc_threshold", bp.ttc_threshold},
    {"follow_min_gap", bp.follow_min_gap}, {"follow_headway", bp.follow_headway},
    {"follow_ttc", bp.follow_ttc}, {"cruise_speed", bp.cruise_speed}, {"speed_cap", bp.speed_cap},
    {"merge_zone_length", bp.merge_zone_length}, {"min_change_speed", bp.min_change_speed},
    {"merge_end_margin", bp.merge_end_margin}, {"stop_margin", bp.stop_margin}};
  j["policies"] = pol;
  j["channel"] = Json{{"enabled", c.channel.enabled}, {"delay", c.channel.delay},
    {"drop_probability", c.channel.drop_probability}, {"main_road_window", c.channel.main_road_window}};
  const auto & t = c.thresholds;
  j["thresholds"] = Json{{"eps_col", t.eps_col}, {"eps_p", t.eps_p}, {"eps_e", t.eps_e},
    {"eps_c", t.eps_c}, {"alpha", t.alpha}};
  const auto & w = c.weights;
  const auto & lim = w.scores.comfort;
  j["weights"] = Json{{"k1", w.weights.k1}, {"k2", w.weights.k2}, {"k3", w.weights.k3},
    {"alpha_pen", w.weights.alpha_pen}, {"beta_pen", w.weights.beta_pen},
    {"collision_penalty", w.collision_penalty}, {"ttc_threshold", w.scores.ttc_threshold},
    {"speed_limit", w.scores.speed_limit}, {"sigma", w.scores.sigma},
    {"comfort", Json{{"lon_accel", lim.lon_accel}, {"lat_accel", lim.lat_accel},
      {"lon_jerk", lim.lon_jerk}, {"lat_jerk", lim.lat_jerk}}}};
  const auto & r = c.run;
  j["run"] = Json{{"seed", r.seed}, {"horizon", r.horizon}, {"dt", r.dt},
    {"plan_horizon", r.plan_horizon}, {"maneuver_window", r.maneuver_window},
    {"sensing_radius", r.sensing_radius}, {"noise_sigma", r.noise_sigma},
    {"history_cap", r.history_cap}, {"centerline_samples", r.centerline_samples},
    {"merge_tolerance", r.merge_tolerance}, {"gamma", r.gamma}};
  return j;
}

inline std::string hex64(std::uint64_t h)
{
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string config_hash(const Json & canonical)
{
  return hex64(fnv1a64(canonical.dump()));
}

/// Points every external policy at `endpoint`.
inline void override_endpoint(RunConfig & c, const std::string & endpoint)
{
  (void)planning::make_transport(endpoint);
  if (c.policies.default_policy.kind == "external") {
    c.policies.default_policy.endpoint = endpoint;
  }
  for (auto & [id, p] : c.policies.overrides) {
    if (p.kind == "external") {
      p.endpoint = endpoint;
    }
  }
}

}  // namespace comerge::harness

#endif  // COMERGE__HARNESS__CONFIG_HPP_
