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


// Scripted episodes shared by the harness tests and the acceptance binary.

#ifndef COMERGE_TESTS__FIXTURES_HPP_
#define COMERGE_TESTS__FIXTURES_HPP_

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "comerge/comerge.hpp"

namespace comerge::fixtures
{

inline double smoothstep5(double s)
{
  return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

/// Ego-relative reply waypoints x(t), y(t) over 3 s at 0.1 s.
template<class Fx, class Fy>
std::string waypoint_line(Fx fx, Fy fy)
{
  std::vector<Point2> pts;
  for (int k = 0; k <= 30; ++k) {
    const double t = 0.1 * k;
    pts.push_back({fx(t), fy(t)});
  }
  return planning::tokenize_trajectory(pts).str();
}

inline long prompt_tick(const std::string & prompt)
{
  const auto ego = prompt.find("=== EGO ===");
  const auto at = prompt.find(" tick ", ego);
  return std::stol(prompt.substr(at + 6));
}

/// Scripted reasoner: drifts off the lane centre at tick 5 and accelerates
/// into the leader at tick 15, otherwise holds the lane.
inline std::string scripted_reply(const std::string & prompt)
{
  const long tick = prompt_tick(prompt);
  if (tick == 5) {
    return "IDLE\n" + waypoint_line(
      [](double t) {return 10.0 * t;}, [](double t) {return 1.5 * smoothstep5(t / 3.0);}) +
           "\ndrift toward the left edge\n";
  }
  if (tick == 15) {
    return "ACC\n" + waypoint_line(
      [](double t) {return 10.0 * t + 0.8 * t * t;}, [](double) {return 0.0;}) +
           "\nclose the gap\n";
  }
  return "IDLE\n";
}

/// Two main-road vehicles in lane 1; agent 0 follows the scripted reasoner.
inline harness::RunConfig reflection_config()
{
  harness::RunConfig cfg;
  cfg.scenario.spawns = {{1, 50.0, 10.0}, {1, 60.0, 10.0}};
  cfg.scenario.spawn_jitter = 0.0;
  cfg.scenario.speed_jitter = 0.0;
  cfg.policies.overrides[0] = {"external", "exec:scripted-reasoner"};
  cfg.run.horizon = 40;
  cfg.run.seed = 7;
  return cfg;
}

inline harness::EpisodeTrace run_reflection_episode()
{
  return harness::run_episode(reflection_config(), [](int, const harness::PolicySpec &) {
      return std::make_unique<planning::FunctionTransport>(scripted_reply);
    });
}

}  // namespace comerge::fixtures

#endif  // COMERGE_TESTS__FIXTURES_HPP_
