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

#ifndef COMERGE__OBSERVATION_HPP_
#define COMERGE__OBSERVATION_HPP_

#include <cstdint>
#include <deque>
#include <utility>
#include <vector>

#include "comerge/dynamics.hpp"
#include "comerge/geometry.hpp"
#include "comerge/meta_action.hpp"

namespace comerge
{

struct NeighborInfo
{
  int id{0};
  Point2 rel;          // neighbour rear axle minus ego rear axle, road frame
  double speed{0.0};
  int lane{0};         // logical lane (target lane while changing lanes)
  double distance{0.0};

  bool operator==(const NeighborInfo &) const = default;
};

/// One agent's partial view of the world at a tick.
struct Observation
{
  int agent_id{0};
  long tick{0};
  double time{0.0};
  dynamics::VehicleState ego;
  double speed{0.0};
  int lane{0};
  int lane_count{0};
  int main_lanes{0};
  int post_merge_lanes{0};
  bool on_ramp{false};
  bool changing_lane{false};
  double maneuver_remaining{0.0};  // s left in the active lane change
  double distance_to_merge{0.0};
  std::vector<NeighborInfo> neighbors;  // ascending distance, then id

  bool operator==(const Observation &) const = default;
};

/// Bounded chronological (observation, action) history of one agent.
class HistoryBuffer
{
public:
  explicit HistoryBuffer(std::size_t capacity = 10)
  : capacity_(capacity) {}

  void push(Observation obs, MetaAction action)
  {
    if (capacity_ == 0) {
      return;
    }
    if (entries_.size() == capacity_) {
      entries_.pop_front();
    }
    entries_.emplace_back(std::move(obs), action);
  }

  const std::deque<std::pair<Observation, MetaAction>> & entries() const {return entries_;}
  std::size_t size() const {return entries_.size();}
  std::size_t capacity() const {return capacity_;}
  bool empty() const {return entries_.empty();}

private:
  std::size_t capacity_;
  std::deque<std::pair<Observation, MetaAction>> entries_;
};

}  // namespace comerge

#endif  // COMERGE__OBSERVATION_HPP_
