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

#ifndef COMERGE__COMMUNICATION_HPP_
#define COMERGE__COMMUNICATION_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "comerge/error.hpp"
#include "comerge/message.hpp"
#include "comerge/observation.hpp"
#include "comerge/planning.hpp"
#include "comerge/rng.hpp"
#include "comerge/scenario.hpp"

namespace comerge::communication
{

struct ChannelConfig
{
  bool enabled{true};           // false: collect always returns nothing
  long delay{0};                // ticks
  double drop_probability{0.0};
  std::uint64_t seed{0};        // seeds the "drop" stream
  double main_road_window{120.0};  // m upstream of the merge point where main-road vehicles talk

  void validate() const
  {
    if (delay < 0) {
      throw Error(ErrorKind::kConfig, "channel: delay must be >= 0");
    }
    if (!(drop_probability >= 0.0 && drop_probability <= 1.0)) {
      throw Error(ErrorKind::kConfig, "channel: drop_probability must lie in [0, 1]");
    }
    if (!(main_road_window >= 0.0)) {
      throw Error(ErrorKind::kConfig, "channel: main_road_window must be >= 0");
    }
  }
};

/// Self-revealing fields from the observation, self-committing fields from the decision.
inline Message encode_message(
  const planning::Decision & decision, const Observation & obs, double window)
{
  Message m;
  m.sender = obs.agent_id;
  m.send_tick = obs.tick;
  m.position = {obs.ego.x, obs.ego.y};
  m.lane = obs.lane;
  m.on_ramp = obs.on_ramp;
  m.speed = obs.speed;
  m.distance_to_merge = obs.distance_to_merge;
  m.committed = decision.meta_action;
  m.window = window;
  return m;
}

/// Whether a vehicle may talk this tick. Vehicles that started on the ramp
/// talk while their station lies in the collaborative area; main-road
/// vehicles talk within the configured window upstream of the merge point.
inline bool may_broadcast(
  double station, bool ramp_origin, bool merged, const scenario::RoadNetwork & net,
  const ChannelConfig & cfg)
{
  if (ramp_origin) {
    return !merged && station >= net.collab.s_start && station <= net.collab.s_end;
  }
  return station >= net.merge_point_s - cfg.main_road_window && station <= net.merge_point_s;
}

struct ChannelStats
{
  long sent{0};       // per recipient copy
  long delivered{0};
  long dropped{0};
  long in_flight{0};
};

struct Delivery
{
  Message message;
  int recipient{0};
  long deliver_tick{0};
};

/// Delayed, lossy one-to-all channel. Drop draws happen per recipient copy
/// at enqueue time from a dedicated stream.
class Channel
{
public:
  explicit Channel(ChannelConfig cfg = {})
  : cfg_(cfg), drop_(cfg.seed, "drop")
  {
    cfg_.validate();
  }

  const ChannelConfig & config() const {return cfg_;}
  const ChannelStats & stats() const {return stats_;}

  /// Enqueues one copy per recipient (ascending id, sender excluded).
  void enqueue(const Message & m, std::vector<int> recipients)
  {
    std::sort(recipients.begin(), recipients.end());
    for (int r : recipients) {
      if (r == m.sender) {
        continue;
      }
      ++stats_.sent;
      const double draw = drop_.uniform();
      if (draw < cfg_.drop_probability) {
        ++stats_.dropped;
        continue;
      }
      ++stats_.in_flight;
      pending_.push_back({m, r, m.send_tick + cfg_.delay});
    }
  }

  /// Messages for `agent` due at `tick`, sorted by sender id. Disabled
  /// channels drain the due messages but hand back nothing.
  std::vector<Message> collect(int agent, long tick)
  {
    std::vector<Message> out;
    auto it = std::stable_partition(
      pending_.begin(), pending_.end(), [&](const Delivery & d) {
        return !(d.recipient == agent && d.deliver_tick == tick);
      });
    for (auto d = it; d != pending_.end(); ++d) {
      out.push_back(d->message);
    }
    const long n = static_cast<long>(pending_.end() - it);
    pending_.erase(it, pending_.end());
    stats_.in_flight -= n;
    stats_.delivered += n;
    std::stable_sort(
      out.begin(), out.end(), [](const Message & a, const Message & b) {return a.sender < b.sender;});
    if (!cfg_.enabled) {
      out.clear();
    }
    return out;
  }

  const std::vector<Delivery> & pending() const {return pending_;}

private:
  ChannelConfig cfg_;
  NamedStream drop_;
  ChannelStats stats_;
  std::vector<Delivery> pending_;
};

/// Encodes and enqueues the decision's message when the sender may talk.
/// Returns the message that was sent, if any.
inline std::optional<Message> broadcast(
  const Observation & obs, bool ramp_origin, bool merged, const planning::Decision & decision,
  const scenario::RoadNetwork & net, Channel & channel, const std::vector<int> & recipients,
  double window)
{
  if (!may_broadcast(obs.ego.x, ramp_origin, merged, net, channel.config())) {
    return std::nullopt;
  }
  Message m = encode_message(decision, obs, window);
  channel.enqueue(m, recipients);
  return m;
}

}  // namespace comerge::communication

#endif  // COMERGE__COMMUNICATION_HPP_
