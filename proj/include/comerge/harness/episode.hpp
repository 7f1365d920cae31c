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

#ifndef COMERGE__HARNESS__EPISODE_HPP_
#define COMERGE__HARNESS__EPISODE_HPP_

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "comerge/communication.hpp"
#include "comerge/harness/config.hpp"
#include "comerge/harness/trace.hpp"
#include "comerge/planning.hpp"
#include "comerge/reflection.hpp"
#include "comerge/scenario.hpp"
#include "comerge/simulation.hpp"
#include "comerge/transport.hpp"

namespace comerge::harness
{

class Policy
{
public:
  virtual ~Policy() = default;
  virtual planning::Decision decide(
    const Observation & obs, const std::vector<Message> & messages, const HistoryBuffer & history) = 0;
  virtual std::string name() const = 0;
  /// Blocking policies are queried concurrently within a tick.
  virtual bool blocking() const {return false;}
};

class BaselinePolicy : public Policy
{
public:
  BaselinePolicy(planning::PlanningContext ctx, planning::BaselineParams bp)
  : ctx_(std::move(ctx)), bp_(bp) {}

  planning::Decision decide(
    const Observation & obs, const std::vector<Message> & messages, const HistoryBuffer & history) override
  {
    return planning::baseline_decide(obs, messages, history, ctx_, bp_);
  }
  std::string name() const override {return "baseline";}

private:
  planning::PlanningContext ctx_;
  planning::BaselineParams bp_;
};

class ExternalPolicy : public Policy
{
public:
  ExternalPolicy(
    planning::PlanningContext ctx, planning::BaselineParams bp,
    std::unique_ptr<planning::Transport> transport, std::chrono::milliseconds timeout)
  : ctx_(std::move(ctx)), bp_(bp), transport_(std::move(transport)), timeout_(timeout) {}

  planning::Decision decide(
    const Observation & obs, const std::vector<Message> & messages, const HistoryBuffer & history) override
  {
    return planning::external_decide(obs, messages, history, ctx_, *transport_, timeout_, bp_);
  }
  std::string name() const override {return "external";}
  bool blocking() const override {return true;}

private:
  planning::PlanningContext ctx_;
  planning::BaselineParams bp_;
  std::unique_ptr<planning::Transport> transport_;
  std::chrono::milliseconds timeout_;
};

/// Creates the transport for an external agent; defaults to the configured endpoint.
using TransportFactory =
  std::function<std::unique_ptr<planning::Transport>(int agent, const PolicySpec & spec)>;

/// Builds the road network exactly as an episode of this config sees it.
inline scenario::RoadNetwork episode_network(const RunConfig & cfg)
{
  scenario::RoadNetwork net = cfg.scenario.network;
  net.build_centerlines();
  return net;
}

/// Simulation state of one tick rebuilt from its trace record.
inline simulation::SimState state_from_record(const TickRecord & r, const scenario::RoadNetwork & net)
{
  simulation::SimState s;
  s.tick = r.tick;
  s.time = r.time;
  s.condition = scenario::classify_merge_condition(net);
  for (const AgentRecord & a : r.agents) {
    simulation::Agent ag;
    ag.id = a.id;
    ag.state = a.state;
    ag.control = a.control;
    ag.lane = a.lane;
    ag.ramp_origin = a.ramp_origin;
    ag.maneuver = a.maneuver;
    ag.speeding = a.speeding;
    s.agents.push_back(ag);
  }
  return s;
}

namespace detail
{
inline std::string observation_digest(const std::vector<Observation> & obs)
{
  std::string bytes;
  auto put = [&bytes](auto v) {
      bytes.append(reinterpret_cast<const char *>(&v), sizeof(v));
    };
  for (const Observation & o : obs) {
    put(static_cast<std::int64_t>(o.agent_id));
    put(static_cast<std::int64_t>(o.tick));
    for (double v : {o.ego.x, o.ego.y, o.ego.alpha, o.ego.beta, o.speed, o.maneuver_remaining}) {
      put(v);
    }
    put(static_cast<std::int64_t>(o.lane));
    put(static_cast<std::int64_t>(o.changing_lane));
    put(static_cast<std::int64_t>(o.neighbors.size()));
    for (const NeighborInfo & x : o.neighbors) {
      put(static_cast<std::int64_t>(x.id));
      put(x.rel.x);
      put(x.rel.y);
      put(x.speed);
      put(static_cast<std::int64_t>(x.lane));
    }
  }
  return hex64(fnv1a64(bytes));
}

/// Held-control predictions of every alive agent, shared by all egos of a tick.
using Rollouts = std::map<int, std::vector<dynamics::VehicleState>>;

inline Rollouts rollouts(const simulation::SimState & sim, const RunConfig & cfg, std::size_t n)
{
  Rollouts out;
  for (const auto & a : sim.agents) {
    if (a.alive) {
      out[a.id] = reflection::rollout(a.state, a.control, cfg.vehicle, cfg.run.dt, n);
    }
  }
  return out;
}

inline std::vector<reflection::NeighborPrediction> neighbors_in_range(
  const simulation::SimState & sim, const simulation::Agent & ego, double radius, const Rollouts * paths)
{
  std::vector<reflection::NeighborPrediction> out;
  for (const auto & o : sim.agents) {
    if (!o.alive || o.id == ego.id) {
      continue;
    }
    if (distance(Point2{o.state.x, o.state.y}, Point2{ego.state.x, ego.state.y}) <= radius) {
      out.push_back({o.id, o.state, o.control, {}});
      if (paths) {
        out.back().path = paths->at(o.id);
      }
    }
  }
  return out;
}
}  // namespace detail

/// Failure checks for one agent's decision at one tick.
inline std::vector<reflection::FailureCase> tick_failures(
  const simulation::SimState & sim, int agent, MetaAction meta, const planning::Trajectory & traj,
  const simulation::StepScores & scores, const scenario::RoadNetwork & net, const RunConfig & cfg,
  const detail::Rollouts * paths = nullptr)
{
  const auto & ego = simulation::find_agent(sim, agent);
  reflection::TickContext ctx;
  ctx.agent = agent;
  ctx.tick = sim.tick;
  ctx.trajectory = traj;
  ctx.heading = ego.state.alpha;
  ctx.vehicle = cfg.vehicle;
  ctx.neighbors = detail::neighbors_in_range(sim, ego, cfg.run.sensing_radius, paths);
  ctx.route = simulation::intended_route(
    ego, meta, net, cfg.sim_config(), cfg.run.plan_horizon, cfg.run.centerline_samples);
  ctx.es = scores.es;
  ctx.cs = scores.cs;
  return reflection::detect_failures(ctx, cfg.thresholds);
}

/// Episode summary computed from the tick records alone.
inline EpisodeMetrics compute_metrics(
  const std::vector<TickRecord> & ticks, const RunConfig & cfg, const metrics::ScoreWeights & weights)
{
  EpisodeMetrics m;
  m.ticks = static_cast<long>(ticks.size());
  for (const auto & s : cfg.scenario.spawns) {
    if (cfg.scenario.network.is_ramp_lane(s.lane)) {
      ++m.ramp_vehicles;
    }
  }
  double cs = 0.0, es = 0.0, ss = 0.0;
  long n = 0;
  double ss_min = 1.0;
  std::map<int, std::vector<double>> rewards;
  for (const TickRecord & r : ticks) {
    for (const ScoreRecord & s : r.scores) {
      cs += s.scores.cs;
      es += s.scores.es;
      ss += s.scores.ss;
      ss_min = std::min(ss_min, s.scores.ss);
      ++n;
      if (s.scores.ttc < cfg.weights.scores.ttc_threshold) {
        ++m.ttc_below_threshold;
      }
      rewards[s.agent].push_back(s.reward);
    }
    for (const auto & e : r.events) {
      switch (e.kind) {
        case simulation::EventKind::kCollision: ++m.collisions; break;
        case simulation::EventKind::kSpeedViolation: ++m.speed_violations; break;
        case simulation::EventKind::kMergeCompleted: ++m.merges; break;
        case simulation::EventKind::kOffRoad: ++m.off_road; break;
      }
    }
    for (const Message & msg : r.messages) {
      const auto it = std::find_if(
        r.decisions.begin(), r.decisions.end(), [&](const DecisionRecord & d) {return d.agent == msg.sender;});
      if (it == r.decisions.end() || it->meta != msg.committed) {
        ++m.commitment_violations;
      }
    }
  }
  if (n > 0) {
    m.cs = cs / static_cast<double>(n);
    m.es = es / static_cast<double>(n);
    m.ss = ss / static_cast<double>(n);
  }
  m.ss_min = ss_min;
  metrics::ScoreWeights w = weights;
  w.lambda1 = m.collisions;
  w.lambda2 = m.speed_violations;
  m.ds = metrics::driving_score(m.cs, m.es, m.ss, w);
  if (m.ticks > 0) {
    const int c[1] = {m.collisions};
    m.collision_rate = metrics::collision_rate(c, static_cast<double>(m.ticks) * cfg.run.dt);
  }
  if (!rewards.empty()) {
    double total = 0.0;
    for (const auto & [id, r] : rewards) {
      total += simulation::discounted_return(r, cfg.run.gamma);
    }
    m.mean_return = total / static_cast<double>(rewards.size());
  }
  return m;
}

/// The observe, decide, communicate, execute, score and reflect loop for one
/// seeded episode. Deterministic for a fixed config (including the seed).
inline EpisodeTrace run_episode(const RunConfig & cfg, const TransportFactory & transports = {})
{
  const std::uint64_t seed = cfg.run.seed;
  const scenario::Scenario sc = scenario::build_scenario(cfg.scenario, cfg.vehicle, seed);
  const scenario::RoadNetwork & net = sc.network;
  const simulation::SimConfig simcfg = cfg.sim_config();
  const planning::PlanningContext ctx = cfg.planning_context(net);
  simulation::SimState sim = simulation::initial_state(sc);
  communication::ChannelConfig chcfg = cfg.channel;
  chcfg.seed = seed;
  communication::Channel channel(chcfg);
  NamedStream noise(seed, "noise");

  EpisodeTrace trace;
  trace.seed = seed;
  trace.config = config_to_json(cfg);
  trace.config_hash = config_hash(trace.config);

  std::map<int, std::unique_ptr<Policy>> policies;
  std::map<int, HistoryBuffer> histories;
  for (const auto & a : sim.agents) {
    const PolicySpec & spec = cfg.policies.for_agent(a.id);
    if (spec.kind == "external") {
      auto t = transports ? transports(a.id, spec) : planning::make_transport(spec.endpoint);
      policies[a.id] = std::make_unique<ExternalPolicy>(
        ctx, cfg.policies.baseline, std::move(t), std::chrono::milliseconds(cfg.policies.timeout_ms));
    } else {
      policies[a.id] = std::make_unique<BaselinePolicy>(ctx, cfg.policies.baseline);
    }
    histories.emplace(a.id, HistoryBuffer(static_cast<std::size_t>(cfg.run.history_cap)));
  }

  for (long t = 0; t < cfg.run.horizon; ++t) {
    const std::vector<int> alive = simulation::alive_ids(sim);
    if (alive.empty()) {
      break;
    }
    TickRecord rec;
    rec.tick = sim.tick;
    rec.time = sim.time;
    for (int id : alive) {
      const auto & a = simulation::find_agent(sim, id);
      rec.agents.push_back({a.id, a.state, a.control, a.lane, a.ramp_origin, a.maneuver, a.speeding});
    }

    std::map<int, std::vector<Message>> inbox;
    for (int id : alive) {
      inbox[id] = t > 0 ? channel.collect(id, t - 1) : std::vector<Message>{};
      rec.deliveries.push_back({id, inbox[id]});
    }
    std::vector<Observation> observations;
    for (int id : alive) {
      observations.push_back(simulation::observe(sim, id, net, simcfg, &noise));
    }
    rec.obs_digest = detail::observation_digest(observations);

    std::vector<planning::Decision> decisions(alive.size());
    std::vector<std::future<planning::Decision>> pending(alive.size());
    for (std::size_t i = 0; i < alive.size(); ++i) {
      Policy * p = policies.at(alive[i]).get();
      if (p->blocking()) {
        pending[i] = std::async(
          std::launch::async, [p, &observations, &inbox, &histories, &alive, i]() {
            return p->decide(observations[i], inbox.at(alive[i]), histories.at(alive[i]));
          });
      }
    }
    for (std::size_t i = 0; i < alive.size(); ++i) {
      Policy * p = policies.at(alive[i]).get();
      decisions[i] = p->blocking() ? pending[i].get() :
        p->decide(observations[i], inbox.at(alive[i]), histories.at(alive[i]));
    }

    std::map<int, simulation::Command> commands;
    for (std::size_t i = 0; i < alive.size(); ++i) {
      const int id = alive[i];
      const auto & agent = simulation::find_agent(sim, id);
      std::vector<int> recipients;
      for (int other : alive) {
        if (other != id) {
          recipients.push_back(other);
        }
      }
      decisions[i].message = communication::broadcast(
        observations[i], agent.ramp_origin, !net.is_ramp_lane(agent.lane), decisions[i], net, channel,
        recipients, cfg.run.maneuver_window);
      if (decisions[i].message) {
        rec.messages.push_back(*decisions[i].message);
      }
      commands[id] = {decisions[i].meta_action, decisions[i].trajectory};
      rec.decisions.push_back({id, policies.at(id)->name(), decisions[i].meta_action,
        decisions[i].trajectory, decisions[i].rationale, decisions[i].fallback, decisions[i].diagnostic});
    }

    std::size_t samples = 0;
    for (const auto & d : decisions) {
      samples = std::max(samples, d.trajectory.points.size());
    }
    const detail::Rollouts paths = detail::rollouts(sim, cfg, samples);
    std::vector<simulation::StepScores> scores;
    for (std::size_t i = 0; i < alive.size(); ++i) {
      scores.push_back(simulation::step_scores(sim, alive[i], decisions[i].trajectory, net, simcfg, cfg.weights.scores));
      const auto f = tick_failures(sim, alive[i], decisions[i].meta_action, decisions[i].trajectory, scores.back(), net, cfg, &paths);
      rec.failures.insert(rec.failures.end(), f.begin(), f.end());
    }

    simulation::StepResult step = simulation::advance(sim, commands, net, simcfg);
    std::set<int> collided;
    for (const auto & e : step.events) {
      if (e.kind == simulation::EventKind::kCollision) {
        collided.insert(e.agents.begin(), e.agents.end());
      }
    }
    for (std::size_t i = 0; i < alive.size(); ++i) {
      const double r = simulation::reward(
        scores[i], collided.count(alive[i]) > 0, cfg.weights.weights, cfg.weights.collision_penalty);
      rec.scores.push_back({alive[i], scores[i], r});
      histories.at(alive[i]).push(observations[i], decisions[i].meta_action);
    }
    rec.events = std::move(step.events);
    sim = std::move(step.state);
    trace.ticks.push_back(std::move(rec));
  }

  for (const auto & a : sim.agents) {
    trace.outcomes[a.id] = a.alive ? simulation::Outcome::kHorizonEnd : a.outcome;
  }
  trace.channel = channel.stats();
  trace.metrics = compute_metrics(trace.ticks, cfg, cfg.weights.weights);
  return trace;
}

// ---------------------------------------------------------------------------
// Replay

struct ReplayReport
{
  long ticks{0};
  long scores_checked{0};
  long mismatches{0};
  long first_mismatch_tick{-1};
  EpisodeMetrics metrics;  // recomputed
  bool metrics_match{false};
  bool canonical{true};    // false when replayed with weights other than the recorded ones
};

/// Recomputes every per-tick score and reward from the stored states and
/// decisions, and the episode metrics from those records.
inline ReplayReport replay(const EpisodeTrace & trace, std::optional<metrics::ScoreWeights> weights = std::nullopt)
{
  if (config_hash(trace.config) != trace.config_hash) {
    throw TraceError(TraceError::kNoTick, "trace: config hash mismatch");
  }
  RunConfig cfg;
  try {
    cfg = parse_config(trace.config);
  } catch (const Error & e) {
    throw TraceError(TraceError::kNoTick, std::string("trace: embedded config invalid: ") + e.what());
  }
  const scenario::RoadNetwork net = episode_network(cfg);
  const simulation::SimConfig simcfg = cfg.sim_config();
  ReplayReport rep;
  rep.ticks = static_cast<long>(trace.ticks.size());
  for (const TickRecord & r : trace.ticks) {
    const simulation::SimState sim = state_from_record(r, net);
    std::set<int> collided;
    for (const auto & e : r.events) {
      if (e.kind == simulation::EventKind::kCollision) {
        collided.insert(e.agents.begin(), e.agents.end());
      }
    }
    if (r.decisions.size() != r.scores.size()) {
      throw TraceError(r.tick, "trace: tick " + std::to_string(r.tick) + " has unequal decision and score counts");
    }
    for (std::size_t i = 0; i < r.decisions.size(); ++i) {
      const DecisionRecord & d = r.decisions[i];
      simulation::StepScores s;
      try {
        s = simulation::step_scores(sim, d.agent, d.trajectory, net, simcfg, cfg.weights.scores);
      } catch (const Error & e) {
        throw TraceError(r.tick, "trace: tick " + std::to_string(r.tick) + ": " + e.what());
      }
      const double rw = simulation::reward(s, collided.count(d.agent) > 0, cfg.weights.weights, cfg.weights.collision_penalty);
      ++rep.scores_checked;
      const ScoreRecord & stored = r.scores[i];
      if (stored.agent != d.agent || !(stored.scores == s) || stored.reward != rw) {
        ++rep.mismatches;
        if (rep.first_mismatch_tick < 0) {
          rep.first_mismatch_tick = r.tick;
        }
      }
    }
  }
  const EpisodeMetrics recorded = compute_metrics(trace.ticks, cfg, cfg.weights.weights);
  rep.metrics_match = recorded == trace.metrics;
  if (weights) {
    weights->validate();
    const auto & w0 = cfg.weights.weights;
    rep.canonical = weights->k1 == w0.k1 && weights->k2 == w0.k2 && weights->k3 == w0.k3 &&
      weights->alpha_pen == w0.alpha_pen && weights->beta_pen == w0.beta_pen;
    rep.metrics = compute_metrics(trace.ticks, cfg, *weights);
  } else {
    rep.metrics = recorded;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Reflection over a trace

inline Json record_json(const reflection::ReflectionRecord & r)
{
  return Json{{"prompt", r.prompt}, {"target_text", r.target_text},
    {"target_trajectory", planning::tokenize_trajectory(r.target_trajectory).str()},
    {"failure_kind", std::string(reflection::to_string(r.failure_kind))}, {"episode", r.episode},
    {"tick", r.tick}};
}

/// One record per failure in the trace, in tick order. Observations are
/// rebuilt noise-free from the stored states.
inline std::vector<reflection::ReflectionRecord> reflect_trace(const EpisodeTrace & trace, long episode = 0)
{
  if (config_hash(trace.config) != trace.config_hash) {
    throw TraceError(TraceError::kNoTick, "trace: config hash mismatch");
  }
  const RunConfig cfg = parse_config(trace.config);
  const scenario::RoadNetwork net = episode_network(cfg);
  const simulation::SimConfig simcfg = cfg.sim_config();
  const planning::PlanningContext ctx = cfg.planning_context(net);
  std::map<int, HistoryBuffer> histories;
  std::vector<reflection::ReflectionRecord> out;
  for (const TickRecord & r : trace.ticks) {
    const simulation::SimState sim = state_from_record(r, net);
    std::map<int, Observation> obs;
    for (const AgentRecord & a : r.agents) {
      obs[a.id] = simulation::observe(sim, a.id, net, simcfg, nullptr);
      histories.try_emplace(a.id, HistoryBuffer(static_cast<std::size_t>(cfg.run.history_cap)));
    }
    for (const reflection::FailureCase & f : r.failures) {
      const auto d = std::find_if(
        r.decisions.begin(), r.decisions.end(), [&](const DecisionRecord & x) {return x.agent == f.agent;});
      if (d == r.decisions.end() || !obs.count(f.agent)) {
        throw TraceError(r.tick, "trace: failure for agent " + std::to_string(f.agent) + " without a decision");
      }
      reflection::ReflectionInput in;
      in.episode = episode;
      in.observation = obs.at(f.agent);
      for (const DeliveryRecord & del : r.deliveries) {
        if (del.agent == f.agent) {
          in.messages = del.messages;
        }
      }
      in.history = histories.at(f.agent);
      in.decision.meta_action = d->meta;
      in.decision.trajectory = d->trajectory;
      in.decision.rationale = d->rationale;
      in.context = ctx;
      in.baseline = cfg.policies.baseline;
      out.push_back(reflection::emit_reflection_record(f, in));
    }
    for (const DecisionRecord & d : r.decisions) {
      histories.at(d.agent).push(obs.at(d.agent), d.meta);
    }
  }
  return out;
}

}  // namespace comerge::harness

#endif  // COMERGE__HARNESS__EPISODE_HPP_
