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

#ifndef COMERGE__HARNESS__TRACE_HPP_
#define COMERGE__HARNESS__TRACE_HPP_

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "comerge/communication.hpp"
#include "comerge/harness/config.hpp"
#include "comerge/message.hpp"
#include "comerge/reflection.hpp"
#include "comerge/simulation.hpp"

// Episode trace, JSON Lines: a header object, one object per tick, a footer.
// Every object carries a "kind" field. Infinite TTC values are written as null.
namespace comerge::harness
{

inline constexpr int kTraceVersion = 1;

struct AgentRecord
{
  int id{0};
  dynamics::VehicleState state;
  dynamics::ControlInput control;
  int lane{0};
  bool ramp_origin{false};
  std::optional<simulation::Maneuver> maneuver;
  bool speeding{false};

  bool operator==(const AgentRecord &) const = default;
};

struct DecisionRecord
{
  int agent{0};
  std::string policy;
  MetaAction meta{MetaAction::kIdle};
  planning::Trajectory trajectory;
  std::string rationale;
  bool fallback{false};
  std::string diagnostic;

  bool operator==(const DecisionRecord &) const = default;
};

struct DeliveryRecord
{
  int agent{0};
  std::vector<Message> messages;

  bool operator==(const DeliveryRecord &) const = default;
};

struct ScoreRecord
{
  int agent{0};
  simulation::StepScores scores;
  double reward{0.0};

  bool operator==(const ScoreRecord &) const = default;
};

struct TickRecord
{
  long tick{0};
  double time{0.0};
  std::vector<AgentRecord> agents;  // alive at the start of the tick
  std::string obs_digest;
  std::vector<DeliveryRecord> deliveries;
  std::vector<DecisionRecord> decisions;
  std::vector<Message> messages;  // sent this tick
  std::vector<simulation::Event> events;
  std::vector<reflection::FailureCase> failures;
  std::vector<ScoreRecord> scores;

  bool operator==(const TickRecord &) const = default;
};

struct EpisodeMetrics
{
  long ticks{0};
  double cs{1.0};
  double es{1.0};
  double ss{1.0};
  double ss_min{1.0};
  double ds{1.0};
  int collisions{0};
  int speed_violations{0};
  int merges{0};
  int off_road{0};
  int ramp_vehicles{0};
  int ttc_below_threshold{0};  // agent-ticks with TTC under t_t
  double collision_rate{0.0};  // per second
  double mean_return{0.0};
  int commitment_violations{0};

  bool operator==(const EpisodeMetrics &) const = default;
};

struct EpisodeTrace
{
  int version{kTraceVersion};
  std::uint64_t seed{0};
  std::string config_hash;
  Json config;
  std::vector<TickRecord> ticks;
  EpisodeMetrics metrics;
  std::map<int, simulation::Outcome> outcomes;
  communication::ChannelStats channel;
};

// ---------------------------------------------------------------------------
// JSON encoding

namespace detail
{
inline Json num_or_null(double v)
{
  return std::isfinite(v) ? Json(v) : Json(nullptr);
}

inline double num_or_inf(const Json & j)
{
  return j.is_null() ? metrics::kInfinity : j.get<double>();
}

inline Json trajectory_json(const planning::Trajectory & t)
{
  Json pts = Json::array();
  for (const Point2 & p : t.points) {
    pts.push_back(Json::array({p.x, p.y}));
  }
  return Json{{"dt", t.dt}, {"points", pts}};
}

inline planning::Trajectory trajectory_from(const Json & j)
{
  planning::Trajectory t;
  t.dt = j.at("dt").get<double>();
  for (const auto & p : j.at("points")) {
    t.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  return t;
}

inline MetaAction meta_from(const Json & j)
{
  const auto m = parse_meta_action(j.get<std::string>());
  if (!m) {
    throw Error(ErrorKind::kTrace, "unknown meta-action " + j.dump());
  }
  return *m;
}
}  // namespace detail

inline Json message_json(const Message & m)
{
  return Json{{"sender", m.sender}, {"send_tick", m.send_tick},
    {"position", Json::array({m.position.x, m.position.y})}, {"lane", m.lane},
    {"on_ramp", m.on_ramp}, {"speed", m.speed}, {"distance_to_merge", m.distance_to_merge},
    {"committed", std::string(to_token(m.committed))}, {"window", m.window}};
}

inline Message message_from(const Json & j)
{
  Message m;
  m.sender = j.at("sender").get<int>();
  m.send_tick = j.at("send_tick").get<long>();
  m.position = {j.at("position").at(0).get<double>(), j.at("position").at(1).get<double>()};
  m.lane = j.at("lane").get<int>();
  m.on_ramp = j.at("on_ramp").get<bool>();
  m.speed = j.at("speed").get<double>();
  m.distance_to_merge = j.at("distance_to_merge").get<double>();
  m.committed = detail::meta_from(j.at("committed"));
  m.window = j.at("window").get<double>();
  return m;
}

namespace detail
{
/// Append-only JSON text builder for the per-tick records, which dominate
/// trace size. Numbers use the shortest round-trip form; integral doubles keep
/// a ".0" so they read back as floating point.
class LineWriter
{
public:
  explicit LineWriter(std::string & out)
  : out_(out) {}

  LineWriter & open(char c) {sep(); out_ += c; first_ = true; return *this;}
  LineWriter & close(char c) {out_ += c; first_ = false; return *this;}
  LineWriter & key(std::string_view k)
  {
    sep();
    str_raw(k);
    out_ += ':';
    first_ = true;
    return *this;
  }
  LineWriter & num(double v)
  {
    sep();
    if (!std::isfinite(v)) {
      out_ += "null";
      return *this;
    }
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    const std::string_view text(buf, static_cast<std::size_t>(res.ptr - buf));
    out_ += text;
    if (text.find_first_of(".en") == std::string_view::npos) {
      out_ += ".0";
    }
    return *this;
  }
  LineWriter & integer(long long v) {sep(); out_ += std::to_string(v); return *this;}
  LineWriter & boolean(bool v) {sep(); out_ += v ? "true" : "false"; return *this;}
  LineWriter & null() {sep(); out_ += "null"; return *this;}
  LineWriter & str(std::string_view v) {sep(); str_raw(v); return *this;}

private:
  void sep()
  {
    if (!first_) {
      out_ += ',';
    }
    first_ = false;
  }
  void str_raw(std::string_view v)
  {
    out_ += '"';
    for (const char ch : v) {
      const auto c = static_cast<unsigned char>(ch);
      switch (c) {
        case '"': out_ += "\\\""; break;
        case '\\': out_ += "\\\\"; break;
        case '\b': out_ += "\\b"; break;
        case '\f': out_ += "\\f"; break;
        case '\n': out_ += "\\n"; break;
        case '\r': out_ += "\\r"; break;
        case '\t': out_ += "\\t"; break;
        default:
          if (c < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "\\u%04x", c);
            out_ += buf;
          } else {
            out_ += ch;
          }
      }
    }
    out_ += '"';
  }

  std::string & out_;
  bool first_{true};
};

inline void write_message(LineWriter & w, const Message & m)
{
  w.open('{');
  w.key("sender").integer(m.sender).key("send_tick").integer(m.send_tick);
  w.key("position").open('[').num(m.position.x).num(m.position.y).close(']');
  w.key("lane").integer(m.lane).key("on_ramp").boolean(m.on_ramp).key("speed").num(m.speed);
  w.key("distance_to_merge").num(m.distance_to_merge).key("committed").str(to_token(m.committed));
  w.key("window").num(m.window);
  w.close('}');
}
}  // namespace detail

/// One tick record as a single JSON line (without the newline).
inline std::string tick_line(const TickRecord & r)
{
  std::string out;
  out.reserve(4096 + r.decisions.size() * 1600);
  detail::LineWriter w(out);
  w.open('{').key("kind").str("tick").key("tick").integer(r.tick).key("time").num(r.time);
  w.key("agents").open('[');
  for (const auto & a : r.agents) {
    w.open('{').key("id").integer(a.id).key("x").num(a.state.x).key("y").num(a.state.y);
    w.key("alpha").num(a.state.alpha).key("beta").num(a.state.beta).key("u").num(a.control.u);
    w.key("omega").num(a.control.omega).key("lane").integer(a.lane);
    w.key("ramp_origin").boolean(a.ramp_origin).key("speeding").boolean(a.speeding);
    w.key("maneuver");
    if (a.maneuver) {
      const auto & m = *a.maneuver;
      w.open('{').key("from").integer(m.from).key("to").integer(m.to).key("elapsed").num(m.elapsed);
      w.key("window").num(m.window).key("start_s").num(m.start_s).key("length").num(m.length).close('}');
    } else {
      w.null();
    }
    w.close('}');
  }
  w.close(']');
  w.key("obs_digest").str(r.obs_digest);
  w.key("deliveries").open('[');
  for (const auto & d : r.deliveries) {
    w.open('{').key("agent").integer(d.agent).key("messages").open('[');
    for (const auto & m : d.messages) {
      detail::write_message(w, m);
    }
    w.close(']').close('}');
  }
  w.close(']');
  w.key("decisions").open('[');
  for (const auto & d : r.decisions) {
    w.open('{').key("agent").integer(d.agent).key("policy").str(d.policy).key("meta").str(to_token(d.meta));
    w.key("trajectory").open('{').key("dt").num(d.trajectory.dt).key("points").open('[');
    for (const Point2 & p : d.trajectory.points) {
      w.open('[').num(p.x).num(p.y).close(']');
    }
    w.close(']').close('}');
    w.key("rationale").str(d.rationale).key("fallback").boolean(d.fallback);
    w.key("diagnostic").str(d.diagnostic).close('}');
  }
  w.close(']');
  w.key("messages").open('[');
  for (const auto & m : r.messages) {
    detail::write_message(w, m);
  }
  w.close(']');
  w.key("events").open('[');
  for (const auto & e : r.events) {
    w.open('{').key("kind").str(simulation::to_string(e.kind)).key("tick").integer(e.tick).key("agents").open('[');
    for (int id : e.agents) {
      w.integer(id);
    }
    w.close(']').key("value").num(e.value).close('}');
  }
  w.close(']');
  w.key("failures").open('[');
  for (const auto & f : r.failures) {
    w.open('{').key("kind").str(reflection::to_string(f.kind)).key("tick").integer(f.tick);
    w.key("agent").integer(f.agent).key("measured").num(f.measured).key("threshold").num(f.threshold);
    w.key("other").integer(f.other).close('}');
  }
  w.close(']');
  w.key("scores").open('[');
  for (const auto & s : r.scores) {
    w.open('{').key("agent").integer(s.agent).key("cs").num(s.scores.cs).key("es").num(s.scores.es);
    w.key("ss").num(s.scores.ss).key("ttc").num(s.scores.ttc).key("reward").num(s.reward).close('}');
  }
  w.close(']').close('}');
  return out;
}

inline TickRecord tick_from(const Json & j)
{
  TickRecord r;
  if (j.at("kind").get<std::string>() != "tick") {
    throw Error(ErrorKind::kTrace, "expected a tick record");
  }
  r.tick = j.at("tick").get<long>();
  r.time = j.at("time").get<double>();
  for (const auto & aj : j.at("agents")) {
    AgentRecord a;
    a.id = aj.at("id").get<int>();
    a.state = {aj.at("x").get<double>(), aj.at("y").get<double>(), aj.at("alpha").get<double>(),
      aj.at("beta").get<double>()};
    a.control = {aj.at("u").get<double>(), aj.at("omega").get<double>()};
    a.lane = aj.at("lane").get<int>();
    a.ramp_origin = aj.at("ramp_origin").get<bool>();
    a.speeding = aj.at("speeding").get<bool>();
    const Json & m = aj.at("maneuver");
    if (!m.is_null()) {
      a.maneuver = simulation::Maneuver{m.at("from").get<int>(), m.at("to").get<int>(),
        m.at("elapsed").get<double>(), m.at("window").get<double>(), m.at("start_s").get<double>(),
        m.at("length").get<double>()};
    }
    r.agents.push_back(a);
  }
  r.obs_digest = j.at("obs_digest").get<std::string>();
  for (const auto & d : j.at("deliveries")) {
    DeliveryRecord dr;
    dr.agent = d.at("agent").get<int>();
    for (const auto & m : d.at("messages")) {
      dr.messages.push_back(message_from(m));
    }
    r.deliveries.push_back(dr);
  }
  for (const auto & d : j.at("decisions")) {
    DecisionRecord dr;
    dr.agent = d.at("agent").get<int>();
    dr.policy = d.at("policy").get<std::string>();
    dr.meta = detail::meta_from(d.at("meta"));
    dr.trajectory = detail::trajectory_from(d.at("trajectory"));
    dr.rationale = d.at("rationale").get<std::string>();
    dr.fallback = d.at("fallback").get<bool>();
    dr.diagnostic = d.at("diagnostic").get<std::string>();
    r.decisions.push_back(dr);
  }
  for (const auto & m : j.at("messages")) {
    r.messages.push_back(message_from(m));
  }
  for (const auto & e : j.at("events")) {
    const auto k = simulation::parse_event_kind(e.at("kind").get<std::string>());
    if (!k) {
      throw Error(ErrorKind::kTrace, "unknown event kind");
    }
    r.events.push_back({*k, e.at("tick").get<long>(), e.at("agents").get<std::vector<int>>(),
      e.at("value").get<double>()});
  }
  for (const auto & f : j.at("failures")) {
    const auto k = reflection::parse_failure_kind(f.at("kind").get<std::string>());
    if (!k) {
      throw Error(ErrorKind::kTrace, "unknown failure kind");
    }
    r.failures.push_back({*k, f.at("tick").get<long>(), f.at("agent").get<int>(),
      f.at("measured").get<double>(), f.at("threshold").get<double>(), f.at("other").get<int>()});
  }
  for (const auto & s : j.at("scores")) {
    ScoreRecord sr;
    sr.agent = s.at("agent").get<int>();
    sr.scores = {s.at("cs").get<double>(), s.at("es").get<double>(), s.at("ss").get<double>(),
      detail::num_or_inf(s.at("ttc"))};
    sr.reward = s.at("reward").get<double>();
    r.scores.push_back(sr);
  }
  return r;
}

inline Json metrics_json(const EpisodeMetrics & m)
{
  return Json{{"ticks", m.ticks}, {"cs", m.cs}, {"es", m.es}, {"ss", m.ss}, {"ss_min", m.ss_min},
    {"ds", m.ds}, {"collisions", m.collisions}, {"speed_violations", m.speed_violations},
    {"merges", m.merges}, {"off_road", m.off_road}, {"ramp_vehicles", m.ramp_vehicles},
    {"ttc_below_threshold", m.ttc_below_threshold}, {"collision_rate", m.collision_rate},
    {"mean_return", m.mean_return}, {"commitment_violations", m.commitment_violations}};
}

inline EpisodeMetrics metrics_from(const Json & j)
{
  EpisodeMetrics m;
  m.ticks = j.at("ticks").get<long>();
  m.cs = j.at("cs").get<double>();
  m.es = j.at("es").get<double>();
  m.ss = j.at("ss").get<double>();
  m.ss_min = j.at("ss_min").get<double>();
  m.ds = j.at("ds").get<double>();
  m.collisions = j.at("collisions").get<int>();
  m.speed_violations = j.at("speed_violations").get<int>();
  m.merges = j.at("merges").get<int>();
  m.off_road = j.at("off_road").get<int>();
  m.ramp_vehicles = j.at("ramp_vehicles").get<int>();
  m.ttc_below_threshold = j.at("ttc_below_threshold").get<int>();
  m.collision_rate = j.at("collision_rate").get<double>();
  m.mean_return = j.at("mean_return").get<double>();
  m.commitment_violations = j.at("commitment_violations").get<int>();
  return m;
}

inline Json header_json(const EpisodeTrace & t)
{
  return Json{{"kind", "header"}, {"version", t.version}, {"seed", t.seed},
    {"config_hash", t.config_hash}, {"config", t.config}};
}

inline Json footer_json(const EpisodeTrace & t)
{
  Json out = Json::object();
  for (const auto & [id, o] : t.outcomes) {
    out[std::to_string(id)] = std::string(simulation::to_string(o));
  }
  return Json{{"kind", "footer"}, {"metrics", metrics_json(t.metrics)}, {"outcomes", out},
    {"channel", Json{{"sent", t.channel.sent}, {"delivered", t.channel.delivered},
      {"dropped", t.channel.dropped}, {"in_flight", t.channel.in_flight}}}};
}

inline std::string trace_to_string(const EpisodeTrace & t)
{
  std::string s = header_json(t).dump() + "\n";
  for (const auto & r : t.ticks) {
    s += tick_line(r);
    s += '\n';
  }
  s += footer_json(t).dump() + "\n";
  return s;
}

inline void write_trace(const EpisodeTrace & t, const std::string & path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorKind::kIo, "cannot write trace " + path);
  }
  out << trace_to_string(t);
  if (!out) {
    throw Error(ErrorKind::kIo, "failed writing trace " + path);
  }
}

/// Parses a trace. Malformed tick records raise TraceError carrying the tick
/// number the record should have had.
inline EpisodeTrace parse_trace(std::istream & in)
{
  EpisodeTrace t;
  std::string line;
  if (!std::getline(in, line)) {
    throw TraceError(TraceError::kNoTick, "trace: empty file");
  }
  try {
    const Json h = Json::parse(line);
    if (h.at("kind").get<std::string>() != "header") {
      throw Error(ErrorKind::kTrace, "first record is not a header");
    }
    t.version = h.at("version").get<int>();
    t.seed = h.at("seed").get<std::uint64_t>();
    t.config_hash = h.at("config_hash").get<std::string>();
    t.config = h.at("config");
  } catch (const std::exception & e) {
    throw TraceError(TraceError::kNoTick, std::string("trace: bad header: ") + e.what());
  }
  if (t.version != kTraceVersion) {
    throw TraceError(TraceError::kNoTick, "trace: unsupported version " + std::to_string(t.version));
  }
  bool footer = false;
  long expected = 0;
  while (std::getline(in, line)) {
    if (footer) {
      throw TraceError(TraceError::kNoTick, "trace: data after the footer");
    }
    Json j;
    try {
      j = Json::parse(line);
    } catch (const std::exception & e) {
      throw TraceError(expected, "trace: tick " + std::to_string(expected) + " is not valid JSON");
    }
    const std::string kind = j.contains("kind") && j["kind"].is_string() ? j["kind"].get<std::string>() : "";
    if (kind == "footer") {
      try {
        t.metrics = metrics_from(j.at("metrics"));
        for (const auto & [k, v] : j.at("outcomes").items()) {
          const std::string o = v.get<std::string>();
          simulation::Outcome out = simulation::Outcome::kActive;
          for (auto c : {simulation::Outcome::kMergeCompleted, simulation::Outcome::kCollision,
              simulation::Outcome::kOffRoad, simulation::Outcome::kHorizonEnd})
          {
            if (simulation::to_string(c) == o) {
              out = c;
            }
          }
          t.outcomes[std::stoi(k)] = out;
        }
        const Json & ch = j.at("channel");
        t.channel = {ch.at("sent").get<long>(), ch.at("delivered").get<long>(),
          ch.at("dropped").get<long>(), ch.at("in_flight").get<long>()};
      } catch (const std::exception & e) {
        throw TraceError(TraceError::kNoTick, std::string("trace: bad footer: ") + e.what());
      }
      footer = true;
      continue;
    }
    TickRecord r;
    try {
      r = tick_from(j);
    } catch (const std::exception & e) {
      throw TraceError(expected, "trace: tick " + std::to_string(expected) + " is malformed: " + e.what());
    }
    if (r.tick != expected) {
      throw TraceError(expected, "trace: expected tick " + std::to_string(expected) + ", found " + std::to_string(r.tick));
    }
    t.ticks.push_back(std::move(r));
    ++expected;
  }
  if (!footer) {
    throw TraceError(expected, "trace: truncated, no footer after tick " + std::to_string(expected - 1));
  }
  return t;
}

inline EpisodeTrace read_trace(const std::string & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::kIo, "cannot open trace " + path);
  }
  return parse_trace(in);
}

}  // namespace comerge::harness

#endif  // COMERGE__HARNESS__TRACE_HPP_
