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

#ifndef COMERGE__HARNESS__DATASET_HPP_
#define COMERGE__HARNESS__DATASET_HPP_

#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "comerge/dynamics.hpp"
#include "comerge/error.hpp"
#include "comerge/geometry.hpp"
#include "comerge/metrics.hpp"
#include "comerge/obb.hpp"
#include "comerge/trajectory.hpp"
#include "comerge/transport.hpp"

namespace comerge::harness
{

inline constexpr int kPastFrames = 60;
inline constexpr int kFutureFrames = 40;
inline constexpr int kWindowFrames = kPastFrames + kFutureFrames;
inline constexpr double kFrameDt = 0.1;

struct TrackSample
{
  long vehicle{0};
  long frame{0};
  double x{0.0};
  double y{0.0};
  double vx{0.0};
  double vy{0.0};
};

struct TrajectoryPair
{
  long vehicle{0};
  long start_frame{0};
  std::vector<TrackSample> past;    // kPastFrames
  std::vector<TrackSample> future;  // kFutureFrames
};

struct TrajectoryDataset
{
  std::vector<TrackSample> records;  // sorted by (vehicle, frame)
  std::vector<TrajectoryPair> pairs;
  long skipped{0};  // contiguous segments shorter than one window
};

/// Windows every contiguous run of frames into past/future pairs.
inline TrajectoryDataset build_pairs(std::vector<TrackSample> records, int stride = kWindowFrames)
{
  if (stride < 1) {
    throw Error(ErrorKind::kInvalidArgument, "dataset: stride must be at least 1");
  }
  std::map<long, std::vector<TrackSample>> by_vehicle;
  for (const TrackSample & r : records) {
    auto & v = by_vehicle[r.vehicle];
    if (!v.empty() && r.frame <= v.back().frame) {
      throw Error(ErrorKind::kDataset,
        "dataset: frames not increasing for vehicle " + std::to_string(r.vehicle) + " at frame " +
        std::to_string(r.frame));
    }
    v.push_back(r);
  }
  TrajectoryDataset ds;
  for (auto & [id, track] : by_vehicle) {
    std::size_t begin = 0;
    while (begin < track.size()) {
      std::size_t end = begin + 1;
      while (end < track.size() && track[end].frame == track[end - 1].frame + 1) {
        ++end;
      }
      const std::size_t n = end - begin;
      if (n < static_cast<std::size_t>(kWindowFrames)) {
        ++ds.skipped;
      } else {
        for (std::size_t s = begin; s + kWindowFrames <= end; s += static_cast<std::size_t>(stride)) {
          TrajectoryPair p;
          p.vehicle = id;
          p.start_frame = track[s].frame;
          p.past.assign(track.begin() + static_cast<long>(s), track.begin() + static_cast<long>(s) + kPastFrames);
          p.future.assign(
            track.begin() + static_cast<long>(s) + kPastFrames,
            track.begin() + static_cast<long>(s) + kWindowFrames);
          ds.pairs.push_back(std::move(p));
        }
      }
      begin = end;
    }
    ds.records.insert(ds.records.end(), track.begin(), track.end());
  }
  return ds;
}

namespace detail
{
inline std::vector<std::string> split_csv(const std::string & line)
{
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) {
      cell.pop_back();
    }
    while (!cell.empty() && cell.front() == ' ') {
      cell.erase(cell.begin());
    }
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

inline double parse_number(const std::string & s, long line, const std::string & column)
{
  char * end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw Error(ErrorKind::kDataset,
      "dataset: line " + std::to_string(line) + ": bad value for " + column + ": '" + s + "'");
  }
  return v;
}
}  // namespace detail

/// CSV with a header naming at least vehicle_id, frame, x, y, vx, vy.
/// Extra columns are ignored.
inline TrajectoryDataset parse_dataset(std::istream & in, int stride = kWindowFrames)
{
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorKind::kDataset, "dataset: empty input");
  }
  const auto header = detail::split_csv(line);
  static const std::array<std::string, 6> kColumns = {"vehicle_id", "frame", "x", "y", "vx", "vy"};
  std::array<std::size_t, 6> idx{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    std::size_t k = 0;
    while (k < header.size() && header[k] != kColumns[c]) {
      ++k;
    }
    if (k == header.size()) {
      throw Error(ErrorKind::kDataset, "dataset: missing column " + kColumns[c]);
    }
    idx[c] = k;
  }
  std::vector<TrackSample> records;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") {
      continue;
    }
    const auto cells = detail::split_csv(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::kDataset, "dataset: line " + std::to_string(lineno) + ": expected " +
        std::to_string(header.size()) + " fields");
    }
    std::array<double, 6> v{};
    for (std::size_t c = 0; c < kColumns.size(); ++c) {
      v[c] = detail::parse_number(cells[idx[c]], lineno, kColumns[c]);
    }
    if (v[0] != std::floor(v[0]) || v[1] != std::floor(v[1])) {
      throw Error(ErrorKind::kDataset, "dataset: line " + std::to_string(lineno) + ": ids and frames must be integers");
    }
    records.push_back({static_cast<long>(v[0]), static_cast<long>(v[1]), v[2], v[3], v[4], v[5]});
  }
  return build_pairs(std::move(records), stride);
}

inline TrajectoryDataset ingest_dataset(const std::string & path, int stride = kWindowFrames)
{
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::kIo, "dataset: cannot open " + path);
  }
  return parse_dataset(in, stride);
}

// ---------------------------------------------------------------------------
// Predictors and open-loop evaluation

/// Maps a pair to kFutureFrames predicted positions. The future half is
/// visible only so the echo oracle can exist.
using Predictor = std::function<std::vector<Point2>(const TrajectoryPair &)>;

inline std::vector<Point2> echo_predict(const TrajectoryPair & p)
{
  std::vector<Point2> out;
  for (const TrackSample & s : p.future) {
    out.push_back({s.x, s.y});
  }
  return out;
}

/// Extrapolates the last observed velocity.
inline std::vector<Point2> const_vel_predict(const TrajectoryPair & p)
{
  const TrackSample & last = p.past.back();
  std::vector<Point2> out;
  for (int k = 1; k <= kFutureFrames; ++k) {
    const double t = k * kFrameDt;
    out.push_back({last.x + last.vx * t, last.y + last.vy * t});
  }
  return out;
}

/// Sends the past as ego-relative tokens and reads the future back in the
/// same form.
inline Predictor external_predictor(std::shared_ptr<planning::Transport> transport, std::chrono::milliseconds timeout)
{
  return [transport, timeout](const TrajectoryPair & p) {
      const Point2 origin{p.past.back().x, p.past.back().y};
      std::vector<Point2> past;
      for (const TrackSample & s : p.past) {
        past.push_back(Point2{s.x, s.y} - origin);
      }
      const std::string request = "=== TASK ===\npredict " + std::to_string(kFutureFrames) +
        " future positions at " + std::to_string(kFrameDt) + " s spacing\n=== PAST ===\n" +
        planning::tokenize_trajectory(past).str() + "\n";
      const std::string reply = transport->exchange(request, timeout);
      std::string body = reply;
      const auto marker = reply.find("Trajectory:");
      if (marker != std::string::npos) {
        body = reply.substr(marker + 11);
      }
      while (!body.empty() && (body.back() == '\n' || body.back() == ' ' || body.back() == '\r')) {
        body.pop_back();
      }
      while (!body.empty() && (body.front() == ' ' || body.front() == '\n')) {
        body.erase(body.begin());
      }
      std::vector<Point2> pts = planning::detokenize_points(body);
      for (Point2 & q : pts) {
        q = q + origin;
      }
      return pts;
    };
}

inline constexpr std::array<int, 3> kL2Horizons = {1, 2, 3};
inline constexpr std::array<int, 4> kRmseHorizons = {1, 2, 3, 4};

struct OpenLoopReport
{
  long pairs{0};
  std::array<double, 3> l2{};          // average over frames up to 1/2/3 s
  std::array<double, 3> collision{};   // percent of pairs with an overlap up to 1/2/3 s
  std::array<double, 4> rmse{};        // over frames up to 1/2/3/4 s
  double l2_avg{0.0};
  double collision_avg{0.0};
  double rmse_avg{0.0};
};

/// Scores a predictor on every pair. A collision is a positive-overlap box
/// of the prediction against any other vehicle's recorded box at that frame.
inline OpenLoopReport evaluate_open_loop(
  const TrajectoryDataset & ds, const Predictor & predict,
  const dynamics::VehicleParams & vehicle = dynamics::VehicleParams{})
{
  if (ds.pairs.empty()) {
    throw Error(ErrorKind::kDataset, "dataset: no evaluation pairs");
  }
  std::map<long, std::vector<const TrackSample *>> by_frame;
  for (const TrackSample & r : ds.records) {
    by_frame[r.frame].push_back(&r);
  }
  OpenLoopReport rep;
  rep.pairs = static_cast<long>(ds.pairs.size());
  std::vector<std::vector<Point2>> preds, truths;
  std::vector<std::array<bool, 3>> hit;
  for (const TrajectoryPair & p : ds.pairs) {
    std::vector<Point2> pred = predict(p);
    if (pred.size() != static_cast<std::size_t>(kFutureFrames)) {
      throw Error(ErrorKind::kShape, "predictor returned " + std::to_string(pred.size()) + " points, expected " +
        std::to_string(kFutureFrames));
    }
    std::vector<Point2> truth;
    std::array<bool, 3> h{false, false, false};
    Point2 prev{p.past.back().x, p.past.back().y};
    double heading = std::atan2(p.past.back().vy, p.past.back().vx);
    for (int k = 0; k < kFutureFrames; ++k) {
      const TrackSample & f = p.future[static_cast<std::size_t>(k)];
      truth.push_back({f.x, f.y});
      const Point2 step = pred[static_cast<std::size_t>(k)] - prev;
      if (norm(step) > 1e-9) {
        heading = std::atan2(step.y, step.x);
      }
      prev = pred[static_cast<std::size_t>(k)];
      const reflection::OrientedBox mine{pred[static_cast<std::size_t>(k)], heading, vehicle.length, vehicle.width};
      bool overlap = false;
      const auto it = by_frame.find(f.frame);
      if (it != by_frame.end()) {
        for (const TrackSample * o : it->second) {
          if (o->vehicle == p.vehicle) {
            continue;
          }
          const reflection::OrientedBox theirs{{o->x, o->y}, std::atan2(o->vy, o->vx), vehicle.length, vehicle.width};
          if (reflection::obb_iou(mine, theirs) > 0.0) {
            overlap = true;
            break;
          }
        }
      }
      for (std::size_t hz = 0; hz < kL2Horizons.size(); ++hz) {
        if (overlap && k < kL2Horizons[hz] * 10) {
          h[hz] = true;
        }
      }
    }
    preds.push_back(std::move(pred));
    truths.push_back(std::move(truth));
    hit.push_back(h);
  }
  auto slice = [](const std::vector<std::vector<Point2>> & v, int frames) {
      std::vector<std::vector<Point2>> out;
      for (const auto & s : v) {
        out.emplace_back(s.begin(), s.begin() + frames);
      }
      return out;
    };
  for (std::size_t hz = 0; hz < kL2Horizons.size(); ++hz) {
    const int frames = kL2Horizons[hz] * 10;
    rep.l2[hz] = metrics::l2_error(slice(preds, frames), slice(truths, frames));
    long n = 0;
    for (const auto & h : hit) {
      n += h[hz] ? 1 : 0;
    }
    rep.collision[hz] = 100.0 * static_cast<double>(n) / static_cast<double>(hit.size());
    rep.l2_avg += rep.l2[hz] / 3.0;
    rep.collision_avg += rep.collision[hz] / 3.0;
  }
  for (std::size_t hz = 0; hz < kRmseHorizons.size(); ++hz) {
    const int frames = kRmseHorizons[hz] * 10;
    std::vector<double> err;
    for (std::size_t j = 0; j < preds.size(); ++j) {
      for (int k = 0; k < frames; ++k) {
        err.push_back(distance(preds[j][static_cast<std::size_t>(k)], truths[j][static_cast<std::size_t>(k)]));
      }
    }
    const std::vector<double> zeros(err.size(), 0.0);
    rep.rmse[hz] = metrics::rmse(err, zeros);
    rep.rmse_avg += rep.rmse[hz] / 4.0;
  }
  return rep;
}

}  // namespace comerge::harness

#endif  // COMERGE__HARNESS__DATASET_HPP_
