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

#ifndef COMERGE__PERCEPTION_HPP_
#define COMERGE__PERCEPTION_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <string>
#include <tuple>
#include <vector>

#include "comerge/error.hpp"
#include "comerge/observation.hpp"
#include "comerge/scenario.hpp"

namespace comerge::perception
{

/// Patch embeddings (N x D), e.g. the output of an image encoder.
struct FeatureMatrix
{
  Eigen::MatrixXd values;
};

/// Query embeddings (M x D) of the alignment layer.
struct QueryMatrix
{
  Eigen::MatrixXd values;
};

struct PatchShape
{
  long count{0};      // N = H*W/P^2
  long patch_dim{0};  // P^2 * C
};

inline PatchShape patchify(long height, long width, long channels, long patch)
{
  if (height <= 0 || width <= 0 || channels <= 0 || patch <= 0) {
    throw Error(ErrorKind::kShape, "patchify: dimensions must be positive");
  }
  if (height % patch != 0 || width % patch != 0) {
    throw Error(ErrorKind::kShape, "patchify: image size not divisible by patch size");
  }
  return PatchShape{height * width / (patch * patch), patch * patch * channels};
}

namespace detail
{
inline void require_finite(const Eigen::MatrixXd & m, const char * what)
{
  if (m.rows() < 1 || m.cols() < 1) {
    throw Error(ErrorKind::kShape, std::string(what) + ": matrix must be non-empty");
  }
  if (!m.allFinite()) {
    throw Error(ErrorKind::kInvalidArgument, std::string(what) + ": non-finite entry");
  }
}
}  // namespace detail

/// Row-wise softmax(Q F^T / sqrt(D)), computed with row-max subtraction.
inline Eigen::MatrixXd attention_weights(const QueryMatrix & q, const FeatureMatrix & f)
{
  detail::require_finite(q.values, "queries");
  detail::require_finite(f.values, "features");
  if (q.values.cols() != f.values.cols()) {
    throw Error(ErrorKind::kShape, "cross attention: query and feature widths differ");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(f.values.cols()));
  Eigen::MatrixXd logits = (q.values * f.values.transpose()) * scale;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    logits.row(r) = (logits.row(r).array() - m).exp();
    logits.row(r) /= logits.row(r).sum();
  }
  return logits;
}

/// Aligned visual tokens: each output row is a convex combination of F's rows.
inline FeatureMatrix cross_attention_align(const QueryMatrix & q, const FeatureMatrix & f)
{
  return FeatureMatrix{attention_weights(q, f) * f.values};
}

/// Reads a plain-text matrix: first line "N D", then N rows of D numbers.
inline Eigen::MatrixXd read_matrix(std::istream & in)
{
  long n = 0;
  long d = 0;
  if (!(in >> n >> d) || n < 1 || d < 1) {
    throw Error(ErrorKind::kParse, "matrix: header must be two positive integers \"N D\"");
  }
  Eigen::MatrixXd m(n, d);
  for (long r = 0; r < n; ++r) {
    for (long c = 0; c < d; ++c) {
      if (!(in >> m(r, c))) {
        throw Error(
                ErrorKind::kParse,
                "matrix: missing or malformed value at row " + std::to_string(r) + ", column " +
                std::to_string(c));
      }
    }
  }
  std::string extra;
  if (in >> extra) {
    throw Error(ErrorKind::kParse, "matrix: trailing data after " + std::to_string(n) + " rows");
  }
  return m;
}

inline FeatureMatrix load_feature_matrix(const std::string & path)
{
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::kIo, "cannot open matrix file " + path);
  }
  return FeatureMatrix{read_matrix(in)};
}

/// Time for a neighbour to reach the merge point at its current speed.
inline double time_to_conflict(const Observation & obs, const NeighborInfo & n, const scenario::RoadNetwork & net)
{
  const double station = obs.ego.x + n.rel.x;
  const double remaining = net.merge_point_s - station;
  if (n.speed <= 0.0) {
    return remaining == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return remaining / n.speed;
}

/// Neighbours ordered by (time to the merge point, distance, id); vehicles
/// already past the merge point are dropped.
inline std::vector<int> rank_critical_objects(const Observation & obs, const scenario::RoadNetwork & net)
{
  std::vector<std::tuple<double, double, int>> keyed;
  for (const NeighborInfo & n : obs.neighbors) {
    if (obs.ego.x + n.rel.x > net.merge_point_s) {
      continue;
    }
    keyed.emplace_back(time_to_conflict(obs, n, net), n.distance, n.id);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<int> ids;
  ids.reserve(keyed.size());
  for (const auto & k : keyed) {
    ids.push_back(std::get<2>(k));
  }
  return ids;
}

struct SceneDescription
{
  std::string text;

  bool operator==(const SceneDescription &) const = default;
};

namespace detail
{
inline std::string fixed(double v, int digits = 2)
{
  const double tiny = 0.5 * std::pow(10.0, -digits);
  if (std::abs(v) < tiny) {
    v = 0.0;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string lane_phrase(int lane, const Observation & obs)
{
  const bool ramp = lane >= obs.main_lanes;
  return std::string(ramp ? "ramp lane " : "main lane ") + std::to_string(lane);
}
}  // namespace detail

/// Deterministic structured text summary of one observation.
inline SceneDescription build_scene_description(
  const Observation & obs, const scenario::RoadNetwork & net, const std::vector<int> & ranked)
{
  using detail::fixed;
  std::string t;
  t += "[ROAD]\n";
  t += "Multi-lane merge: " + std::to_string(net.main_lanes) + " main lanes and " +
    std::to_string(net.ramp_lanes) + " ramp lane" + (net.ramp_lanes == 1 ? "" : "s") +
    " join into " + std::to_string(net.post_merge_lanes) + " lanes at station " +
    fixed(net.merge_point_s) + " m (" +
    (scenario::classify_merge_condition(net) == scenario::MergeCondition::kConflicting ?
    "conflicting" : "non-conflicting") + " merge).\n";
  t += "[LANES]\n";
  t += "Lanes at ego position: " + std::to_string(obs.lane_count) + ".\n";
  t += "[EGO LANE]\n";
  t += "Ego vehicle " + std::to_string(obs.agent_id) + (obs.changing_lane ? " is changing into " : " is on ") +
    detail::lane_phrase(obs.lane, obs) + ".\n";
  t += "[EGO STATE]\n";
  t += "Speed " + fixed(obs.speed) + " m/s, position (" + fixed(obs.ego.x) + ", " + fixed(obs.ego.y) +
    "), heading " + fixed(obs.ego.alpha, 3) + " rad.\n";
  t += "[CRITICAL OBJECTS]\n";
  if (ranked.empty()) {
    t += "none\n";
  }
  for (int id : ranked) {
    const auto it = std::find_if(
      obs.neighbors.begin(), obs.neighbors.end(), [id](const NeighborInfo & n) {return n.id == id;});
    if (it == obs.neighbors.end()) {
      throw Error(ErrorKind::kInvalidArgument, "scene description: ranked id not in observation");
    }
    const double along = it->rel.x;
    const double across = it->rel.y;
    t += "- vehicle " + std::to_string(id) + ": " + detail::lane_phrase(it->lane, obs) + ", " +
      fixed(std::abs(along)) + " m " + (along >= 0.0 ? "ahead" : "behind") + ", " +
      fixed(std::abs(across)) + " m " + (across >= 0.0 ? "left" : "right") + ", speed " +
      fixed(it->speed) + " m/s, time to merge point " + fixed(time_to_conflict(obs, *it, net)) + " s\n";
  }
  t += "[MERGE ZONE]\n";
  if (obs.distance_to_merge >= 0.0) {
    t += "Distance to merge point: " + fixed(obs.distance_to_merge) + " m.\n";
  } else {
    t += "Merge point passed " + fixed(-obs.distance_to_merge) + " m ago.\n";
  }
  return SceneDescription{std::move(t)};
}

}  // namespace comerge::perception

#endif  // COMERGE__PERCEPTION_HPP_
