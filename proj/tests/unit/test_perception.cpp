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


#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "comerge/error.hpp"
#include "comerge/perception.hpp"

namespace pc = comerge::perception;
using comerge::ErrorKind;

namespace
{

// Direct triple loop over softmax(Q F^T / sqrt(D)) F.
Eigen::MatrixXd naive_align(const Eigen::MatrixXd & q, const Eigen::MatrixXd & f)
{
  const long M = q.rows();
  const long N = f.rows();
  const long D = q.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(M, D);
  for (long i = 0; i < M; ++i) {
    std::vector<double> s(static_cast<std::size_t>(N));
    double mx = -std::numeric_limits<double>::infinity();
    for (long j = 0; j < N; ++j) {
      double acc = 0.0;
      for (long k = 0; k < D; ++k) {
        acc += q(i, k) * f(j, k);
      }
      s[static_cast<std::size_t>(j)] = acc / std::sqrt(static_cast<double>(D));
      mx = std::max(mx, s[static_cast<std::size_t>(j)]);
    }
    double z = 0.0;
    for (auto & v : s) {
      v = std::exp(v - mx);
      z += v;
    }
    for (long j = 0; j < N; ++j) {
      for (long k = 0; k < D; ++k) {
        out(i, k) += s[static_cast<std::size_t>(j)] / z * f(j, k);
      }
    }
  }
  return out;
}

comerge::Observation fixture_observation()
{
  comerge::scenario::RoadNetwork net;
  comerge::Observation o;
  o.agent_id = 10;
  o.tick = 42;
  o.time = 4.2;
  o.ego = {236.4, net.lane_center_y(3), 0.0, 0.0};
  o.speed = 9.3;
  o.lane = 3;
  o.lane_count = 4;
  o.main_lanes = 3;
  o.post_merge_lanes = 3;
  o.on_ramp = true;
  o.distance_to_merge = net.merge_point_s - o.ego.x;
  auto add = [&](int id, int lane, double x, double speed) {
      comerge::NeighborInfo n;
      n.id = id;
      n.rel = {x - o.ego.x, net.lane_center_y(lane) - o.ego.y};
      n.speed = speed;
      n.lane = lane;
      n.distance = comerge::norm(n.rel);
      o.neighbors.push_back(n);
    };
  add(8, 2, 241.0, 10.1);
  add(7, 2, 221.5, 10.4);
  add(11, 3, 262.0, 8.0);
  add(2, 2, 305.0, 10.0);
  std::sort(o.neighbors.begin(), o.neighbors.end(), [](const auto & a, const auto & b) {
      return a.distance < b.distance;
    });
  return o;
}

}  // namespace

TEST(Patchify, Examples)
{
  const auto a = pc::patchify(224, 224, 3, 16);
  EXPECT_EQ(a.count, 196);
  EXPECT_EQ(a.patch_dim, 768);
  const auto b = pc::patchify(2, 2, 1, 1);
  EXPECT_EQ(b.count, 4);
  EXPECT_EQ(b.patch_dim, 1);
  try {
    pc::patchify(10, 10, 3, 3);
    FAIL() << "expected shape error";
  } catch (const comerge::Error & e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

TEST(CrossAttention, ZeroQueryGivesMean)
{
  Eigen::MatrixXd f(5, 4);
  f.setRandom();
  const auto out = pc::cross_attention_align({Eigen::MatrixXd::Zero(3, 4)}, {f});
  const Eigen::RowVectorXd mean = f.colwise().mean();
  for (long i = 0; i < 3; ++i) {
    EXPECT_LT((out.values.row(i) - mean).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(CrossAttention, SingleRow)
{
  Eigen::MatrixXd f(1, 6);
  f.setRandom();
  Eigen::MatrixXd q(4, 6);
  q.setRandom();
  const auto out = pc::cross_attention_align({q * 30.0}, {f});
  for (long i = 0; i < 4; ++i) {
    EXPECT_EQ(out.values.row(i), f.row(0));
  }
}

TEST(CrossAttention, MatchesNaive)
{
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<int> dim(1, 8);
  std::normal_distribution<double> v(0.0, 2.0);
  for (int t = 0; t < 100; ++t) {
    const int M = dim(gen);
    const int N = dim(gen);
    const int D = dim(gen);
    Eigen::MatrixXd q(M, D);
    Eigen::MatrixXd f(N, D);
    for (long i = 0; i < q.size(); ++i) {
      q.data()[i] = v(gen);
    }
    for (long i = 0; i < f.size(); ++i) {
      f.data()[i] = v(gen);
    }
    const auto out = pc::cross_attention_align({q}, {f});
    EXPECT_LT((out.values - naive_align(q, f)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(CrossAttention, RowsAreConvexCombinations)
{
  Eigen::MatrixXd q(6, 3);
  Eigen::MatrixXd f(7, 3);
  q.setRandom();
  f.setRandom();
  q *= 5.0;
  const auto w = pc::attention_weights({q}, {f});
  for (long i = 0; i < w.rows(); ++i) {
    EXPECT_NEAR(w.row(i).sum(), 1.0, 1e-9);
    EXPECT_GE(w.row(i).minCoeff(), 0.0);
  }
  const auto out = pc::cross_attention_align({q}, {f});
  for (long i = 0; i < out.values.rows(); ++i) {
    for (long k = 0; k < 3; ++k) {
      EXPECT_GE(out.values(i, k), f.col(k).minCoeff() - 1e-12);
      EXPECT_LE(out.values(i, k), f.col(k).maxCoeff() + 1e-12);
    }
  }
}

TEST(CrossAttention, TinyScaleApproachesMean)
{
  Eigen::MatrixXd q(2, 4);
  Eigen::MatrixXd f(5, 4);
  q.setRandom();
  f.setRandom();
  const auto out = pc::cross_attention_align({q * 1e-9}, {f});
  const Eigen::RowVectorXd mean = f.colwise().mean();
  for (long i = 0; i < 2; ++i) {
    EXPECT_LT((out.values.row(i) - mean).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(CrossAttention, LargeLogitsStayFinite)
{
  Eigen::MatrixXd q = Eigen::MatrixXd::Constant(1, 2, 1e4);
  Eigen::MatrixXd f(2, 2);
  f << 1.0, 1.0, -1.0, -1.0;
  const auto out = pc::cross_attention_align({q}, {f});
  EXPECT_TRUE(out.values.allFinite());
  EXPECT_EQ(out.values(0, 0), 1.0);
}

TEST(CrossAttention, DimensionMismatch)
{
  try {
    pc::cross_attention_align({Eigen::MatrixXd::Zero(2, 3)}, {Eigen::MatrixXd::Zero(2, 4)});
    FAIL() << "expected shape error";
  } catch (const comerge::Error & e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

TEST(MatrixFile, ReadsHeaderAndRows)
{
  std::istringstream in("2 3\n1 2 3\n4.5 -1 0\n");
  const auto m = pc::read_matrix(in);
  EXPECT_EQ(m.rows(), 2);
  EXPECT_EQ(m(1, 0), 4.5);
  std::istringstream bad("2 2\n1 2\n3\n");
  EXPECT_THROW(pc::read_matrix(bad), comerge::Error);
}

TEST(CriticalObjects, OrderedByTimeToMerge)
{
  comerge::scenario::RoadNetwork net;
  comerge::Observation o;
  o.ego = {200.0, net.lane_center_y(3), 0, 0};
  o.neighbors = {
    {1, {0.0, 3.5}, 100.0 / 9.0, 2, 3.5},   // 9 s to the merge point
    {2, {70.0, 3.5}, 10.0, 2, 70.1},        // 3 s
  };
  EXPECT_EQ(pc::rank_critical_objects(o, net), (std::vector<int>{2, 1}));
}

TEST(CriticalObjects, PastMergeExcluded)
{
  comerge::scenario::RoadNetwork net;
  comerge::Observation o;
  o.ego = {280.0, net.lane_center_y(3), 0, 0};
  o.neighbors = {{4, {30.0, 3.5}, 10.0, 2, 30.2}, {5, {-10.0, 3.5}, 10.0, 2, 10.6}};
  EXPECT_EQ(pc::rank_critical_objects(o, net), std::vector<int>{5});
}

TEST(CriticalObjects, TieBreakById)
{
  comerge::scenario::RoadNetwork net;
  comerge::Observation o;
  o.ego = {200.0, net.lane_center_y(3), 0, 0};
  o.neighbors = {{9, {10.0, 3.5}, 10.0, 2, 10.6}, {3, {10.0, 3.5}, 10.0, 2, 10.6}};
  EXPECT_EQ(pc::rank_critical_objects(o, net), (std::vector<int>{3, 9}));
}

TEST(SceneDescription, EmptyNeighbors)
{
  comerge::scenario::RoadNetwork net;
  auto o = fixture_observation();
  o.neighbors.clear();
  const auto d = pc::build_scene_description(o, net, {});
  EXPECT_NE(d.text.find("[CRITICAL OBJECTS]\nnone\n"), std::string::npos);
  EXPECT_NE(d.text.find("3 main lanes"), std::string::npos);
  for (const char * s : {"[ROAD]", "[LANES]", "[EGO LANE]", "[EGO STATE]", "[CRITICAL OBJECTS]", "[MERGE ZONE]"}) {
    EXPECT_NE(d.text.find(s), std::string::npos) << s;
  }
}

TEST(SceneDescription, Golden)
{
  comerge::scenario::RoadNetwork net;
  const auto o = fixture_observation();
  const auto d = pc::build_scene_description(o, net, pc::rank_critical_objects(o, net));
  const std::string path = std::string(COMERGE_GOLDEN_DIR) + "/scene_description.txt";
  if (std::getenv("COMERGE_WRITE_GOLDEN") != nullptr) {
    std::ofstream(path, std::ios::binary) << d.text;
  }
  std::ifstream in(path, std::ios::binary);
  ASSERT_TRUE(in) << "missing golden file";
  std::stringstream golden;
  golden << in.rdbuf();
  EXPECT_EQ(d.text, golden.str());
  EXPECT_EQ(d, pc::build_scene_description(o, net, pc::rank_critical_objects(o, net)));
}

TEST(SceneDescription, DistinctObservationsDistinctTexts)
{
  comerge::scenario::RoadNetwork net;
  std::set<std::string> texts;
  int count = 0;
  for (int lane = 0; lane < 4; ++lane) {
    for (int k = 0; k <= 3; ++k) {
      auto o = fixture_observation();
      o.lane = lane;
      o.on_ramp = lane == 3;
      o.neighbors.resize(static_cast<std::size_t>(k));
      texts.insert(pc::build_scene_description(o, net, pc::rank_critical_objects(o, net)).text);
      ++count;
    }
  }
  EXPECT_EQ(texts.size(), static_cast<std::size_t>(count));
}
