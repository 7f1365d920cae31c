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

#include <cmath>
#include <vector>

#include "comerge/error.hpp"
#include "comerge/metrics.hpp"

namespace m = comerge::metrics;
using comerge::Point2;

TEST(Efficiency, FasterThanReferenceIsOne)
{
  EXPECT_EQ(m::efficiency_score(10.0, 8.0, 11.11, 0.0), 1.0);
}

TEST(Efficiency, RatioBelowReference)
{
  EXPECT_EQ(m::efficiency_score(4.0, 8.0, 11.11), 0.5);
  EXPECT_EQ(m::efficiency_score(0.0, 8.0, 11.11), 0.0);
  // the limit caps the reference speed
  EXPECT_DOUBLE_EQ(m::efficiency_score(5.0, 20.0, 10.0), 0.5);
}

TEST(Efficiency, SigmaRaisesReference)
{
  EXPECT_DOUBLE_EQ(m::efficiency_score(5.0, 8.0, 11.11, 2.0), 0.5);
}

TEST(Efficiency, RejectsNonPositiveReference)
{
  EXPECT_THROW(m::efficiency_score(1.0, 0.0, 11.11), comerge::Error);
  EXPECT_THROW(m::efficiency_score(-1.0, 5.0, 11.11), comerge::Error);
}

TEST(Comfort, WithinLimits)
{
  m::MotionSamples s{{1.0, -2.0}, {0.5}, {1.0}, {-1.5}};
  EXPECT_EQ(m::comfort_score(s, m::ComfortLimits{}), 1.0);
}

TEST(Comfort, MeanOfSubScores)
{
  // sub-scores 1, 1, 0.5, 0.25
  m::MotionSamples s{{1.0}, {1.0}, {4.0}, {-8.0}};
  EXPECT_DOUBLE_EQ(m::comfort_score(s, m::ComfortLimits{}), (1.0 + 1.0 + 0.5 + 0.25) / 4.0);
}

TEST(Comfort, LongitudinalAccelTwiceLimit)
{
  m::MotionSamples s{{6.0}, {0.0}, {0.0}, {0.0}};
  EXPECT_DOUBLE_EQ(m::comfort_score(s, m::ComfortLimits{}), 0.875);
}

TEST(Comfort, EmptyThrows)
{
  EXPECT_THROW(m::comfort_score(m::MotionSamples{}, m::ComfortLimits{}), comerge::Error);
}

TEST(MotionSamples, ConstantAccelerationFiniteDifferences)
{
  const double dt = 0.1;
  std::vector<Point2> pts;
  for (int k = 0; k < 10; ++k) {
    const double t = k * dt;
    pts.push_back({0.5 * 1.5 * t * t, 2.0 * t});
  }
  const auto s = m::motion_samples(pts, dt);
  ASSERT_EQ(s.lon_accel.size(), 8u);
  ASSERT_EQ(s.lon_jerk.size(), 6u);
  for (double a : s.lon_accel) {
    EXPECT_NEAR(a, 1.5, 1e-9);
  }
  for (double a : s.lat_accel) {
    EXPECT_NEAR(a, 0.0, 1e-9);
  }
  for (double j : s.lon_jerk) {
    EXPECT_NEAR(j, 0.0, 1e-6);
  }
}

TEST(MotionSamples, CubicHasConstantJerk)
{
  const double dt = 0.1;
  std::vector<Point2> pts;
  for (int k = 0; k < 8; ++k) {
    const double t = k * dt;
    pts.push_back({t * t * t, 0.0});
  }
  for (double j : m::motion_samples(pts, dt).lon_jerk) {
    EXPECT_NEAR(j, 6.0, 1e-8);
  }
}

TEST(Ttc, Examples)
{
  EXPECT_EQ(m::ttc(50.0, 20.0, 10.0), 5.0);
  EXPECT_TRUE(std::isinf(m::ttc(50.0, 10.0, 10.0)));
  EXPECT_TRUE(std::isinf(m::ttc(50.0, 5.0, 10.0)));
  EXPECT_EQ(m::ttc(0.0, 12.0, 10.0), 0.0);
  EXPECT_THROW(m::ttc(-1.0, 12.0, 10.0), comerge::Error);
}

TEST(Ttc, Homogeneous)
{
  for (double k : {0.5, 2.0, 7.0}) {
    EXPECT_NEAR(m::ttc(30.0 * k, 10.0 + 3.0 * k, 10.0), m::ttc(30.0, 13.0, 10.0), 1e-12);
  }
}

TEST(Safety, Examples)
{
  EXPECT_EQ(m::safety_score(10.0, 5.0), 1.0);
  EXPECT_EQ(m::safety_score(2.5, 5.0), 0.5);
  EXPECT_EQ(m::safety_score(m::kInfinity, 5.0), 1.0);
  EXPECT_THROW(m::safety_score(1.0, 0.0), comerge::Error);
}

TEST(DrivingScore, Examples)
{
  m::ScoreWeights w;
  EXPECT_NEAR(m::driving_score(0.8, 0.4, 1.0, w), 0.8, 1e-12);
  w.lambda1 = 1;
  EXPECT_NEAR(m::driving_score(0.8, 0.4, 1.0, w), 0.48, 1e-12);
  EXPECT_EQ(m::driving_score(0.0, 0.0, 0.0, w), 0.0);
}

TEST(DrivingScore, MonotoneInPenalties)
{
  m::ScoreWeights w;
  double prev = m::driving_score(0.9, 0.9, 0.9, w);
  for (int l = 1; l < 5; ++l) {
    w.lambda2 = l;
    const double ds = m::driving_score(0.9, 0.9, 0.9, w);
    EXPECT_LT(ds, prev);
    prev = ds;
  }
}

TEST(ScoreWeights, Validate)
{
  m::ScoreWeights w;
  EXPECT_NO_THROW(w.validate());
  w.k1 = 0.5;
  EXPECT_THROW(w.validate(), comerge::Error);
  w = m::ScoreWeights{};
  w.alpha_pen = 1.0;
  EXPECT_THROW(w.validate(), comerge::Error);
}

TEST(L2, Examples)
{
  EXPECT_EQ(m::l2_error({{{1, 2}}}, {{{1, 2}}}), 0.0);
  EXPECT_EQ(m::l2_error({{{3, 4}}}, {{{0, 0}}}), 5.0);
  EXPECT_EQ(m::l2_error({{{3, 4}}, {{1, 1}}}, {{{0, 0}}, {{1, 1}}}), 2.5);
}

TEST(L2, ShapeMismatch)
{
  EXPECT_THROW(m::l2_error({{{0, 0}}}, {{{0, 0}, {1, 1}}}), comerge::Error);
  EXPECT_THROW(m::l2_error({}, {}), comerge::Error);
}

TEST(CollisionRate, Examples)
{
  const std::vector<int> none{0, 0};
  const std::vector<int> one{2};
  const std::vector<int> two{2, 0};
  EXPECT_EQ(m::collision_rate(none, 4.0), 0.0);
  EXPECT_EQ(m::collision_rate(one, 4.0), 0.5);
  EXPECT_EQ(m::collision_rate(two, 4.0), 0.25);
  EXPECT_THROW(m::collision_rate(one, 0.0), comerge::Error);
}

TEST(Rmse, Examples)
{
  const std::vector<double> a{1, 2, 3}, b{2, 3, 4}, z{0, 2}, zz{0, 0};
  EXPECT_EQ(m::rmse(a, a), 0.0);
  EXPECT_EQ(m::rmse(a, b), 1.0);
  EXPECT_DOUBLE_EQ(m::rmse(z, zz), std::sqrt(2.0));
  EXPECT_THROW(m::rmse(std::vector<double>{}, std::vector<double>{}), comerge::Error);
}
