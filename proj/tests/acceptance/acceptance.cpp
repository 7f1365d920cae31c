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


// One line per acceptance criterion: PASS or FAIL, the measured quantity and
// the wall time against its budget. Exit status is nonzero if any line fails.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "comerge/comerge.hpp"
#include "../support/fixtures.hpp"

using namespace comerge;

namespace
{

struct Outcome
{
  bool pass{false};
  std::string detail;
};

std::string num(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

int failures = 0;

void criterion(int n, const std::string & name, double budget_s, const std::function<Outcome()> & body)
{
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception & e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= budget_s) {
    o.pass = false;
    o.detail += "; over time budget";
  }
  failures += o.pass ? 0 : 1;
  std::printf("%s %d %s: %s (%.3f s of %.0f s)\n", o.pass ? "PASS" : "FAIL", n, name.c_str(),
    o.detail.c_str(), secs, budget_s);
  std::fflush(stdout);
}

// ---------------------------------------------------------------------------

// Simulates 10 s of sinusoidal controls, differentiates the sampled rear-axle
// path and compares the recovered state and input with the true ones.
double flatness_error(double dt)
{
  const dynamics::VehicleParams p;
  auto u_of = [](double t) {return 6.0 + 2.0 * std::sin(0.7 * t);};
  auto w_of = [](double t) {return 0.3 * std::cos(0.9 * t);};
  const long n = std::lround(10.0 / dt);
  std::vector<dynamics::VehicleState> s{{0.0, 0.0, 0.0, 0.1}};
  for (long k = 0; k < n; ++k) {
    const double mid = (static_cast<double>(k) + 0.5) * dt;  // control held at its midpoint value
    s.push_back(dynamics::step(s.back(), {u_of(mid), w_of(mid)}, p, dt));
  }
  double err = 0.0;
  for (long k = 2; k + 2 <= n; ++k) {
    const auto x = [&](long i) {return s[static_cast<std::size_t>(k + i)].x;};
    const auto y = [&](long i) {return s[static_cast<std::size_t>(k + i)].y;};
    dynamics::FlatSample f;
    f.delta = {x(0), y(0)};
    f.d1 = {(x(1) - x(-1)) / (2 * dt), (y(1) - y(-1)) / (2 * dt)};
    f.d2 = {(x(1) - 2 * x(0) + x(-1)) / (dt * dt), (y(1) - 2 * y(0) + y(-1)) / (dt * dt)};
    f.d3 = {(x(2) - 2 * x(1) + 2 * x(-1) - x(-2)) / (2 * dt * dt * dt),
      (y(2) - 2 * y(1) + 2 * y(-1) - y(-2)) / (2 * dt * dt * dt)};
    const auto r = dynamics::flat_recover(f, p);
    const double t = static_cast<double>(k) * dt;
    const auto & st = s[static_cast<std::size_t>(k)];
    err = std::max({err, std::abs(dynamics::normalize_angle(r.alpha - st.alpha)), std::abs(r.beta - st.beta),
      std::abs(r.control.u - u_of(t)), std::abs(r.control.omega - w_of(t))});
  }
  return err;
}

Outcome flatness()
{
  const double e2 = flatness_error(0.01);
  const double e3 = flatness_error(0.001);
  return {e2 < 1e-2 && e3 < 1e-3, "max error " + num(e2) + " at dt=0.01, " + num(e3) + " at dt=0.001"};
}

struct TurnError
{
  double closure{0.0};    // distance from the start after the full turn
  double deviation{0.0};  // largest distance from the exact circle along the turn
};

// One turn of a constant-steering circle in `divisions` equal steps. The
// full-turn closure alone is a periodic Simpson sum and cancels to round-off,
// so order is read from the deviation along the turn.
TurnError turn_error(int divisions)
{
  dynamics::VehicleParams p;
  p.wheelbase = 2.5;
  const double beta = 0.2;
  const double radius = p.wheelbase / std::tan(beta);
  const double period = 2.0 * dynamics::kPi * radius;
  const double dt = period / divisions;
  dynamics::VehicleState s{0.0, 0.0, 0.0, beta};
  TurnError e;
  for (int k = 1; k <= divisions; ++k) {
    s = dynamics::step(s, {1.0, 0.0}, p, dt);
    const double a = static_cast<double>(k) * dt / radius;
    e.deviation = std::max(e.deviation, std::hypot(s.x - radius * std::sin(a), s.y - radius * (1.0 - std::cos(a))));
  }
  e.closure = std::hypot(s.x, s.y);
  return e;
}

Outcome rk4_order()
{
  const TurnError coarse = turn_error(40);
  const TurnError fine = turn_error(80);
  const double ratio = coarse.deviation / fine.deviation;
  return {ratio >= 12.0 && ratio <= 20.0,
    "turn error " + num(coarse.deviation) + " vs " + num(fine.deviation) + ", ratio " + num(ratio) +
    ", closure " + num(coarse.closure) + " vs " + num(fine.closure)};
}

bool inside(const reflection::OrientedBox & b, double x, double y)
{
  const double dx = x - b.center.x;
  const double dy = y - b.center.y;
  const double c = std::cos(b.heading);
  const double s = std::sin(b.heading);
  return std::abs(c * dx + s * dy) <= b.length / 2 && std::abs(-s * dx + c * dy) <= b.width / 2;
}

void bounds(const reflection::OrientedBox & b, double & x0, double & x1, double & y0, double & y1)
{
  const double c = std::abs(std::cos(b.heading));
  const double s = std::abs(std::sin(b.heading));
  const double hx = c * b.length / 2 + s * b.width / 2;
  const double hy = s * b.length / 2 + c * b.width / 2;
  x0 = std::min(x0, b.center.x - hx);
  x1 = std::max(x1, b.center.x + hx);
  y0 = std::min(y0, b.center.y - hy);
  y1 = std::max(y1, b.center.y + hy);
}

Outcome obb_iou_monte_carlo()
{
  using reflection::OrientedBox;
  const double one = reflection::obb_iou({{3, 4}, 0.7, 4.5, 1.8}, {{3, 4}, 0.7, 4.5, 1.8});
  const double zero = reflection::obb_iou({{0, 0}, 0.0, 2, 2}, {{5, 5}, 0.3, 2, 2});
  const double third = reflection::obb_iou({{0, 0}, 0.0, 2, 2}, {{1, 0}, 0.0, 2, 2});
  const bool exact = one == 1.0 && zero == 0.0 && std::abs(third - 1.0 / 3.0) < 1e-12;

  std::mt19937_64 rng(20260417);
  std::uniform_real_distribution<double> off(-3.0, 3.0), ang(-dynamics::kPi, dynamics::kPi), len(1.0, 6.0),
  wid(0.5, 3.0), unit(0.0, 1.0);
  double worst = 0.0;
  for (int pair = 0; pair < 200; ++pair) {
    const OrientedBox a{{0.0, 0.0}, ang(rng), len(rng), wid(rng)};
    const OrientedBox b{{off(rng), off(rng)}, ang(rng), len(rng), wid(rng)};
    double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
    bounds(a, x0, x1, y0, y1);
    bounds(b, x0, x1, y0, y1);
    long in_a = 0, in_b = 0, both = 0;
    for (int i = 0; i < 1000000; ++i) {
      const double x = x0 + (x1 - x0) * unit(rng);
      const double y = y0 + (y1 - y0) * unit(rng);
      const bool ia = inside(a, x, y);
      const bool ib = inside(b, x, y);
      in_a += ia;
      in_b += ib;
      both += ia && ib;
    }
    const double mc = static_cast<double>(both) / static_cast<double>(in_a + in_b - both);
    worst = std::max(worst, std::abs(mc - reflection::obb_iou(a, b)));
  }
  return {exact && worst < 1e-2, "max |delta| " + num(worst) + " over 200 pairs, exact cases " +
    num(one) + " " + num(zero) + " " + num(third)};
}

Outcome metric_goldens()
{
  using namespace metrics;
  std::vector<std::string> bad;
  auto expect = [&](const char * what, double got, double want) {
      const bool ok = std::isinf(want) ? got == want : std::abs(got - want) <= 1e-12;
      if (!ok) {
        bad.push_back(std::string(what) + "=" + num(got));
      }
    };
  expect("ES fast", efficiency_score(10, 8, 11.11, 0), 1.0);
  expect("ES half", efficiency_score(4, 8, 11.11, 0), 0.5);
  expect("ES zero", efficiency_score(0, 8, 11.11, 0), 0.0);
  const ComfortLimits lim;
  expect("CS within", comfort_score({{1.0, -2.0}, {0.5}, {1.0}, {-1.5}}, lim), 1.0);
  expect("CS mean", comfort_score({{0.0}, {0.0}, {kInfinity}, {kInfinity}}, lim), 0.5);
  expect("CS 2x", comfort_score({{2.0 * lim.lon_accel}, {0.0}, {0.0}, {0.0}}, lim), 0.875);
  expect("TTC", ttc(50, 20, 10), 5.0);
  expect("TTC open", ttc(50, 10, 10), kInfinity);
  expect("TTC contact", ttc(0, 20, 10), 0.0);
  expect("SS safe", safety_score(10, 5), 1.0);
  expect("SS half", safety_score(2.5, 5), 0.5);
  expect("SS inf", safety_score(kInfinity, 5), 1.0);
  ScoreWeights w;
  expect("DS", driving_score(0.8, 0.4, 1.0, w), 0.8);
  w.lambda1 = 1;
  expect("DS penalised", driving_score(0.8, 0.4, 1.0, w), 0.48);
  expect("DS zero", driving_score(0, 0, 0, w), 0.0);
  expect("L2 same", l2_error({{{1, 2}}}, {{{1, 2}}}), 0.0);
  expect("L2 5", l2_error({{{3, 4}}}, {{{0, 0}}}), 5.0);
  expect("L2 2.5", l2_error({{{3, 4}}, {{1, 1}}}, {{{0, 0}}, {{1, 1}}}), 2.5);
  const std::vector<int> c0{0, 0}, c1{2}, c2{2, 0};
  expect("CR 0", collision_rate(c0, 4.0), 0.0);
  expect("CR 0.5", collision_rate(c1, 4.0), 0.5);
  expect("CR 0.25", collision_rate(c2, 4.0), 0.25);
  const std::vector<double> a{1, 2, 3}, b{2, 3, 4}, z{0, 2}, zz{0, 0};
  expect("RMSE 0", rmse(a, a), 0.0);
  expect("RMSE 1", rmse(a, b), 1.0);
  expect("RMSE sqrt2", rmse(z, zz), std::sqrt(2.0));
  std::string detail = "24 golden values";
  for (const auto & s : bad) {
    detail += "; " + s;
  }
  return {bad.empty(), detail};
}

Outcome tokenizer()
{
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> coord(-500.0, 500.0);
  std::uniform_int_distribution<long> grid(-50000, 50000);
  std::uniform_int_distribution<int> count(2, 40);
  double worst = 0.0;
  bool on_grid = true;
  for (int t = 0; t < 1000; ++t) {
    std::vector<Point2> pts(static_cast<std::size_t>(count(rng)));
    for (auto & p : pts) {
      p = {coord(rng), coord(rng)};
    }
    const auto back = planning::detokenize_points(planning::tokenize_trajectory(pts).str());
    if (back.size() != pts.size()) {
      return {false, "length changed"};
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      worst = std::max({worst, std::abs(back[i].x - pts[i].x), std::abs(back[i].y - pts[i].y)});
    }
    std::vector<Point2> g(pts.size());
    for (auto & p : g) {
      p = {static_cast<double>(grid(rng)) / 100.0, static_cast<double>(grid(rng)) / 100.0};
    }
    on_grid = on_grid && planning::detokenize_points(planning::tokenize_trajectory(g).str()) == g;
  }
  return {worst <= 0.005 && on_grid,
    "max error " + num(worst) + ", grid points " + (on_grid ? "exact" : "NOT exact")};
}

Outcome baseline_episodes()
{
  int collisions = 0, unmerged = 0, late = 0, differing = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    harness::RunConfig cfg;
    cfg.run.seed = seed;
    const auto t = harness::run_episode(cfg);
    collisions += t.metrics.collisions;
    std::set<int> ramp;
    for (const auto & a : t.ticks.front().agents) {
      if (a.ramp_origin) {
        ramp.insert(a.id);
      }
    }
    std::map<int, long> merged_at;
    for (const auto & r : t.ticks) {
      for (const auto & e : r.events) {
        if (e.kind == simulation::EventKind::kMergeCompleted) {
          for (int id : e.agents) {
            merged_at.emplace(id, r.tick);
          }
        }
      }
    }
    for (int id : ramp) {
      if (t.outcomes.at(id) != simulation::Outcome::kMergeCompleted || !merged_at.count(id)) {
        ++unmerged;
      } else if (merged_at.at(id) >= 400) {
        ++late;
      }
    }
    differing += harness::trace_to_string(t) != harness::trace_to_string(harness::run_episode(cfg));
  }
  return {collisions == 0 && unmerged == 0 && late == 0 && differing == 0,
    std::to_string(collisions) + " collisions, " + std::to_string(unmerged) + " ramp vehicles not merged, " +
    std::to_string(late) + " late, " + std::to_string(differing) + " non-identical re-runs over 20 seeds"};
}

harness::EpisodeTrace ablation_run(bool enabled)
{
  harness::RunConfig cfg;
  cfg.scenario.spawns = {{2, 200.0, 11.0}, {3, 218.0, 5.6}};
  cfg.scenario.spawn_jitter = 0.0;
  cfg.scenario.speed_jitter = 0.0;
  cfg.run.sensing_radius = 12.0;
  cfg.run.horizon = 80;
  cfg.channel.enabled = enabled;
  return harness::run_episode(cfg);
}

Outcome communication_ablation()
{
  const auto on = ablation_run(true).metrics;
  const auto off = ablation_run(false).metrics;
  const bool pass = off.ss < on.ss && off.ds < on.ds && on.ttc_below_threshold == 0 && off.ttc_below_threshold > 0;
  return {pass, "SS " + num(on.ss) + " vs " + num(off.ss) + ", DS " + num(on.ds) + " vs " + num(off.ds) +
    ", low-TTC ticks " + std::to_string(on.ttc_below_threshold) + " vs " + std::to_string(off.ttc_below_threshold)};
}

Outcome reflection_fixture()
{
  const auto trace = fixtures::run_reflection_episode();
  using Key = std::tuple<reflection::FailureKind, long, int, int>;
  std::set<Key> got;
  for (const auto & r : trace.ticks) {
    for (const auto & f : r.failures) {
      got.insert({f.kind, f.tick, f.agent, f.other});
    }
  }
  const std::set<Key> want{{reflection::FailureKind::kRouteDeviation, 5, 0, -1},
    {reflection::FailureKind::kCollision, 15, 0, 1}};

  auto dump = [](const std::vector<reflection::ReflectionRecord> & recs) {
      std::string s;
      for (const auto & r : recs) {
        s += harness::record_json(r).dump() + "\n";
      }
      return s;
    };
  const auto recs = harness::reflect_trace(trace);
  const std::string first = dump(recs);
  std::istringstream in(harness::trace_to_string(fixtures::run_reflection_episode()));
  const bool stable = !recs.empty() && dump(harness::reflect_trace(harness::parse_trace(in))) == first;

  // loss on each record: the agent's own plan against the corrected target
  double worst = 0.0;
  const double alpha = reflection::Thresholds{}.alpha;
  for (const auto & rec : recs) {
    const auto & tick = trace.ticks[static_cast<std::size_t>(rec.tick)];
    planning::Trajectory plan;
    for (const auto & d : tick.decisions) {
      if (d.agent == 0) {
        plan = d.trajectory;
      }
    }
    const Point2 origin = plan.points.front();
    for (auto & q : plan.points) {
      q = q - origin;
    }
    const auto target = planning::tokenize_trajectory(rec.target_trajectory);
    const auto idx = target.indices();
    std::vector<std::vector<double>> probs;
    double nll = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double p = 0.5 + 0.08 * static_cast<double>(i % 5);
      std::vector<double> row(planning::kVocabulary.size(), (1.0 - p) / (planning::kVocabulary.size() - 1.0));
      row[idx[i]] = p;
      probs.push_back(row);
      nll -= std::log(p);
    }
    const double lm = planning::lm_loss_mean(idx, probs).value;
    const std::size_t n = std::min(plan.points.size(), rec.target_trajectory.points.size());
    plan.points.resize(n);
    planning::Trajectory tgt = rec.target_trajectory;
    tgt.points.resize(n);
    double se = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = plan.points[i].x - tgt.points[i].x;
      const double dy = plan.points[i].y - tgt.points[i].y;
      se += dx * dx + dy * dy;
    }
    const double expected = nll / static_cast<double>(idx.size()) + alpha * se / static_cast<double>(n);
    worst = std::max(worst, std::abs(reflection::reflection_loss(lm, plan, tgt, alpha) - expected));
  }
  return {got == want && stable && worst <= 1e-12,
    std::to_string(got.size()) + " failure cases " + (got == want ? "as expected" : "DIFFER") + ", " +
    std::to_string(recs.size()) + " records " + (stable ? "byte-stable" : "NOT stable") + ", loss error " +
    num(worst)};
}

harness::TrajectoryDataset straight_tracks(double accel)
{
  std::vector<harness::TrackSample> rows;
  for (long v = 0; v < 3; ++v) {
    for (long f = 0; f < 300; ++f) {
      const double t = static_cast<double>(f) * harness::kFrameDt;
      const double v0 = 8.0 + 2.0 * static_cast<double>(v);
      rows.push_back({v, f, v0 * t + 0.5 * accel * t * t, -3.5 * static_cast<double>(v), v0 + accel * t, 0.0});
    }
  }
  return harness::build_pairs(rows, 20);
}

Outcome open_loop()
{
  const auto echo = harness::evaluate_open_loop(straight_tracks(0.7), harness::echo_predict);
  bool zero = echo.l2_avg == 0.0 && echo.rmse_avg == 0.0;
  for (double v : echo.l2) {
    zero = zero && v == 0.0;
  }
  for (double v : echo.rmse) {
    zero = zero && v == 0.0;
  }
  const double a = 1.0;
  const auto cv = harness::evaluate_open_loop(straight_tracks(a), harness::const_vel_predict);
  double worst = 0.0;
  for (std::size_t i = 0; i < harness::kL2Horizons.size(); ++i) {
    const int n = harness::kL2Horizons[i] * 10;
    double sum = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double t = k * harness::kFrameDt;
      sum += 0.5 * a * t * t;
    }
    worst = std::max(worst, std::abs(cv.l2[i] - sum / n));
  }
  for (std::size_t i = 0; i < harness::kRmseHorizons.size(); ++i) {
    const int n = harness::kRmseHorizons[i] * 10;
    double sq = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double t = k * harness::kFrameDt;
      sq += std::pow(0.5 * a * t * t, 2);
    }
    worst = std::max(worst, std::abs(cv.rmse[i] - std::sqrt(sq / n)));
  }
  return {zero && worst <= 1e-9, std::string("echo ") + (zero ? "zero" : "NONZERO") + " on " +
    std::to_string(echo.pairs) + " pairs, const-vel deviation from 1/2 a t^2 " + num(worst)};
}

Outcome cross_attention()
{
  using perception::FeatureMatrix;
  using perception::QueryMatrix;
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> dim(1, 8);
  std::normal_distribution<double> g(0.0, 1.0);
  auto random = [&](int r, int c) {
      Eigen::MatrixXd m(r, c);
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) {
          m(i, j) = g(rng);
        }
      }
      return m;
    };
  double mean_err = 0.0, single_err = 0.0, naive_err = 0.0;
  for (int it = 0; it < 100; ++it) {
    const int m = dim(rng), n = dim(rng), d = dim(rng);
    const Eigen::MatrixXd q = random(m, d);
    const Eigen::MatrixXd f = random(n, d);

    const auto z = perception::cross_attention_align(QueryMatrix{Eigen::MatrixXd::Zero(m, d)}, FeatureMatrix{f});
    const Eigen::RowVectorXd mean = f.colwise().mean();
    for (int i = 0; i < m; ++i) {
      mean_err = std::max(mean_err, (z.values.row(i) - mean).cwiseAbs().maxCoeff());
    }
    const Eigen::MatrixXd one = f.topRows(1);
    const auto s = perception::cross_attention_align(QueryMatrix{q}, FeatureMatrix{one});
    for (int i = 0; i < m; ++i) {
      single_err = std::max(single_err, (s.values.row(i) - one.row(0)).cwiseAbs().maxCoeff());
    }

    const auto out = perception::cross_attention_align(QueryMatrix{q}, FeatureMatrix{f});
    for (int i = 0; i < m; ++i) {
      std::vector<double> logit(static_cast<std::size_t>(n));
      for (int j = 0; j < n; ++j) {
        double dotp = 0.0;
        for (int k = 0; k < d; ++k) {
          dotp += q(i, k) * f(j, k);
        }
        logit[static_cast<std::size_t>(j)] = dotp / std::sqrt(static_cast<double>(d));
      }
      const double mx = *std::max_element(logit.begin(), logit.end());
      double total = 0.0;
      for (double & l : logit) {
        l = std::exp(l - mx);
        total += l;
      }
      for (int k = 0; k < d; ++k) {
        double v = 0.0;
        for (int j = 0; j < n; ++j) {
          v += logit[static_cast<std::size_t>(j)] / total * f(j, k);
        }
        naive_err = std::max(naive_err, std::abs(out.values(i, k) - v));
      }
    }
  }
  return {mean_err <= 1e-12 && single_err <= 1e-12 && naive_err <= 1e-12,
    "zero-query " + num(mean_err) + ", single row " + num(single_err) + ", naive " + num(naive_err)};
}

}  // namespace

int main()
{
  criterion(1, "flatness round trip", 1, flatness);
  criterion(2, "RK4 fourth-order convergence on a circle", 1, rk4_order);
  criterion(3, "OBB IoU against Monte Carlo", 30, obb_iou_monte_carlo);
  criterion(4, "metric golden values", 1, metric_goldens);
  criterion(5, "tokenizer round trip", 1, tokenizer);
  criterion(6, "baseline episodes", 10, baseline_episodes);
  criterion(7, "communication ablation", 5, communication_ablation);
  criterion(8, "reflection fixture", 5, reflection_fixture);
  criterion(9, "open-loop evaluation", 5, open_loop);
  criterion(10, "cross-attention alignment", 1, cross_attention);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
