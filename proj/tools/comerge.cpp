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


// comerge: run, replay, evaluate and reflect on merging episodes.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "comerge/comerge.hpp"

namespace
{

using comerge::harness::Json;

int fail(std::string_view kind, const std::string & message, long tick = comerge::TraceError::kNoTick)
{
  Json j{{"error", std::string(kind)}, {"message", message}};
  if (tick != comerge::TraceError::kNoTick) {
    j["tick"] = tick;
  }
  std::cerr << j.dump() << "\n";
  return 1;
}

std::string env_endpoint()
{
  const char * v = std::getenv(comerge::harness::kEndpointEnv);
  return v ? std::string(v) : std::string();
}

int cmd_run(const std::string & config_path, long long seed, const std::string & out_dir)
{
  comerge::harness::RunConfig cfg = comerge::harness::load_config(config_path);
  if (seed < 0) {
    throw comerge::Error(comerge::ErrorKind::kInvalidArgument, "seed must be non-negative");
  }
  cfg.run.seed = static_cast<std::uint64_t>(seed);
  if (const std::string ep = env_endpoint(); !ep.empty()) {
    comerge::harness::override_endpoint(cfg, ep);
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw comerge::Error(comerge::ErrorKind::kIo, "cannot create " + out_dir + ": " + ec.message());
  }
  const auto trace = comerge::harness::run_episode(cfg);
  const std::string path = (std::filesystem::path(out_dir) / ("trace_" + std::to_string(seed) + ".jsonl")).string();
  comerge::harness::write_trace(trace, path);
  Json summary = comerge::harness::metrics_json(trace.metrics);
  summary["trace"] = path;
  summary["config_hash"] = trace.config_hash;
  std::cout << summary.dump() << "\n";
  return 0;
}

comerge::metrics::ScoreWeights parse_weights(const std::string & text, comerge::metrics::ScoreWeights w)
{
  std::vector<double> v;
  std::stringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    char * end = nullptr;
    const double x = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size()) {
      throw comerge::Error(comerge::ErrorKind::kInvalidArgument, "bad weight '" + cell + "'");
    }
    v.push_back(x);
  }
  if (v.size() != 3 && v.size() != 5) {
    throw comerge::Error(comerge::ErrorKind::kInvalidArgument, "--weights takes k1,k2,k3[,alpha_pen,beta_pen]");
  }
  w.k1 = v[0];
  w.k2 = v[1];
  w.k3 = v[2];
  if (v.size() == 5) {
    w.alpha_pen = v[3];
    w.beta_pen = v[4];
  }
  return w;
}

int cmd_replay(const std::string & trace_path, const std::string & weights)
{
  const auto trace = comerge::harness::read_trace(trace_path);
  std::optional<comerge::metrics::ScoreWeights> w;
  if (!weights.empty()) {
    const auto cfg = comerge::harness::parse_config(trace.config);
    w = parse_weights(weights, cfg.weights.weights);
  }
  const auto rep = comerge::harness::replay(trace, w);
  Json out{{"ticks", rep.ticks}, {"scores_checked", rep.scores_checked}, {"mismatches", rep.mismatches},
    {"first_mismatch_tick", rep.first_mismatch_tick}, {"metrics_match", rep.metrics_match},
    {"canonical", rep.canonical}, {"metrics", comerge::harness::metrics_json(rep.metrics)}};
  std::cout << out.dump() << "\n";
  if (rep.mismatches > 0 || !rep.metrics_match) {
    return fail("trace", "replayed scores differ from the stored values", rep.first_mismatch_tick);
  }
  return 0;
}

int cmd_eval(const std::string & dataset, const std::string & predictor, int stride, long timeout_ms)
{
  const auto ds = comerge::harness::ingest_dataset(dataset, stride);
  comerge::harness::Predictor p;
  if (predictor == "echo") {
    p = comerge::harness::echo_predict;
  } else if (predictor == "const-vel") {
    p = comerge::harness::const_vel_predict;
  } else {
    const std::string ep = env_endpoint();
    if (ep.empty()) {
      throw comerge::Error(comerge::ErrorKind::kConfig,
        std::string("external predictor needs ") + comerge::harness::kEndpointEnv);
    }
    p = comerge::harness::external_predictor(
      std::shared_ptr<comerge::planning::Transport>(comerge::planning::make_transport(ep)),
      std::chrono::milliseconds(timeout_ms));
  }
  const auto rep = comerge::harness::evaluate_open_loop(ds, p);
  Json out{{"pairs", rep.pairs}, {"skipped", ds.skipped},
    {"l2", {{"1s", rep.l2[0]}, {"2s", rep.l2[1]}, {"3s", rep.l2[2]}, {"avg", rep.l2_avg}}},
    {"collision_pct", {{"1s", rep.collision[0]}, {"2s", rep.collision[1]}, {"3s", rep.collision[2]},
      {"avg", rep.collision_avg}}},
    {"rmse", {{"1s", rep.rmse[0]}, {"2s", rep.rmse[1]}, {"3s", rep.rmse[2]}, {"4s", rep.rmse[3]},
      {"avg", rep.rmse_avg}}}};
  std::cout << out.dump() << "\n";
  return 0;
}

int cmd_reflect(const std::string & trace_path, const std::string & out_path, long episode)
{
  const auto trace = comerge::harness::read_trace(trace_path);
  const auto records = comerge::harness::reflect_trace(trace, episode);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    throw comerge::Error(comerge::ErrorKind::kIo, "cannot write " + out_path);
  }
  for (const auto & r : records) {
    out << comerge::harness::record_json(r).dump() << "\n";
  }
  out.close();
  if (!out) {
    throw comerge::Error(comerge::ErrorKind::kIo, "write failed for " + out_path);
  }
  std::cout << Json{{"records", records.size()}, {"out", out_path}}.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Cooperative on-ramp merging episodes"};
  app.require_subcommand(1);

  std::string config, out_dir, trace, dataset, predictor, out_file, weights;
  long long seed = 0;
  int stride = comerge::harness::kWindowFrames;
  long timeout_ms = 2000;
  long episode = 0;

  auto * run = app.add_subcommand("run", "run one seeded episode and write its trace");
  run->add_option("--config", config, "config file (JSON)")->required();
  run->add_option("--seed", seed, "episode seed")->required();
  run->add_option("--out", out_dir, "output directory")->required();

  auto * rep = app.add_subcommand("replay", "recompute scores from a trace");
  rep->add_option("--trace", trace, "trace file")->required();
  rep->add_option("--weights", weights, "k1,k2,k3[,alpha_pen,beta_pen]");

  auto * ev = app.add_subcommand("eval", "open-loop evaluation on a trajectory CSV");
  ev->add_option("--dataset", dataset, "CSV with vehicle_id,frame,x,y,vx,vy")->required();
  ev->add_option("--predictor", predictor, "echo | const-vel | external")
    ->required()->check(CLI::IsMember({"echo", "const-vel", "external"}));
  ev->add_option("--stride", stride, "window stride in frames");
  ev->add_option("--timeout-ms", timeout_ms, "external predictor timeout");

  auto * rf = app.add_subcommand("reflect", "emit reflection records for the failures in a trace");
  rf->add_option("--trace", trace, "trace file")->required();
  rf->add_option("--out", out_file, "output JSONL")->required();
  rf->add_option("--episode", episode, "episode index written into the records");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp & e) {
    return app.exit(e);
  } catch (const CLI::ParseError & e) {
    fail("usage", e.what());
    return 2;
  }

  try {
    if (*run) {
      return cmd_run(config, seed, out_dir);
    }
    if (*rep) {
      return cmd_replay(trace, weights);
    }
    if (*ev) {
      return cmd_eval(dataset, predictor, stride, timeout_ms);
    }
    return cmd_reflect(trace, out_file, episode);
  } catch (const comerge::TraceError & e) {
    return fail(comerge::to_string(e.kind()), e.what(), e.tick());
  } catch (const comerge::Error & e) {
    return fail(comerge::to_string(e.kind()), e.what());
  } catch (const std::exception & e) {
    return fail("internal", e.what());
  }
}
