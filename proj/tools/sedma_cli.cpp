// sedma: run scenarios, ablations, benchmark sweeps and event replays.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sedma/sedma.hpp"

namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> rounds;
  std::optional<double> theta, rho;
};

sedma::ScenarioConfig load_with(const std::string& path, const Overrides& o) {
  auto cfg = sedma::load_scenario(path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.rounds) cfg.rounds = *o.rounds;
  if (o.theta) cfg.trigger.theta = *o.theta;
  if (o.rho) cfg.trigger.rho = *o.rho;
  cfg.validate();
  return cfg;
}

int report_error(const std::string& command, const std::string& what) {
  nlohmann::ordered_json j;
  j["status"] = "error";
  j["command"] = command;
  j["message"] = what;
  std::cerr << j.dump() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SEDMA simulator"};
  app.require_subcommand(1);

  Overrides ov;
  std::string out_dir = "out";
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", ov.seed, "Override the scenario seed (beats SEDMA_SEED)");
    sub->add_option("--rounds", ov.rounds, "Override the number of rounds");
    sub->add_option("--theta", ov.theta, "Performance-ratio trigger threshold");
    sub->add_option("--rho", ov.rho, "Utilization trigger threshold");
    sub->add_option("--out", out_dir, "Output directory");
  };

  std::string scenario;
  auto* run = app.add_subcommand("run", "Run a scenario");
  run->add_option("scenario", scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  add_common(run);

  std::vector<std::string> axes;
  std::size_t reps = 1;
  auto* ablate = app.add_subcommand("ablate", "Full model vs single-flag ablations");
  ablate->add_option("scenario", scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  ablate->add_option("--axes", axes, "Ablation flags")->delimiter(',')->required();
  ablate->add_option("--reps", reps, "Paired-seed repetitions per variant");
  add_common(ablate);

  std::string sweep;
  std::uint64_t bench_seed = 1;
  auto* bench = app.add_subcommand("bench", "Benchmark sweeps");
  bench->add_option("--sweep", sweep, "peers | dht | cache | noise")->required();
  bench->add_option("--seed", bench_seed, "Seed");
  bench->add_option("--out", out_dir, "Output directory");

  std::string events_path;
  auto* replay = app.add_subcommand("replay", "Validate and summarize an event stream");
  replay->add_option("events", events_path, "events.jsonl")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (*run) {
      auto cfg = load_with(scenario, ov);
      auto result = sedma::run_scenario(cfg);
      sedma::write_run_outputs(result, out_dir);
      std::cout << result.metrics_json();
    } else if (*ablate) {
      auto cfg = load_with(scenario, ov);
      auto table = sedma::run_ablation(cfg, axes, reps).table();
      table.write(fs::path(out_dir) / "summary.csv");
      std::cout << table.to_csv();
    } else if (*bench) {
      auto table = sedma::run_bench(sweep, bench_seed);
      table.write(fs::path(out_dir) / ("bench_" + sweep + ".csv"));
      if (sweep == "cache") table.write(fs::path(out_dir) / "summary.csv");
      std::cout << table.to_csv();
    } else if (*replay) {
      std::ifstream in(events_path);
      auto s = sedma::replay_events(in);
      nlohmann::ordered_json j;
      j["events"] = s.events;
      j["kinds"] = s.kinds;
      j["transfers"] = s.transfers;
      j["success_rate"] = s.success_rate();
      j["bytes"] = s.bytes;
      j["last_t_ms"] = s.last_t_ms;
      j["monotone"] = s.monotone;
      std::cout << j.dump(2) << "\n";
      if (!s.monotone) return report_error(command, "event timestamps are not monotone");
    }
  } catch (const std::exception& e) {
    return report_error(command, e.what());
  }
  return 0;
}
